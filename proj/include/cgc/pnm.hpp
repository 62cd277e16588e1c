#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgc/errors.hpp"

namespace cgc {

// Row-major single-channel raster. Holds 8-bit intensity images (values in
// [0,255]) and 16-bit instance label maps alike.
struct GrayImage {
  int rows = 0;
  int cols = 0;
  std::uint16_t maxval = 255;
  std::vector<std::uint16_t> pix;

  GrayImage() = default;
  GrayImage(int r, int c, std::uint16_t mv = 255)
      : rows(r), cols(c), maxval(mv), pix(static_cast<std::size_t>(r) * c, 0) {}

  std::uint16_t& at(int r, int c) { return pix[static_cast<std::size_t>(r) * cols + c]; }
  std::uint16_t at(int r, int c) const { return pix[static_cast<std::size_t>(r) * cols + c]; }
  bool inside(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }
};

// Reads P5 (8- or 16-bit, big-endian samples) directly; P6 is converted to
// gray with luma weights 0.299/0.587/0.114 (rounded to nearest).
GrayImage read_pnm(const std::string& path);

// Binary P5; samples are 1 byte when maxval <= 255, else 2 bytes big-endian.
void write_pgm(const std::string& path, const GrayImage& img);

}  // namespace cgc
