#include "cgc/pnm.hpp"

#include <cmath>
#include <fstream>

namespace cgc {

namespace {

// next token, skipping whitespace and '#' comments
std::string pnm_token(std::istream& in) {
  std::string tok;
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (std::isspace(ch)) {
      ch = in.get();
    } else {
      break;
    }
  }
  while (ch != EOF && !std::isspace(ch)) {
    tok.push_back(static_cast<char>(ch));
    ch = in.get();
  }
  return tok;
}

int pnm_int(std::istream& in, const std::string& path, const char* what) {
  const std::string tok = pnm_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(path + ": bad " + what + " in header");
  }
}

}  // namespace

GrayImage read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  const std::string magic = pnm_token(in);
  if (magic != "P5" && magic != "P6") throw IoError(path + ": not a binary P5/P6 file");
  const int cols = pnm_int(in, path, "width");
  const int rows = pnm_int(in, path, "height");
  const int maxval = pnm_int(in, path, "maxval");
  if (cols <= 0 || rows <= 0) throw IoError(path + ": empty raster");
  if (maxval <= 0 || maxval > 65535) throw IoError(path + ": maxval out of range");
  // header ends with exactly one whitespace character (already consumed by
  // the tokenizer reading past the maxval digits)

  const int channels = magic == "P6" ? 3 : 1;
  const int bytes_per = maxval > 255 ? 2 : 1;
  const std::size_t count = static_cast<std::size_t>(rows) * cols * channels;
  std::vector<unsigned char> raw(count * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw IoError(path + ": truncated raster data");

  auto sample = [&](std::size_t idx) -> std::uint32_t {
    if (bytes_per == 1) return raw[idx];
    return (static_cast<std::uint32_t>(raw[2 * idx]) << 8) | raw[2 * idx + 1];
  };

  GrayImage img(rows, cols, static_cast<std::uint16_t>(maxval));
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  if (channels == 1) {
    for (std::size_t i = 0; i < n; ++i) img.pix[i] = static_cast<std::uint16_t>(sample(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double y = 0.299 * sample(3 * i) + 0.587 * sample(3 * i + 1) +
                       0.114 * sample(3 * i + 2);
      img.pix[i] = static_cast<std::uint16_t>(std::lround(y));
    }
  }
  return img;
}

void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "P5\n" << img.cols << " " << img.rows << "\n" << img.maxval << "\n";
  if (img.maxval > 255) {
    for (std::uint16_t v : img.pix) {
      out.put(static_cast<char>(v >> 8));
      out.put(static_cast<char>(v & 0xff));
    }
  } else {
    for (std::uint16_t v : img.pix) out.put(static_cast<char>(v & 0xff));
  }
  if (!out) throw IoError(path + ": write failed");
}

}  // namespace cgc
