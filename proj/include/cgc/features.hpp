#pragma once

#include <array>
#include <utility>
#include <vector>

#include "cgc/pnm.hpp"

namespace cgc {

// Fixed descriptor layout; the centroid rides separately as the node's
// spatial coordinates.
enum DescriptorIndex {
  kMeanIntensity = 0,
  kFgBgDiff,
  kIntensityStd,
  kIntensitySkewness,
  kIntensityEntropy,
  kGlcmDissimilarity,
  kGlcmHomogeneity,
  kGlcmEnergy,
  kGlcmAsm,
  kEccentricity,
  kArea,
  kMajorAxis,
  kMinorAxis,
  kPerimeter,
  kSolidity,
  kOrientation,
  kDescriptorCount  // = 16 appearance/shape scalars
};

struct Descriptor {
  std::array<double, kDescriptorCount> v{};
  double centroid_row = 0.0;
  double centroid_col = 0.0;
};

struct InstanceRegion {
  int label = 0;
  std::vector<std::pair<int, int>> pixels;  // (row, col), scan order
  int r0 = 0, r1 = -1, c0 = 0, c1 = -1;     // inclusive bounding box
  std::vector<double> fg;                   // intensities on the instance
  std::vector<double> bg;                   // intensities on the background ring
};

struct IntensityStats {
  double mean, fg_bg_diff, stdev, skewness, entropy;
};

struct GlcmStats {
  double dissimilarity, homogeneity, energy, angular_second_moment;
};

struct ShapeStats {
  double eccentricity, area, major_axis, minor_axis, perimeter, solidity, orientation;
  double centroid_row, centroid_col;
};

// One region per distinct positive label, ascending label order. The
// background ring is every label-0 pixel within Chebyshev distance 3 of the
// instance.
std::vector<InstanceRegion> extract_instances(const GrayImage& labels,
                                              const GrayImage& img);

// Foreground moments (skewness = m3 / m2^1.5, 0 for flat regions), mean
// difference against the ring (0 if the ring is empty), and the natural-log
// entropy of an 8-bin histogram over [0,255].
IntensityStats intensity_stats(const InstanceRegion& region);

// Co-occurrence over 8 uniform gray levels of [0,255], offset 1, four
// orientations accumulated, symmetrized, normalized. A region with no valid
// pixel pairs follows the constant-image convention (0, 1, 1, 1).
GlcmStats glcm_features(const InstanceRegion& region, const GrayImage& img);

// Moments-ellipse geometry (with the 1/12 per-pixel variance correction),
// traced-contour perimeter (axial step 1, diagonal sqrt 2), and convex-hull
// solidity clamped to <= 1.
ShapeStats shape_features(const InstanceRegion& region);

std::vector<Descriptor> build_descriptors(const GrayImage& labels, const GrayImage& img);

}  // namespace cgc
