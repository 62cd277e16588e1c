#include "cgc/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace cgc {

namespace {

constexpr int kRingWidth = 3;  // Chebyshev radius of the background ring

int gray_level(double v) {
  const int q = static_cast<int>(v / 32.0);
  return std::min(7, std::max(0, q));
}

// clockwise 8-neighborhood starting east; even indices are axial moves
constexpr int kDr[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kDc[8] = {1, 1, 0, -1, -1, -1, 0, 1};

int direction_index(int dr, int dc) {
  for (int d = 0; d < 8; ++d)
    if (kDr[d] == dr && kDc[d] == dc) return d;
  return -1;
}

// chain length of the traced outer contour, starting from the topmost
// leftmost pixel of `mask` (padded, so no bounds checks needed inside)
double contour_chain_length(const std::vector<std::uint8_t>& mask, int rows, int cols) {
  int sr = -1, sc = -1;
  for (int r = 0; r < rows && sr < 0; ++r)
    for (int c = 0; c < cols; ++c)
      if (mask[static_cast<std::size_t>(r) * cols + c]) {
        sr = r;
        sc = c;
        break;
      }
  if (sr < 0) return 0.0;
  auto fg = [&](int r, int c) { return mask[static_cast<std::size_t>(r) * cols + c] != 0; };

  int cr = sr, cc = sc;
  int back = 4;  // west of the start pixel is guaranteed background
  int first_move = -1;
  double total = 0.0;
  const long cap = 8L * rows * cols + 16;
  for (long iter = 0; iter < cap; ++iter) {
    int found = -1;
    for (int s = 1; s <= 8; ++s) {
      const int d = (back + s) % 8;
      if (fg(cr + kDr[d], cc + kDc[d])) {
        found = d;
        break;
      }
    }
    if (found < 0) return 0.0;  // isolated pixel
    // the walk is fully determined by (position, move); once the start pixel
    // is about to repeat its first move, the boundary cycle is complete
    if (iter > 0 && cr == sr && cc == sc && found == first_move) break;
    if (iter == 0) first_move = found;
    const int prev = (found + 7) % 8;  // last background cell examined
    const int qr = cr + kDr[prev], qc = cc + kDc[prev];
    cr += kDr[found];
    cc += kDc[found];
    total += found % 2 == 0 ? 1.0 : std::numbers::sqrt2;
    back = direction_index(qr - cr, qc - cc);
  }
  return total;
}

double cross(const std::pair<double, double>& o, const std::pair<double, double>& a,
             const std::pair<double, double>& b) {
  return (a.first - o.first) * (b.second - o.second) -
         (a.second - o.second) * (b.first - o.first);
}

// monotone chain; returns hull area (0 for degenerate sets)
double convex_hull_area(std::vector<std::pair<double, double>> pts) {
  if (pts.size() < 3) return 0.0;
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return 0.0;
  std::vector<std::pair<double, double>> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = pts.size() - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  double area2 = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& p = hull[i];
    const auto& q = hull[(i + 1) % hull.size()];
    area2 += p.first * q.second - q.first * p.second;
  }
  return std::abs(area2) * 0.5;
}

}  // namespace

std::vector<InstanceRegion> extract_instances(const GrayImage& labels,
                                              const GrayImage& img) {
  if (labels.rows != img.rows || labels.cols != img.cols)
    throw DimensionError("extract_instances: label map and image sizes differ");

  std::map<int, InstanceRegion> by_label;
  for (int r = 0; r < labels.rows; ++r) {
    for (int c = 0; c < labels.cols; ++c) {
      const int lab = labels.at(r, c);
      if (lab == 0) continue;
      auto& reg = by_label[lab];
      if (reg.pixels.empty()) {
        reg.label = lab;
        reg.r0 = reg.r1 = r;
        reg.c0 = reg.c1 = c;
      }
      reg.r0 = std::min(reg.r0, r);
      reg.r1 = std::max(reg.r1, r);
      reg.c0 = std::min(reg.c0, c);
      reg.c1 = std::max(reg.c1, c);
      reg.pixels.emplace_back(r, c);
      reg.fg.push_back(static_cast<double>(img.at(r, c)));
    }
  }

  std::vector<InstanceRegion> out;
  out.reserve(by_label.size());
  for (auto& [lab, reg] : by_label) {
    // dilate the instance mask by the ring radius, then keep background cells
    const int rr0 = std::max(0, reg.r0 - kRingWidth);
    const int rr1 = std::min(labels.rows - 1, reg.r1 + kRingWidth);
    const int cc0 = std::max(0, reg.c0 - kRingWidth);
    const int cc1 = std::min(labels.cols - 1, reg.c1 + kRingWidth);
    const int h = rr1 - rr0 + 1, w = cc1 - cc0 + 1;
    std::vector<std::uint8_t> near(static_cast<std::size_t>(h) * w, 0);
    for (const auto& [pr, pc] : reg.pixels)
      near[static_cast<std::size_t>(pr - rr0) * w + (pc - cc0)] = 1;
    for (int pass = 0; pass < kRingWidth; ++pass) {
      std::vector<std::uint8_t> next = near;
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          if (near[static_cast<std::size_t>(r) * w + c]) continue;
          for (int d = 0; d < 8 && !next[static_cast<std::size_t>(r) * w + c]; ++d) {
            const int nr = r + kDr[d], nc = c + kDc[d];
            if (nr >= 0 && nr < h && nc >= 0 && nc < w &&
                near[static_cast<std::size_t>(nr) * w + nc])
              next[static_cast<std::size_t>(r) * w + c] = 1;
          }
        }
      near.swap(next);
    }
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if (near[static_cast<std::size_t>(r) * w + c] &&
            labels.at(rr0 + r, cc0 + c) == 0)
          reg.bg.push_back(static_cast<double>(img.at(rr0 + r, cc0 + c)));
    out.push_back(std::move(reg));
  }
  return out;
}

IntensityStats intensity_stats(const InstanceRegion& region) {
  if (region.pixels.empty()) throw Error("intensity_stats: empty region");
  const double n = static_cast<double>(region.fg.size());
  double mean = 0.0;
  for (double x : region.fg) mean += x;
  mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double x : region.fg) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;

  IntensityStats s{};
  s.mean = mean;
  s.stdev = std::sqrt(m2);
  s.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;

  if (region.bg.empty()) {
    s.fg_bg_diff = 0.0;
  } else {
    double bgm = 0.0;
    for (double x : region.bg) bgm += x;
    s.fg_bg_diff = mean - bgm / static_cast<double>(region.bg.size());
  }

  double hist[8] = {};
  for (double x : region.fg) hist[gray_level(x)] += 1.0;
  double entropy = 0.0;
  for (double h : hist) {
    if (h <= 0.0) continue;
    const double p = h / n;
    entropy -= p * std::log(p);
  }
  s.entropy = entropy;
  return s;
}

GlcmStats glcm_features(const InstanceRegion& region, const GrayImage& img) {
  if (region.pixels.empty()) throw Error("glcm_features: empty region");
  const int h = region.r1 - region.r0 + 1, w = region.c1 - region.c0 + 1;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w, 0);
  for (const auto& [r, c] : region.pixels)
    mask[static_cast<std::size_t>(r - region.r0) * w + (c - region.c0)] = 1;
  auto inside = [&](int r, int c) {
    return r >= region.r0 && r <= region.r1 && c >= region.c0 && c <= region.c1 &&
           mask[static_cast<std::size_t>(r - region.r0) * w + (c - region.c0)];
  };

  // 0, 45, 90, 135 degrees at offset 1, accumulated into one matrix
  constexpr int odr[4] = {0, -1, -1, -1};
  constexpr int odc[4] = {1, 1, 0, -1};
  double cooc[8][8] = {};
  double total = 0.0;
  for (const auto& [r, c] : region.pixels) {
    const int a = gray_level(static_cast<double>(img.at(r, c)));
    for (int o = 0; o < 4; ++o) {
      const int nr = r + odr[o], nc = c + odc[o];
      if (!inside(nr, nc)) continue;
      const int b = gray_level(static_cast<double>(img.at(nr, nc)));
      cooc[a][b] += 1.0;  // symmetrized below
      total += 1.0;
    }
  }

  GlcmStats g{};
  if (total == 0.0) {  // single pixel or no eligible pairs: constant-image case
    g.dissimilarity = 0.0;
    g.homogeneity = 1.0;
    g.energy = 1.0;
    g.angular_second_moment = 1.0;
    return g;
  }
  double p[8][8];
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) p[i][j] = (cooc[i][j] + cooc[j][i]) / (2.0 * total);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      const int d = std::abs(i - j);
      g.dissimilarity += p[i][j] * d;
      g.homogeneity += p[i][j] / (1.0 + d * d);
      g.angular_second_moment += p[i][j] * p[i][j];
    }
  }
  g.energy = std::sqrt(g.angular_second_moment);
  return g;
}

ShapeStats shape_features(const InstanceRegion& region) {
  if (region.pixels.empty()) throw Error("shape_features: empty region");
  const double n = static_cast<double>(region.pixels.size());
  double mr = 0.0, mc = 0.0;
  for (const auto& [r, c] : region.pixels) {
    mr += r;
    mc += c;
  }
  mr /= n;
  mc /= n;

  // second central moments; x runs along columns, y along rows
  double mxx = 0.0, myy = 0.0, mxy = 0.0;
  for (const auto& [r, c] : region.pixels) {
    const double y = r - mr, x = c - mc;
    mxx += x * x;
    myy += y * y;
    mxy += x * y;
  }
  mxx = mxx / n + 1.0 / 12.0;
  myy = myy / n + 1.0 / 12.0;
  mxy /= n;

  const double half = 0.5 * (mxx + myy);
  const double spread = std::sqrt(0.25 * (mxx - myy) * (mxx - myy) + mxy * mxy);
  const double l1 = half + spread;
  const double l2 = std::max(0.0, half - spread);

  ShapeStats s{};
  s.area = n;
  s.centroid_row = mr;
  s.centroid_col = mc;
  s.major_axis = 4.0 * std::sqrt(l1);
  s.minor_axis = 4.0 * std::sqrt(l2);
  s.eccentricity = l1 > 0.0 ? std::sqrt(std::max(0.0, 1.0 - l2 / l1)) : 0.0;
  s.orientation = 0.5 * std::atan2(2.0 * mxy, mxx - myy);

  if (region.pixels.size() == 1) {
    s.perimeter = 0.0;
  } else {
    const int h = region.r1 - region.r0 + 3, w = region.c1 - region.c0 + 3;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w, 0);
    for (const auto& [r, c] : region.pixels)
      mask[static_cast<std::size_t>(r - region.r0 + 1) * w + (c - region.c0 + 1)] = 1;
    s.perimeter = contour_chain_length(mask, h, w);
  }

  std::vector<std::pair<double, double>> pts;
  pts.reserve(region.pixels.size());
  for (const auto& [r, c] : region.pixels) pts.emplace_back(r, c);
  const double hull = convex_hull_area(std::move(pts));
  s.solidity = hull > 0.0 ? std::min(1.0, n / hull) : 1.0;
  return s;
}

std::vector<Descriptor> build_descriptors(const GrayImage& labels, const GrayImage& img) {
  std::vector<Descriptor> out;
  for (const auto& region : extract_instances(labels, img)) {
    const IntensityStats is = intensity_stats(region);
    const GlcmStats gs = glcm_features(region, img);
    const ShapeStats ss = shape_features(region);
    Descriptor d;
    d.v[kMeanIntensity] = is.mean;
    d.v[kFgBgDiff] = is.fg_bg_diff;
    d.v[kIntensityStd] = is.stdev;
    d.v[kIntensitySkewness] = is.skewness;
    d.v[kIntensityEntropy] = is.entropy;
    d.v[kGlcmDissimilarity] = gs.dissimilarity;
    d.v[kGlcmHomogeneity] = gs.homogeneity;
    d.v[kGlcmEnergy] = gs.energy;
    d.v[kGlcmAsm] = gs.angular_second_moment;
    d.v[kEccentricity] = ss.eccentricity;
    d.v[kArea] = ss.area;
    d.v[kMajorAxis] = ss.major_axis;
    d.v[kMinorAxis] = ss.minor_axis;
    d.v[kPerimeter] = ss.perimeter;
    d.v[kSolidity] = ss.solidity;
    d.v[kOrientation] = ss.orientation;
    d.centroid_row = ss.centroid_row;
    d.centroid_col = ss.centroid_col;
    out.push_back(d);
  }
  return out;
}

}  // namespace cgc
