#include "cgc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <utility>

#include "cgc/errors.hpp"
#include "cgc/features.hpp"
#include "cgc/rng.hpp"

namespace cgc {

namespace {

constexpr double kMinSeparation = 9.0;  // hard-core distance between centroids
constexpr double kMargin = 8.0;         // keeps whole nuclei inside the canvas
constexpr int kPlacementRetries = 20;
constexpr double kMaxSemiAxis = 4.0;    // < kMinSeparation/2, so nuclei never overlap
constexpr double kBackgroundMean = 230.0;
constexpr double kClassMeans[3] = {90.0, 130.0, 170.0};

std::uint16_t clamp_to_byte(double v) {
  return static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, 255L));
}

struct Placement {
  double row = 0.0;
  double col = 0.0;
};

}  // namespace

void SynthConfig::validate() const {
  if (label < 0 || label > 2) throw ConfigError("synth label must be 0, 1 or 2");
  if (n_glands < 1) throw ConfigError("n_glands must be >= 1");
  if (nuclei_per_gland < 1) throw ConfigError("nuclei_per_gland must be >= 1");
  if (ring_radius <= 0.0) throw ConfigError("ring_radius must be > 0");
  if (ring_jitter < 0.0 || ring_jitter >= ring_radius)
    throw ConfigError("ring_jitter must lie in [0, ring_radius)");
  if (disruption < 0.0 || disruption > 1.0)
    throw ConfigError("disruption must lie in [0, 1]");
  if (feature_noise < 0.0) throw ConfigError("feature_noise must be >= 0");
  if (canvas < 64) throw ConfigError("canvas must be >= 64");
}

double disruption_for_class(int cls) {
  switch (cls) {
    case 0: return 0.0;
    case 1: return 0.5;
    case 2: return 1.0;
    default: throw ConfigError("class index must be 0, 1 or 2");
  }
}

SynthImage generate_image(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int N = cfg.canvas;
  const double d = cfg.disruption;
  const double inflate = d * cfg.feature_noise;

  SynthImage img;
  img.labels = GrayImage(N, N, 1);
  img.intensity = GrayImage(N, N, 255);
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < N; ++c)
      img.intensity.at(r, c) = clamp_to_byte(kBackgroundMean + rng.normal() * 2.0);

  // gland anchors on a jittered 3x3 grid
  const double cell = static_cast<double>(N) / 3.0;
  std::vector<int> cells(9);
  for (int i = 0; i < 9; ++i) cells[i] = i;
  rng.shuffle(cells);
  std::vector<Placement> anchors;
  for (int g = 0; g < cfg.n_glands; ++g) {
    const int slot = cells[static_cast<std::size_t>(g % 9)];
    Placement a;
    a.row = (slot / 3 + 0.5) * cell + rng.uniform(-0.1, 0.1) * cell;
    a.col = (slot % 3 + 0.5) * cell + rng.uniform(-0.1, 0.1) * cell;
    anchors.push_back(a);
  }

  const double lo = kMargin;
  const double hi = static_cast<double>(N) - kMargin;
  std::vector<Placement> accepted;
  std::vector<Placement> centers;  // per accepted nucleus
  for (int g = 0; g < cfg.n_glands; ++g) {
    const int m = cfg.nuclei_per_gland;
    for (int k = 0; k < m; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
        const double theta =
            2.0 * std::numbers::pi * (static_cast<double>(k) + rng.uniform(-0.35, 0.35)) /
            static_cast<double>(m);
        const double radius = cfg.ring_radius + rng.uniform(-cfg.ring_jitter, cfg.ring_jitter);
        const double ring_row = anchors[static_cast<std::size_t>(g)].row + radius * std::sin(theta);
        const double ring_col = anchors[static_cast<std::size_t>(g)].col + radius * std::cos(theta);
        const double scat_row = rng.uniform(lo, hi);
        const double scat_col = rng.uniform(lo, hi);
        Placement p;
        p.row = (1.0 - d) * ring_row + d * scat_row;
        p.col = (1.0 - d) * ring_col + d * scat_col;
        if (p.row < lo || p.row > hi || p.col < lo || p.col > hi) continue;
        bool clear = true;
        for (const Placement& q : accepted) {
          const double dr = p.row - q.row;
          const double dc = p.col - q.col;
          if (dr * dr + dc * dc < kMinSeparation * kMinSeparation) {
            clear = false;
            break;
          }
        }
        if (!clear) continue;
        accepted.push_back(p);
        centers.push_back(p);
        placed = true;
      }
    }
  }

  // draw each nucleus as a filled rotated ellipse with its own intensity model
  int next_id = 0;
  for (const Placement& p : centers) {
    ++next_id;
    double a = rng.uniform(2.4, 3.4) * (1.0 + 0.3 * inflate * rng.uniform());
    a = std::min(a, kMaxSemiAxis);
    double b = rng.uniform(1.8, 2.6) * (1.0 + 0.3 * inflate * rng.uniform());
    b = std::min(b, a);
    const double phi = rng.uniform(0.0, std::numbers::pi);
    const double mean =
        kClassMeans[cfg.label] + rng.normal() * (5.0 * (1.0 + 2.0 * inflate));
    const double pixel_sigma = 3.0 * (1.0 + 1.5 * inflate);

    const double cphi = std::cos(phi);
    const double sphi = std::sin(phi);
    const int r0 = static_cast<int>(std::floor(p.row - a));
    const int r1 = static_cast<int>(std::ceil(p.row + a));
    const int c0 = static_cast<int>(std::floor(p.col - a));
    const int c1 = static_cast<int>(std::ceil(p.col + a));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        if (!img.labels.inside(r, c)) continue;
        const double dr = static_cast<double>(r) - p.row;
        const double dc = static_cast<double>(c) - p.col;
        const double u = dc * cphi + dr * sphi;
        const double v = -dc * sphi + dr * cphi;
        if ((u * u) / (a * a) + (v * v) / (b * b) > 1.0) continue;
        if (img.labels.at(r, c) != 0) continue;
        img.labels.at(r, c) = static_cast<std::uint16_t>(next_id);
        img.intensity.at(r, c) = clamp_to_byte(mean + rng.normal() * pixel_sigma);
      }
    }
  }
  img.labels.maxval = static_cast<std::uint16_t>(std::max(1, next_id));
  return img;
}

std::vector<SamplePlan> dataset_plan(int n_per_class, std::uint64_t seed) {
  if (n_per_class < 1) throw ConfigError("n_per_class must be >= 1");
  Rng master(seed);
  std::vector<SamplePlan> plans;
  plans.reserve(static_cast<std::size_t>(n_per_class) * 3);
  for (int cls = 0; cls < 3; ++cls) {
    for (int rep = 0; rep < n_per_class; ++rep) {
      const std::uint64_t idx =
          static_cast<std::uint64_t>(cls) * static_cast<std::uint64_t>(n_per_class) +
          static_cast<std::uint64_t>(rep);
      SamplePlan plan;
      plan.cfg.label = cls;
      plan.cfg.disruption = disruption_for_class(cls);
      plan.cfg.seed = master.split(2 * idx).seed();
      plan.graph_seed = master.split(2 * idx + 1).seed();
      char buf[32];
      std::snprintf(buf, sizeof buf, "c%d_r%04d", cls, rep);
      plan.image_id = buf;
      plans.push_back(std::move(plan));
    }
  }
  return plans;
}

CellGraph realize_sample(const SamplePlan& plan, const SamplerConfig& sampler,
                         const EdgeConfig& edge) {
  const SynthImage img = generate_image(plan.cfg);
  const std::vector<Descriptor> descriptors = build_descriptors(img.labels, img.intensity);
  return assemble_graph(descriptors, sampler, edge, plan.cfg.label, plan.graph_seed,
                        plan.image_id);
}

SynthDataset generate_dataset(int n_per_class, std::uint64_t seed,
                              const SamplerConfig& sampler, const EdgeConfig& edge) {
  const std::vector<SamplePlan> plans = dataset_plan(n_per_class, seed);
  std::vector<std::vector<CellGraph>> byclass(3);
  for (const SamplePlan& plan : plans)
    byclass[static_cast<std::size_t>(plan.cfg.label)].push_back(
        realize_sample(plan, sampler, edge));

  Rng master(seed);
  std::vector<std::vector<int>> order(3);
  for (int cls = 0; cls < 3; ++cls) {
    order[cls].resize(static_cast<std::size_t>(n_per_class));
    for (int i = 0; i < n_per_class; ++i) order[cls][static_cast<std::size_t>(i)] = i;
    Rng shuffle_rng = master.split(0x9000000ull + static_cast<std::uint64_t>(cls));
    shuffle_rng.shuffle(order[cls]);
  }

  // class-interleaved order keeps both splits near-balanced
  std::vector<CellGraph> interleaved;
  interleaved.reserve(plans.size());
  for (int round = 0; round < n_per_class; ++round)
    for (int cls = 0; cls < 3; ++cls)
      interleaved.push_back(
          std::move(byclass[cls][static_cast<std::size_t>(order[cls][round])]));

  const std::size_t n_train = interleaved.size() * 2 / 3;
  SynthDataset out;
  out.train.assign(std::make_move_iterator(interleaved.begin()),
                   std::make_move_iterator(interleaved.begin() + static_cast<std::ptrdiff_t>(n_train)));
  out.test.assign(std::make_move_iterator(interleaved.begin() + static_cast<std::ptrdiff_t>(n_train)),
                  std::make_move_iterator(interleaved.end()));
  return out;
}

}  // namespace cgc
