#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgc/graph.hpp"
#include "cgc/pnm.hpp"

namespace cgc {

// One synthetic tissue image: glands laid out as rings of elliptical nuclei.
// `disruption` interpolates each nucleus position from its ring slot toward a
// uniform scatter over the canvas and inflates shape/intensity variance.
struct SynthConfig {
  int label = 0;  // class index, 0..2
  int n_glands = 8;
  int nuclei_per_gland = 25;
  double ring_radius = 46.0;
  double ring_jitter = 2.5;   // radial jitter, uniform in +-ring_jitter
  double disruption = 0.0;    // 0 intact rings, 1 uniform scatter
  double feature_noise = 1.0; // scales the disruption-driven variance inflation
  int canvas = 512;
  std::uint64_t seed = 0;

  void validate() const;
};

// Disruption level used for each class: 0 -> 0.0, 1 -> 0.5, 2 -> 1.0.
double disruption_for_class(int cls);

struct SynthImage {
  GrayImage labels;     // instance ids 1..K, 0 background
  GrayImage intensity;  // 8-bit values
};

SynthImage generate_image(const SynthConfig& cfg);

// Deterministic per-sample recipe for a balanced dataset; image and graph
// seeds come from independent counter-derived streams.
struct SamplePlan {
  SynthConfig cfg;
  std::uint64_t graph_seed = 0;
  std::string image_id;
};

std::vector<SamplePlan> dataset_plan(int n_per_class, std::uint64_t seed);

// Image -> nuclear descriptors -> sampled graph for one planned sample.
CellGraph realize_sample(const SamplePlan& plan, const SamplerConfig& sampler,
                         const EdgeConfig& edge);

struct SynthDataset {
  std::vector<CellGraph> train;
  std::vector<CellGraph> test;
};

// Balanced 3-class dataset: class-interleaved, seeded shuffle within each
// class, first two thirds of the interleaved order form the training split.
SynthDataset generate_dataset(int n_per_class, std::uint64_t seed,
                              const SamplerConfig& sampler = SamplerConfig{},
                              const EdgeConfig& edge = EdgeConfig{});

}  // namespace cgc
