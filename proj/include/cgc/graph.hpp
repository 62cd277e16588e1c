#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cgc/features.hpp"
#include "cgc/matrix.hpp"

namespace cgc {

enum class SamplerKind { kFused, kFarthest, kRandom };

const char* sampler_kind_name(SamplerKind k);
SamplerKind sampler_kind_from_name(const std::string& name);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::kFused;
  double a_ratio = 0.35;  // farthest-point share
  double b_ratio = 0.15;  // uniform-random share
  void validate() const;
};

struct EdgeConfig {
  int k_max = 8;     // directed neighbor cap
  double d = 100.0;  // distance threshold, pixels
  double p = 0.4;    // neighbor mass in the re-weighted operator
  void validate() const;
};

struct CellGraph {
  int n = 0;
  Mat coords;    // n x 2, (row, col)
  Mat features;  // n x kDescriptorCount
  std::vector<std::pair<int, int>> edges;  // i < j, one entry per undirected edge
  std::optional<int> label;
  std::string image_id;
  std::uint64_t seed = 0;
  SamplerConfig sampler;
  EdgeConfig edge;

  Mat adjacency() const;   // dense symmetric 0/1, zero diagonal
  Mat reweighted() const;  // dense row-stochastic operator at this->edge.p
};

// Greedy farthest-point selection: seeded uniform start, then repeatedly the
// point maximizing the minimum distance to the picked set (ties to the lowest
// index). Returned in pick order.
std::vector<int> farthest_point_sample(const Mat& coords, int m, std::uint64_t seed);

// Sampler dispatch; result sorted ascending. Fused takes ceil(a*n) by
// farthest-point plus ceil(b*n) uniformly from the complement; the other two
// kinds draw ceil((a+b)*n) by their single strategy.
std::vector<int> sample_nodes(const Mat& coords, const SamplerConfig& cfg,
                              std::uint64_t seed);

// Union-symmetrized directed KNN with distances strictly below cfg.d,
// neighbor ties broken by lower index. Pairs returned with i < j, sorted.
std::vector<std::pair<int, int>> knn_edges(const Mat& coords, const EdgeConfig& cfg);

// Row-stochastic re-weighting shared by graph files and the model: neighbor
// mass p split in proportion to edge weight, diagonal 1-p, isolated rows
// become identity rows.
Mat reweight_matrix(const Mat& adjacency, double p);

// Per-channel statistics over [features | coords] of every node in the set.
struct NormStats {
  Mat mean;   // 1 x (kDescriptorCount + 2)
  Mat stdev;  // same shape, floored at 1e-8
};

NormStats compute_norm_stats(const std::vector<CellGraph>& graphs);

// n x (kDescriptorCount + 2) standardized model input for one graph.
Mat model_input(const CellGraph& g, const NormStats& stats);

CellGraph assemble_graph(const std::vector<Descriptor>& descriptors,
                         const SamplerConfig& sampler, const EdgeConfig& edge,
                         std::optional<int> label, std::uint64_t seed,
                         const std::string& image_id = "");

// Directory bundle: meta.json + nodes.csv + edges.csv, floats at 17
// significant digits so values round-trip exactly.
void save_graph_bundle(const CellGraph& g, const std::string& dir);
CellGraph load_graph_bundle(const std::string& dir);

}  // namespace cgc
