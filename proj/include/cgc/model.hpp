#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cgc/autodiff.hpp"
#include "cgc/graph.hpp"
#include "cgc/optim.hpp"

namespace cgc {

struct ModelConfig {
  int k_hops = 3;                            // graph convs per block
  std::vector<int> hidden_dims = {64, 64};   // one width per stage
  int lstm_hidden = 32;
  int n_stages = 2;
  std::vector<int> cluster_sizes = {100, 20};
  int n_classes = 3;
  double dropout = 0.2;
  std::string aggregator = "mean";  // neighborhood aggregation kind
  int input_dim = kDescriptorCount + 2;  // descriptors plus (row, col)

  void validate() const;
  int stage_input_dim(int stage) const;
  int readout_dim() const;  // classifier input width
};

// Fresh parameters for the config, deterministic under the rng: uniform
// Xavier bounds for weights, zero biases except the forget gate's +1.
void init_params(ParamStore& store, const ModelConfig& cfg, Rng& rng);

// Per-name gradient buffers for one or more backward passes, mergeable into a
// store; lets graphs in a batch run against read-only parameter values.
class GradSink {
 public:
  Mat* slot(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  void add_into(ParamStore& store) const;
  void clear() { buffers_.clear(); }

 private:
  std::map<std::string, Mat> buffers_;
};

struct ForwardOptions {
  bool training = false;
  double dropout = 0.0;       // applied to each stage's input features
  Rng* rng = nullptr;         // required when training with dropout > 0
  GradSink* sink = nullptr;   // nullptr: inference only, no gradients
  double reweight_p = 0.4;    // neighbor mass when re-normalizing coarse stages
};

struct StageTrace {
  std::vector<Mat> depth_embeddings;  // h^(1)..h^(k) of the embed branch
  Mat attention;                      // n x k_hops, rows sum to 1
  Mat embeddings;                     // M, attention-fused
  Mat assignment;                     // S, n x clusters, rows sum to 1
  Mat coarse_features;                // S^T M
  Mat coarse_adjacency;               // S^T A' S before re-normalization
  Mat readout;                        // 1 x hidden
};

struct ForwardResult {
  ad::Node* logits = nullptr;  // 1 x n_classes, on the caller's tape
  std::vector<StageTrace> stages;
};

// One graph convolution hop: ReLU((P h) W) where P is the row-stochastic
// neighborhood operator.
ad::Node* graph_conv(ad::Tape& t, ad::Node* P, ad::Node* h, ad::Node* W);

// Eqs. of the clustering step seen by tests: features S^T M and adjacency
// S^T P S.
std::pair<ad::Node*, ad::Node*> pool_pair(ad::Tape& t, ad::Node* S, ad::Node* M,
                                          ad::Node* P);

// Full forward pass. `x` is the normalized n x input_dim feature matrix,
// `reweighted` the row-stochastic operator of the input graph.
ForwardResult model_forward(ad::Tape& t, const ParamStore& params, const Mat& x,
                            const Mat& reweighted, const ModelConfig& cfg,
                            const ForwardOptions& opts);

// Argmax cluster ids per original node for the given stage (0-based); later
// stages are mapped back through the earlier assignments.
std::vector<int> hard_cluster_ids(const ForwardResult& fwd, int stage);

struct Checkpoint {
  ModelConfig model;
  NormStats norm;
  std::uint64_t seed = 0;
  int epoch = 0;
  ParamStore params;
};

// JSON manifest followed by named blobs of row-major little-endian doubles;
// writing the same checkpoint twice is byte-identical.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cgc
