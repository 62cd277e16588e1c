#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "cgc/graph.hpp"
#include "cgc/model.hpp"

namespace cgc {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 40;
  double lr = 1e-3;
  std::vector<int> lr_drop_epochs = {10, 20};  // rate multiplies by the factor at each
  double lr_drop_factor = 0.1;
  double weight_decay = 1e-4;
  double dropout = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

// Learning rate for the given epoch under the staged schedule.
double lr_at(int epoch, const TrainConfig& cfg);

struct EpochReport {
  int epoch = 0;
  double loss = 0.0;       // mean per-graph training loss
  double train_acc = 0.0;  // measured on the training forwards (dropout active)
  double val_acc = 0.0;    // 0 when no validation graphs were given
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochReport> reports;
};

// Full optimization loop: seeded initialization, shuffled mini-batches whose
// loss is the mean of per-graph losses, Adam with decoupled weight decay and
// the staged rate. Normalization statistics come from the training split and
// are persisted in the checkpoint. Deterministic for a fixed seed. A
// non-finite loss raises NumericError. One log line per epoch when `log` is
// given.
TrainResult train(const std::vector<CellGraph>& train_set,
                  const std::vector<CellGraph>& val_set, const ModelConfig& mcfg,
                  const TrainConfig& tcfg, std::ostream* log = nullptr);

struct EvalResult {
  double accuracy = 0.0;
  Mat confusion;  // rows true class, cols predicted class, counts
};

EvalResult evaluate(const std::vector<CellGraph>& graphs, const Checkpoint& ckpt);

// Eval-mode class probabilities (1 x n_classes) and the argmax prediction
// (ties to the lowest class index).
Mat predict_probs(const CellGraph& g, const Checkpoint& ckpt);
int predict_one(const CellGraph& g, const Checkpoint& ckpt);

// Most frequent class, ties to the lowest index.
int majority_vote(const std::vector<int>& predictions);

}  // namespace cgc
