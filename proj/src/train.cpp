#include "cgc/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "cgc/errors.hpp"

namespace cgc {

namespace {

struct PreparedGraph {
  Mat x;
  Mat P;
  double p = 0.4;
  int label = -1;
};

PreparedGraph prepare_one(const CellGraph& g, const NormStats& stats) {
  PreparedGraph out;
  out.x = model_input(g, stats);
  out.P = g.reweighted();
  out.p = g.edge.p;
  if (g.label) out.label = *g.label;
  return out;
}

std::vector<PreparedGraph> prepare_labeled(const std::vector<CellGraph>& graphs,
                                           const NormStats& stats, int n_classes) {
  std::vector<PreparedGraph> out;
  out.reserve(graphs.size());
  for (const CellGraph& g : graphs) {
    PreparedGraph pg = prepare_one(g, stats);
    if (pg.label < 0 || pg.label >= n_classes)
      throw ConfigError("graph '" + g.image_id + "' lacks a label in [0, n_classes)");
    out.push_back(std::move(pg));
  }
  return out;
}

int argmax_class(const Mat& logits) {
  int best = 0;
  for (Eigen::Index c = 1; c < logits.cols(); ++c)
    if (logits(0, c) > logits(0, best)) best = static_cast<int>(c);
  return best;
}

Mat eval_logits(const ParamStore& store, const ModelConfig& mcfg,
                const PreparedGraph& pg) {
  ad::Tape t;
  ForwardOptions opts;
  opts.reweight_p = pg.p;
  return model_forward(t, store, pg.x, pg.P, mcfg, opts).logits->value;
}

double accuracy_on(const ParamStore& store, const ModelConfig& mcfg,
                   const std::vector<PreparedGraph>& graphs) {
  if (graphs.empty()) return 0.0;
  int correct = 0;
  for (const PreparedGraph& pg : graphs)
    if (argmax_class(eval_logits(store, mcfg, pg)) == pg.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(graphs.size());
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (lr < 0.0) throw ConfigError("lr must be >= 0");
  if (lr_drop_factor <= 0.0) throw ConfigError("lr_drop_factor must be > 0");
  for (std::size_t i = 0; i < lr_drop_epochs.size(); ++i) {
    if (lr_drop_epochs[i] < 1) throw ConfigError("lr drop epochs must be >= 1");
    if (i > 0 && lr_drop_epochs[i] <= lr_drop_epochs[i - 1])
      throw ConfigError("lr drop epochs must be strictly increasing");
  }
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

double lr_at(int epoch, const TrainConfig& cfg) {
  cfg.validate();
  if (epoch < 0 || epoch >= cfg.epochs) throw ConfigError("epoch outside the schedule");
  double rate = cfg.lr;
  for (int boundary : cfg.lr_drop_epochs)
    if (epoch >= boundary) rate *= cfg.lr_drop_factor;
  return rate;
}

TrainResult train(const std::vector<CellGraph>& train_set,
                  const std::vector<CellGraph>& val_set, const ModelConfig& mcfg,
                  const TrainConfig& tcfg, std::ostream* log) {
  mcfg.validate();
  tcfg.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");

  const NormStats stats = compute_norm_stats(train_set);
  const std::vector<PreparedGraph> tr = prepare_labeled(train_set, stats, mcfg.n_classes);
  const std::vector<PreparedGraph> va = prepare_labeled(val_set, stats, mcfg.n_classes);
  const int n = static_cast<int>(tr.size());

  Rng master(tcfg.seed);
  Rng init_rng = master.split(0);
  Rng shuffle_rng = master.split(1);
  Rng dropout_rng = master.split(2);

  TrainResult result;
  init_params(result.checkpoint.params, mcfg, init_rng);
  ParamStore& store = result.checkpoint.params;

  std::vector<int> order(tr.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double rate = lr_at(epoch, tcfg);
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    int correct = 0;
    GradSink sink;
    for (int start = 0; start < n; start += tcfg.batch_size) {
      const int stop = std::min(start + tcfg.batch_size, n);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      sink.clear();
      for (int pos = start; pos < stop; ++pos) {
        const PreparedGraph& pg = tr[static_cast<std::size_t>(order[pos])];
        ad::Tape t;
        ForwardOptions opts;
        opts.training = true;
        opts.dropout = tcfg.dropout;
        opts.rng = &dropout_rng;
        opts.sink = &sink;
        opts.reweight_p = pg.p;
        ForwardResult fwd = model_forward(t, store, pg.x, pg.P, mcfg, opts);
        ad::Node* loss = t.cross_entropy_logits(fwd.logits, pg.label);
        t.backward(t.scale(loss, inv_batch));
        const double lv = loss->value(0, 0);
        if (!std::isfinite(lv))
          throw NumericError("non-finite training loss at epoch " +
                             std::to_string(epoch) + ", graph " +
                             std::to_string(order[pos]));
        loss_sum += lv;
        if (argmax_class(fwd.logits->value) == pg.label) ++correct;
      }
      store.zero_grads();
      sink.add_into(store);
      AdamConfig acfg;
      acfg.lr = rate;
      acfg.weight_decay = tcfg.weight_decay;
      adam_step(store, acfg);
    }

    EpochReport report;
    report.epoch = epoch;
    report.loss = loss_sum / static_cast<double>(n);
    report.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    report.val_acc = accuracy_on(store, mcfg, va);
    report.lr = rate;
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.reports.push_back(report);
    if (log != nullptr) {
      char line[192];
      std::snprintf(line, sizeof line,
                    "epoch=%d loss=%.6f train_acc=%.4f val_acc=%.4f lr=%g seconds=%.3f",
                    report.epoch, report.loss, report.train_acc, report.val_acc,
                    report.lr, report.seconds);
      (*log) << line << '\n';
      log->flush();
    }
  }

  result.checkpoint.model = mcfg;
  result.checkpoint.norm = stats;
  result.checkpoint.seed = tcfg.seed;
  result.checkpoint.epoch = tcfg.epochs;
  return result;
}

EvalResult evaluate(const std::vector<CellGraph>& graphs, const Checkpoint& ckpt) {
  if (graphs.empty()) throw ConfigError("evaluation set is empty");
  const std::vector<PreparedGraph> prepared =
      prepare_labeled(graphs, ckpt.norm, ckpt.model.n_classes);
  EvalResult out;
  out.confusion = Mat::Zero(ckpt.model.n_classes, ckpt.model.n_classes);
  int correct = 0;
  for (const PreparedGraph& pg : prepared) {
    const int pred = argmax_class(eval_logits(ckpt.params, ckpt.model, pg));
    out.confusion(pg.label, pred) += 1.0;
    if (pred == pg.label) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(prepared.size());
  return out;
}

Mat predict_probs(const CellGraph& g, const Checkpoint& ckpt) {
  const Mat logits = eval_logits(ckpt.params, ckpt.model, prepare_one(g, ckpt.norm));
  const double m = logits.maxCoeff();
  Mat probs = (logits.array() - m).exp().matrix();
  probs /= probs.sum();
  return probs;
}

int predict_one(const CellGraph& g, const Checkpoint& ckpt) {
  return argmax_class(eval_logits(ckpt.params, ckpt.model, prepare_one(g, ckpt.norm)));
}

int majority_vote(const std::vector<int>& predictions) {
  if (predictions.empty()) throw ConfigError("majority vote over an empty list");
  const int max_class = *std::max_element(predictions.begin(), predictions.end());
  if (*std::min_element(predictions.begin(), predictions.end()) < 0)
    throw ConfigError("negative class index in majority vote");
  std::vector<int> counts(static_cast<std::size_t>(max_class) + 1, 0);
  for (int p : predictions) ++counts[static_cast<std::size_t>(p)];
  int best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

}  // namespace cgc
