#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "cgc/errors.hpp"
#include "cgc/graph.hpp"
#include "cgc/model.hpp"
#include "cgc/rng.hpp"
#include "cgc/train.hpp"

using cgc::CellGraph;
using cgc::Mat;
using cgc::ModelConfig;
using cgc::Rng;
using cgc::TrainConfig;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.k_hops = 2;
  cfg.hidden_dims = {6, 5};
  cfg.lstm_hidden = 4;
  cfg.n_stages = 2;
  cfg.cluster_sizes = {5, 3};
  cfg.n_classes = 3;
  cfg.dropout = 0.0;
  return cfg;
}

CellGraph make_graph(int n, std::uint64_t seed, int label) {
  Rng rng(seed);
  CellGraph g;
  g.n = n;
  g.coords = Mat(n, 2);
  for (int i = 0; i < n; ++i) {
    g.coords(i, 0) = rng.uniform(0.0, 200.0);
    g.coords(i, 1) = rng.uniform(0.0, 200.0);
  }
  g.features = Mat(n, cgc::kDescriptorCount);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < cgc::kDescriptorCount; ++j) g.features(i, j) = rng.normal();
  g.edge.k_max = 3;
  g.edge.d = 120.0;
  g.edge.p = 0.4;
  g.edges = cgc::knn_edges(g.coords, g.edge);
  g.label = label;
  g.image_id = "g" + std::to_string(seed);
  g.seed = seed;
  return g;
}

std::vector<CellGraph> make_set(int count, std::uint64_t seed0) {
  std::vector<CellGraph> out;
  for (int i = 0; i < count; ++i)
    out.push_back(make_graph(8 + i % 5, seed0 + static_cast<std::uint64_t>(i), i % 3));
  return out;
}

bool bitwise_equal(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

bool same_params(const cgc::ParamStore& a, const cgc::ParamStore& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, entry] : a)
    if (!bitwise_equal(entry.value, b.at(name).value)) return false;
  return true;
}

}  // namespace

TEST_CASE("cross entropy of uniform logits is ln 3 and never negative") {
  cgc::ad::Tape t;
  auto* logits = t.constant(Mat::Zero(1, 3));
  CHECK(t.cross_entropy_logits(logits, 1)->value(0, 0) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));

  Mat confident(1, 3);
  confident << 20.0, -20.0, -20.0;
  CHECK(t.cross_entropy_logits(t.constant(confident), 0)->value(0, 0) ==
        doctest::Approx(0.0).epsilon(1e-8));

  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Mat l(1, 3);
    l << rng.normal() * 4.0, rng.normal() * 4.0, rng.normal() * 4.0;
    const int label = static_cast<int>(rng.uniform_u64(3));
    CHECK(t.cross_entropy_logits(t.constant(l), label)->value(0, 0) >= 0.0);
  }
}

TEST_CASE("learning rate schedule: plateaus, boundaries, range errors") {
  TrainConfig cfg;
  CHECK(lr_at(0, cfg) == 1e-3);
  CHECK(lr_at(9, cfg) == 1e-3);
  CHECK(lr_at(10, cfg) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(lr_at(19, cfg) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(lr_at(20, cfg) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(lr_at(29, cfg) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK_THROWS_AS(lr_at(-1, cfg), cgc::ConfigError);
  CHECK_THROWS_AS(lr_at(30, cfg), cgc::ConfigError);

  TrainConfig custom;
  custom.epochs = 6;
  custom.lr = 0.8;
  custom.lr_drop_epochs = {1, 2};
  custom.lr_drop_factor = 0.5;
  CHECK(cgc::lr_at(0, custom) == 0.8);
  CHECK(cgc::lr_at(1, custom) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(cgc::lr_at(2, custom) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(cgc::lr_at(5, custom) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr = 0.0;  // legal: freezes parameters
  CHECK_NOTHROW(cfg.validate());

  TrainConfig bad;
  bad.epochs = -1;
  CHECK_THROWS_AS(bad.validate(), cgc::ConfigError);
  bad = TrainConfig{};
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), cgc::ConfigError);
  bad = TrainConfig{};
  bad.lr = -1e-3;
  CHECK_THROWS_AS(bad.validate(), cgc::ConfigError);
  bad = TrainConfig{};
  bad.lr_drop_epochs = {20, 10};
  CHECK_THROWS_AS(bad.validate(), cgc::ConfigError);
  bad = TrainConfig{};
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), cgc::ConfigError);
}

TEST_CASE("batch gradient equals the mean of per-graph gradients") {
  ModelConfig mcfg = tiny_config();
  cgc::ParamStore store;
  Rng rng(11);
  cgc::init_params(store, mcfg, rng);
  std::vector<CellGraph> graphs = make_set(4, 900);
  const cgc::NormStats stats = cgc::compute_norm_stats(graphs);

  // batched: shared sink, each loss pre-scaled by 1/B
  cgc::GradSink shared;
  for (const CellGraph& g : graphs) {
    cgc::ad::Tape t;
    cgc::ForwardOptions opts;
    opts.sink = &shared;
    opts.reweight_p = g.edge.p;
    auto fwd = cgc::model_forward(t, store, cgc::model_input(g, stats), g.reweighted(),
                                  mcfg, opts);
    t.backward(t.scale(t.cross_entropy_logits(fwd.logits, *g.label), 0.25));
  }
  cgc::ParamStore batched = store;  // copy shapes/values; grads replaced below
  batched.zero_grads();
  shared.add_into(batched);

  // reference: independent full-loss gradients, averaged afterwards
  cgc::ParamStore averaged = store;
  averaged.zero_grads();
  for (const CellGraph& g : graphs) {
    cgc::GradSink single;
    cgc::ad::Tape t;
    cgc::ForwardOptions opts;
    opts.sink = &single;
    opts.reweight_p = g.edge.p;
    auto fwd = cgc::model_forward(t, store, cgc::model_input(g, stats), g.reweighted(),
                                  mcfg, opts);
    t.backward(t.cross_entropy_logits(fwd.logits, *g.label));
    single.add_into(averaged);
  }
  averaged.scale_grads(0.25);

  for (const auto& [name, entry] : batched) {
    const Mat& ref = averaged.at(name).grad;
    CHECK((entry.grad - ref).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("zero learning rate leaves parameters at initialization") {
  ModelConfig mcfg = tiny_config();
  std::vector<CellGraph> graphs = make_set(6, 300);

  TrainConfig frozen;
  frozen.epochs = 2;
  frozen.batch_size = 4;
  frozen.lr = 0.0;
  frozen.weight_decay = 0.0;
  frozen.dropout = 0.0;
  frozen.seed = 77;
  auto lr0 = cgc::train(graphs, {}, mcfg, frozen, nullptr);

  TrainConfig none = frozen;
  none.epochs = 0;
  auto init_only = cgc::train(graphs, {}, mcfg, none, nullptr);

  CHECK(same_params(lr0.checkpoint.params, init_only.checkpoint.params));
  CHECK(init_only.reports.empty());
  CHECK(lr0.reports.size() == 2);
}

TEST_CASE("training is bit-reproducible under a fixed seed") {
  ModelConfig mcfg = tiny_config();
  std::vector<CellGraph> tr = make_set(12, 40);
  std::vector<CellGraph> va = make_set(6, 4000);

  TrainConfig tcfg;
  tcfg.epochs = 3;
  tcfg.batch_size = 5;
  tcfg.lr = 1e-3;
  tcfg.lr_drop_epochs = {2};
  tcfg.dropout = 0.2;
  tcfg.seed = 123;

  auto a = cgc::train(tr, va, mcfg, tcfg, nullptr);
  auto b = cgc::train(tr, va, mcfg, tcfg, nullptr);
  CHECK(same_params(a.checkpoint.params, b.checkpoint.params));
  REQUIRE(a.reports.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.reports[i].loss == b.reports[i].loss);
    CHECK(a.reports[i].train_acc == b.reports[i].train_acc);
    CHECK(a.reports[i].val_acc == b.reports[i].val_acc);
    CHECK(a.reports[i].lr == cgc::lr_at(static_cast<int>(i), tcfg));
    CHECK(std::isfinite(a.reports[i].loss));
    CHECK(a.reports[i].val_acc >= 0.0);
    CHECK(a.reports[i].val_acc <= 1.0);
  }

  TrainConfig other = tcfg;
  other.seed = 124;
  auto c = cgc::train(tr, va, mcfg, other, nullptr);
  CHECK_FALSE(same_params(a.checkpoint.params, c.checkpoint.params));
}

TEST_CASE("a single repeated graph is memorized within 200 steps") {
  ModelConfig mcfg = tiny_config();
  std::vector<CellGraph> one = {make_graph(10, 777, 2)};

  TrainConfig tcfg;
  tcfg.epochs = 200;
  tcfg.batch_size = 1;
  tcfg.lr = 3e-3;
  tcfg.lr_drop_epochs = {};
  tcfg.weight_decay = 0.0;
  tcfg.dropout = 0.0;
  tcfg.seed = 9;

  auto result = cgc::train(one, {}, mcfg, tcfg, nullptr);
  double best = result.reports.front().loss;
  for (const auto& r : result.reports) best = std::min(best, r.loss);
  CHECK(best < 0.01);
  CHECK(result.reports.back().loss < 0.01);
  CHECK(result.reports.back().train_acc == 1.0);

  // memorized set evaluates perfectly through the checkpoint interface
  auto ev = cgc::evaluate(one, result.checkpoint);
  CHECK(ev.accuracy == 1.0);
  CHECK(ev.confusion(2, 2) == 1.0);
  CHECK(ev.confusion.sum() == 1.0);
}

TEST_CASE("evaluation of an untrained model on label-independent data is near chance") {
  ModelConfig mcfg = tiny_config();
  std::vector<CellGraph> graphs = make_set(150, 6000);

  TrainConfig none;
  none.epochs = 0;
  none.seed = 31;
  auto init_only = cgc::train(graphs, {}, mcfg, none, nullptr);

  auto ev = cgc::evaluate(graphs, init_only.checkpoint);
  CHECK(ev.accuracy > 0.18);
  CHECK(ev.accuracy < 0.50);
  CHECK(ev.confusion.rows() == 3);
  CHECK(ev.confusion.cols() == 3);
  CHECK(ev.confusion.sum() == 150.0);
  for (int c = 0; c < 3; ++c) CHECK(ev.confusion.row(c).sum() == 50.0);
  CHECK(ev.accuracy == doctest::Approx(ev.confusion.trace() / 150.0).epsilon(1e-12));
}

TEST_CASE("probability outputs form a distribution consistent with the argmax") {
  ModelConfig mcfg = tiny_config();
  std::vector<CellGraph> graphs = make_set(5, 250);
  TrainConfig none;
  none.epochs = 0;
  auto ck = cgc::train(graphs, {}, mcfg, none, nullptr).checkpoint;

  for (const CellGraph& g : graphs) {
    Mat probs = cgc::predict_probs(g, ck);
    CHECK(probs.rows() == 1);
    CHECK(probs.cols() == 3);
    CHECK(probs.minCoeff() >= 0.0);
    CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
    int best = 0;
    for (int c = 1; c < 3; ++c)
      if (probs(0, c) > probs(0, best)) best = c;
    CHECK(cgc::predict_one(g, ck) == best);
  }
}

TEST_CASE("majority vote picks the most frequent class, ties to the lowest") {
  CHECK(cgc::majority_vote({0, 0, 1}) == 0);
  CHECK(cgc::majority_vote({2}) == 2);
  CHECK(cgc::majority_vote({0, 1}) == 0);
  CHECK(cgc::majority_vote({1, 2, 2, 1}) == 1);
  CHECK(cgc::majority_vote({2, 2, 0}) == 2);
  CHECK_THROWS_AS(cgc::majority_vote({}), cgc::ConfigError);
  CHECK_THROWS_AS(cgc::majority_vote({0, -1}), cgc::ConfigError);
}

TEST_CASE("training rejects bad inputs and non-finite losses") {
  ModelConfig mcfg = tiny_config();
  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.batch_size = 2;

  CHECK_THROWS_AS(cgc::train({}, {}, mcfg, tcfg, nullptr), cgc::ConfigError);

  std::vector<CellGraph> unlabeled = make_set(2, 80);
  unlabeled[1].label.reset();
  CHECK_THROWS_AS(cgc::train(unlabeled, {}, mcfg, tcfg, nullptr), cgc::ConfigError);

  std::vector<CellGraph> out_of_range = make_set(2, 81);
  out_of_range[0].label = 7;
  CHECK_THROWS_AS(cgc::train(out_of_range, {}, mcfg, tcfg, nullptr), cgc::ConfigError);

  std::vector<CellGraph> poisoned = make_set(2, 82);
  poisoned[0].features(0, 3) = std::nan("");
  CHECK_THROWS_AS(cgc::train(poisoned, {}, mcfg, tcfg, nullptr), cgc::NumericError);
}

TEST_CASE("epoch log lines carry the report fields") {
  ModelConfig mcfg = tiny_config();
  std::vector<CellGraph> graphs = make_set(6, 510);
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.batch_size = 3;
  tcfg.seed = 2;

  std::ostringstream log;
  auto result = cgc::train(graphs, graphs, mcfg, tcfg, &log);
  std::istringstream in(log.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    CHECK(line.rfind("epoch=" + std::to_string(lines), 0) == 0);
    CHECK(line.find("loss=") != std::string::npos);
    CHECK(line.find("val_acc=") != std::string::npos);
    CHECK(line.find("lr=") != std::string::npos);
    ++lines;
  }
  CHECK(lines == 2);
  CHECK(result.reports.size() == 2);
}
