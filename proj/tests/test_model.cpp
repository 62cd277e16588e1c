#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cgc/errors.hpp"
#include "cgc/graph.hpp"
#include "cgc/model.hpp"
#include "cgc/optim.hpp"
#include "cgc/rng.hpp"
#include "fdcheck.hpp"

using cgc::GradSink;
using cgc::Mat;
using cgc::ModelConfig;
using cgc::ParamStore;
using cgc::Rng;

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

struct TestGraph {
  Mat x;
  Mat P;
};

TestGraph random_graph(int n, int dim, std::uint64_t seed, double edge_prob = 0.35) {
  Rng rng(seed);
  Mat x(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) x(i, j) = rng.normal();
  Mat adj = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < edge_prob) adj(i, j) = adj(j, i) = 1.0;
  return {std::move(x), cgc::reweight_matrix(adj, 0.4)};
}

Mat cycle_operator(int n, double p) {
  Mat adj = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    adj(i, (i + 1) % n) = 1.0;
    adj((i + 1) % n, i) = 1.0;
  }
  return cgc::reweight_matrix(adj, p);
}

double max_abs_diff(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

bool bitwise_equal(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

cgc::ForwardResult eval_forward(cgc::ad::Tape& t, const ParamStore& store,
                                const TestGraph& g, const ModelConfig& cfg) {
  cgc::ForwardOptions opts;
  return cgc::model_forward(t, store, g.x, g.P, cfg, opts);
}

}  // namespace

TEST_CASE("config validation accepts defaults and rejects bad shapes") {
  ModelConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.stage_input_dim(0) == 18);
  CHECK(cfg.stage_input_dim(1) == 64);
  CHECK(cfg.readout_dim() == 128);

  ModelConfig bad = cfg;
  bad.k_hops = 0;
  CHECK_THROWS_AS(bad.validate(), cgc::ConfigError);
  bad = cfg;
  bad.cluster_sizes = {100, 100};
  CHECK_THROWS_AS(bad.validate(), cgc::ConfigError);
  bad = cfg;
  bad.cluster_sizes = {20, 100};
  CHECK_THROWS_AS(bad.validate(), cgc::ConfigError);
  bad = cfg;
  bad.hidden_dims = {64};
  CHECK_THROWS_AS(bad.validate(), cgc::ConfigError);
  bad = cfg;
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), cgc::ConfigError);
  bad = cfg;
  bad.aggregator = "max";
  CHECK_THROWS_AS(bad.validate(), cgc::ConfigError);
  bad = cfg;
  bad.n_stages = 0;
  CHECK_THROWS_AS(bad.validate(), cgc::ConfigError);
}

TEST_CASE("parameter initialization: shapes, bounds, biases, determinism") {
  ModelConfig cfg;
  ParamStore a;
  Rng r1(7);
  cgc::init_params(a, cfg, r1);

  CHECK(a.count_scalars() == 116605);  // frozen regression constant

  const Mat& b_fw = a.at("s0.lstm.fw.b").value;
  const int L = cfg.lstm_hidden;
  for (int c = 0; c < 4 * L; ++c) {
    const double expect = (c >= L && c < 2 * L) ? 1.0 : 0.0;
    CHECK(b_fw(0, c) == expect);
  }
  CHECK(a.at("clf.b").value.isZero(0.0));
  CHECK(a.at("s1.attn.b").value.isZero(0.0));

  const Mat& w = a.at("s0.embed.conv0.W").value;
  const double bound = std::sqrt(6.0 / (18.0 + 64.0));
  CHECK(w.cwiseAbs().maxCoeff() <= bound);
  CHECK(w.cwiseAbs().maxCoeff() > 0.0);
  CHECK(w.minCoeff() < 0.0);  // both signs appear

  ParamStore b;
  Rng r2(7);
  cgc::init_params(b, cfg, r2);
  for (const auto& [name, entry] : a) CHECK(bitwise_equal(entry.value, b.at(name).value));

  ParamStore c;
  Rng r3(8);
  cgc::init_params(c, cfg, r3);
  CHECK_FALSE(bitwise_equal(a.at("clf.W").value, c.at("clf.W").value));

  ModelConfig wider = cfg;
  wider.hidden_dims = {128, 128};
  ParamStore d;
  Rng r4(7);
  cgc::init_params(d, wider, r4);
  CHECK(d.count_scalars() > a.count_scalars());
}

TEST_CASE("graph_conv: identity, hand-evaluated path, complete-graph symmetry") {
  cgc::ad::Tape t;

  SUBCASE("identity operator and weights pass nonnegative features through") {
    Mat h(2, 2);
    h << 1.0, 0.5, 2.0, 0.0;
    auto* out = cgc::graph_conv(t, t.constant(Mat::Identity(2, 2)), t.constant(h),
                                t.constant(Mat::Identity(2, 2)));
    CHECK(bitwise_equal(out->value, h));
  }

  SUBCASE("two-node path mixes rows as 0.6/0.4 before the linear map") {
    Mat h(2, 2);
    h << 1.0, -1.0, 2.0, 3.0;
    Mat W(2, 2);
    W << -1.0, 2.0, 0.0, 1.0;
    Mat P(2, 2);
    P << 0.6, 0.4, 0.4, 0.6;
    auto* out = cgc::graph_conv(t, t.constant(P), t.constant(h), t.constant(W));
    CHECK(out->value(0, 0) == 0.0);  // relu clips -1.4
    CHECK(out->value(0, 1) == doctest::Approx(3.4).epsilon(1e-12));
    CHECK(out->value(1, 0) == 0.0);  // relu clips -1.6
    CHECK(out->value(1, 1) == doctest::Approx(4.6).epsilon(1e-12));
  }

  SUBCASE("complete graph with identical features gives identical rows") {
    const int n = 5;
    Mat h(n, 3);
    for (int i = 0; i < n; ++i) h.row(i) << 0.3, -1.2, 2.0;
    Mat W(3, 2);
    W << 1.0, 0.5, -0.25, 2.0, 0.75, -1.0;
    Mat adj = Mat::Ones(n, n) - Mat::Identity(n, n);
    auto* out = cgc::graph_conv(t, t.constant(cgc::reweight_matrix(adj, 0.4)),
                                t.constant(h), t.constant(W));
    for (int i = 1; i < n; ++i)
      CHECK(max_abs_diff(out->value.row(0), out->value.row(i)) <= 1e-12);
  }
}

TEST_CASE("pooling algebra: identity assignment, single cluster, symmetry") {
  Rng rng(21);
  const int n = 7;
  Mat M(n, 4);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 4; ++j) M(i, j) = rng.normal();
  Mat P = cycle_operator(n, 0.4);

  SUBCASE("identity assignment leaves features and operator untouched") {
    cgc::ad::Tape t;
    auto [Hn, An] = cgc::pool_pair(t, t.constant(Mat::Identity(n, n)),
                                   t.constant(M), t.constant(P));
    CHECK(bitwise_equal(Hn->value, M));
    CHECK(bitwise_equal(An->value, P));
  }

  SUBCASE("single cluster collapses to column sums and total mass") {
    cgc::ad::Tape t;
    auto [Hn, An] = cgc::pool_pair(t, t.constant(Mat::Ones(n, 1)), t.constant(M),
                                   t.constant(P));
    CHECK(Hn->value.rows() == 1);
    CHECK(max_abs_diff(Hn->value, M.colwise().sum()) <= 1e-12);
    CHECK(An->value(0, 0) == doctest::Approx(P.sum()).epsilon(1e-12));
  }

  SUBCASE("soft assignment matches the plain matrix products") {
    cgc::ad::Tape t;
    Mat Sv(n, 3);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 3; ++j) Sv(i, j) = rng.uniform();
    for (int i = 0; i < n; ++i) Sv.row(i) /= Sv.row(i).sum();
    auto [Hn, An] = cgc::pool_pair(t, t.constant(Sv), t.constant(M), t.constant(P));
    Mat St = Sv.transpose();
    Mat Href = St * M;
    Mat tmp = St * P;
    Mat Aref = tmp * Sv;
    CHECK(bitwise_equal(Hn->value, Href));
    CHECK(bitwise_equal(An->value, Aref));
    // symmetric input operator -> symmetric coarse operator, nonnegative
    CHECK(max_abs_diff(An->value, An->value.transpose()) <= 1e-12);
    CHECK(An->value.minCoeff() >= 0.0);
  }
}

TEST_CASE("zero parameters: gates at rest, uniform attention and assignment, zero logits") {
  ModelConfig cfg = tiny_config();
  ParamStore store;
  Rng rng(3);
  cgc::init_params(store, cfg, rng);
  for (auto& [name, entry] : store) entry.value.setZero();

  TestGraph g = random_graph(9, cfg.input_dim, 101);
  cgc::ad::Tape t;
  auto fwd = eval_forward(t, store, g, cfg);

  CHECK(fwd.logits->value.isZero(0.0));
  for (const auto& stage : fwd.stages) {
    for (const Mat& h : stage.depth_embeddings) CHECK(h.isZero(0.0));
    CHECK(stage.embeddings.isZero(0.0));
    CHECK(stage.readout.isZero(0.0));
    for (int i = 0; i < stage.attention.rows(); ++i)
      for (int l = 0; l < stage.attention.cols(); ++l)
        CHECK(stage.attention(i, l) == doctest::Approx(1.0 / cfg.k_hops).epsilon(1e-15));
    for (int i = 0; i < stage.assignment.rows(); ++i)
      for (int c = 0; c < stage.assignment.cols(); ++c)
        CHECK(stage.assignment(i, c) ==
              doctest::Approx(1.0 / stage.assignment.cols()).epsilon(1e-15));
  }
}

TEST_CASE("single hop collapses attention to the only depth") {
  ModelConfig cfg = tiny_config();
  cfg.k_hops = 1;
  ParamStore store;
  Rng rng(5);
  cgc::init_params(store, cfg, rng);

  TestGraph g = random_graph(8, cfg.input_dim, 55);
  cgc::ad::Tape t;
  auto fwd = eval_forward(t, store, g, cfg);
  for (const auto& stage : fwd.stages) {
    CHECK((stage.attention.array() == 1.0).all());
    CHECK(bitwise_equal(stage.embeddings, stage.depth_embeddings[0]));
  }
}

TEST_CASE("attention is convex: weights simplex-valued, fused embedding inside the hull") {
  ModelConfig cfg = tiny_config();
  ParamStore store;
  Rng rng(11);
  cgc::init_params(store, cfg, rng);

  TestGraph g = random_graph(12, cfg.input_dim, 77);
  cgc::ad::Tape t;
  auto fwd = eval_forward(t, store, g, cfg);

  for (const auto& stage : fwd.stages) {
    const Mat& att = stage.attention;
    for (int i = 0; i < att.rows(); ++i) {
      CHECK(att.row(i).minCoeff() >= 0.0);
      CHECK(att.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (int i = 0; i < stage.embeddings.rows(); ++i) {
      for (int c = 0; c < stage.embeddings.cols(); ++c) {
        double lo = stage.depth_embeddings[0](i, c);
        double hi = lo;
        for (const Mat& h : stage.depth_embeddings) {
          lo = std::min(lo, h(i, c));
          hi = std::max(hi, h(i, c));
        }
        CHECK(stage.embeddings(i, c) >= lo - 1e-12);
        CHECK(stage.embeddings(i, c) <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("stage outputs: stochastic assignments, nonnegative coarse operator, cycle symmetry") {
  ModelConfig cfg = tiny_config();
  ParamStore store;
  Rng rng(13);
  cgc::init_params(store, cfg, rng);

  Rng frng(99);
  const int n = 10;
  Mat x(n, cfg.input_dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < cfg.input_dim; ++j) x(i, j) = frng.normal();
  TestGraph g{std::move(x), cycle_operator(n, 0.4)};

  cgc::ad::Tape t;
  auto fwd = eval_forward(t, store, g, cfg);
  REQUIRE(fwd.stages.size() == 2);

  for (const auto& stage : fwd.stages) {
    for (int i = 0; i < stage.assignment.rows(); ++i) {
      CHECK(stage.assignment.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(stage.assignment.row(i).minCoeff() >= 0.0);
    }
    CHECK(stage.coarse_adjacency.minCoeff() >= 0.0);
  }
  // the cycle is regular, so the stage-0 operator is symmetric and the
  // coarse product inherits symmetry
  const Mat& A0 = fwd.stages[0].coarse_adjacency;
  CHECK(max_abs_diff(A0, A0.transpose()) <= 1e-12);
}

TEST_CASE("eval forward is deterministic and permutation invariant") {
  ModelConfig cfg = tiny_config();
  ParamStore store;
  Rng rng(17);
  cgc::init_params(store, cfg, rng);
  TestGraph g = random_graph(15, cfg.input_dim, 303);

  cgc::ad::Tape t1, t2;
  auto f1 = eval_forward(t1, store, g, cfg);
  auto f2 = eval_forward(t2, store, g, cfg);
  CHECK(bitwise_equal(f1.logits->value, f2.logits->value));

  Rng prng(404);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> perm(15);
    for (int i = 0; i < 15; ++i) perm[i] = i;
    prng.shuffle(perm);
    Mat xp(15, cfg.input_dim);
    Mat Pp(15, 15);
    for (int i = 0; i < 15; ++i) {
      xp.row(i) = g.x.row(perm[i]);
      for (int j = 0; j < 15; ++j) Pp(i, j) = g.P(perm[i], perm[j]);
    }
    cgc::ad::Tape tp;
    TestGraph gp{xp, Pp};
    auto fp = eval_forward(tp, store, gp, cfg);
    CHECK(max_abs_diff(fp.logits->value, f1.logits->value) <= 1e-9);
  }
}

TEST_CASE("zero classifier weights give zero logits") {
  ModelConfig cfg = tiny_config();
  ParamStore store;
  Rng rng(19);
  cgc::init_params(store, cfg, rng);
  store.at("clf.W").value.setZero();
  store.at("clf.b").value.setZero();

  TestGraph g = random_graph(6, cfg.input_dim, 42);
  cgc::ad::Tape t;
  auto fwd = eval_forward(t, store, g, cfg);
  CHECK(fwd.logits->value.isZero(0.0));
}

TEST_CASE("forward input validation") {
  ModelConfig cfg = tiny_config();
  ParamStore store;
  Rng rng(23);
  cgc::init_params(store, cfg, rng);
  TestGraph g = random_graph(5, cfg.input_dim, 1);
  cgc::ad::Tape t;
  cgc::ForwardOptions opts;

  CHECK_THROWS_AS(cgc::model_forward(t, store, Mat(0, cfg.input_dim), Mat(0, 0), cfg, opts),
                  cgc::DimensionError);
  CHECK_THROWS_AS(cgc::model_forward(t, store, Mat::Zero(5, 7), g.P, cfg, opts),
                  cgc::DimensionError);
  CHECK_THROWS_AS(cgc::model_forward(t, store, g.x, Mat::Zero(4, 4), cfg, opts),
                  cgc::DimensionError);

  cgc::ForwardOptions bad;
  bad.training = true;
  bad.dropout = 0.5;
  bad.rng = nullptr;
  CHECK_THROWS_AS(cgc::model_forward(t, store, g.x, g.P, cfg, bad), cgc::ConfigError);
}

TEST_CASE("training dropout perturbs the forward pass deterministically per seed") {
  ModelConfig cfg = tiny_config();
  ParamStore store;
  Rng rng(29);
  cgc::init_params(store, cfg, rng);
  TestGraph g = random_graph(10, cfg.input_dim, 71);

  auto run = [&](std::uint64_t seed) {
    Rng drng(seed);
    cgc::ForwardOptions opts;
    opts.training = true;
    opts.dropout = 0.3;
    opts.rng = &drng;
    cgc::ad::Tape t;
    return cgc::model_forward(t, store, g.x, g.P, cfg, opts).logits->value;
  };
  Mat a = run(5);
  Mat b = run(5);
  Mat c = run(6);
  CHECK(bitwise_equal(a, b));
  CHECK_FALSE(bitwise_equal(a, c));
}

TEST_CASE("hard cluster ids chain argmaxes through the stages") {
  cgc::ForwardResult fwd;
  cgc::StageTrace s0, s1;
  s0.assignment = Mat(4, 3);
  s0.assignment << 0.1, 0.2, 0.7,  // -> 2
      0.6, 0.3, 0.1,               // -> 0
      0.2, 0.5, 0.3,               // -> 1
      0.4, 0.4, 0.2;               // tie -> 0 (first maximum wins)
  s1.assignment = Mat(3, 2);
  s1.assignment << 0.3, 0.7,  // cluster 0 -> 1
      0.8, 0.2,               // cluster 1 -> 0
      0.5, 0.5;               // cluster 2 tie -> 0
  fwd.stages.push_back(s0);
  fwd.stages.push_back(s1);

  CHECK(cgc::hard_cluster_ids(fwd, 0) == std::vector<int>{2, 0, 1, 0});
  CHECK(cgc::hard_cluster_ids(fwd, 1) == std::vector<int>{0, 1, 0, 1});
  CHECK_THROWS_AS(cgc::hard_cluster_ids(fwd, 2), cgc::ConfigError);
  CHECK_THROWS_AS(cgc::hard_cluster_ids(fwd, -1), cgc::ConfigError);
}

TEST_CASE("gradient sink accumulates into the store and rejects shape drift") {
  ParamStore store;
  store.create("w", Mat::Zero(2, 2));
  GradSink sink;
  Mat* slot = sink.slot("w", 2, 2);
  (*slot)(0, 0) = 1.5;
  Mat* again = sink.slot("w", 2, 2);
  CHECK(slot == again);
  (*again)(1, 1) = -2.0;

  store.zero_grads();
  sink.add_into(store);
  sink.add_into(store);  // second pass accumulates
  CHECK(store.at("w").grad(0, 0) == 3.0);
  CHECK(store.at("w").grad(1, 1) == -4.0);

  CHECK_THROWS_AS(sink.slot("w", 3, 2), cgc::DimensionError);
  GradSink other;
  other.slot("nope", 1, 1);
  CHECK_THROWS_AS(other.add_into(store), cgc::Error);
}

TEST_CASE("end-to-end gradients match central differences on a 12-node graph") {
  ModelConfig cfg = tiny_config();
  ParamStore store;
  Rng rng(31);
  cgc::init_params(store, cfg, rng);
  TestGraph g = random_graph(12, cfg.input_dim, 505);
  const int label = 1;

  GradSink sink;
  {
    cgc::ad::Tape t;
    cgc::ForwardOptions opts;
    opts.sink = &sink;
    auto fwd = cgc::model_forward(t, store, g.x, g.P, cfg, opts);
    t.backward(t.cross_entropy_logits(fwd.logits, label));
  }
  store.zero_grads();
  sink.add_into(store);

  auto eval = [&]() {
    cgc::ad::Tape t;
    cgc::ForwardOptions opts;
    auto fwd = cgc::model_forward(t, store, g.x, g.P, cfg, opts);
    return t.cross_entropy_logits(fwd.logits, label)->value(0, 0);
  };

  int checked = 0;
  int failed = 0;
  for (auto& [name, entry] : store) {
    for (Eigen::Index k = 0; k < entry.value.size(); ++k) {
      const double fd = testutil::central_diff(entry.value.data() + k, eval);
      if (!testutil::grad_close(entry.grad.data()[k], fd)) {
        ++failed;
        if (failed <= 5)
          MESSAGE("gradient mismatch at ", name, "[", k, "]: analytic ",
                  entry.grad.data()[k], " vs fd ", fd);
      }
      ++checked;
    }
  }
  CHECK(checked == 1222);
  CHECK(failed == 0);
}

TEST_CASE("checkpoint round trip preserves every byte of state") {
  ModelConfig cfg = tiny_config();
  cgc::Checkpoint ckpt;
  ckpt.model = cfg;
  ckpt.seed = 0xDEADBEEFCAFE1234ull;
  ckpt.epoch = 12;
  Rng rng(37);
  cgc::init_params(ckpt.params, cfg, rng);
  ckpt.params.set_step(421);
  ckpt.norm.mean = Mat(1, cfg.input_dim);
  ckpt.norm.stdev = Mat(1, cfg.input_dim);
  for (int j = 0; j < cfg.input_dim; ++j) {
    ckpt.norm.mean(0, j) = (j == 0) ? -0.0 : 1.0 / 3.0 + j;
    ckpt.norm.stdev(0, j) = (j == 1) ? 1e-17 : 0.5 + 0.01 * j;
  }

  const std::string path = "ckpt_test.bin";
  cgc::save_checkpoint(path, ckpt);
  cgc::Checkpoint back = cgc::load_checkpoint(path);

  CHECK(back.seed == ckpt.seed);
  CHECK(back.epoch == ckpt.epoch);
  CHECK(back.params.step() == 421);
  CHECK(back.model.k_hops == cfg.k_hops);
  CHECK(back.model.hidden_dims == cfg.hidden_dims);
  CHECK(back.model.lstm_hidden == cfg.lstm_hidden);
  CHECK(back.model.cluster_sizes == cfg.cluster_sizes);
  CHECK(back.model.n_classes == cfg.n_classes);
  CHECK(back.model.dropout == cfg.dropout);
  CHECK(back.model.aggregator == cfg.aggregator);
  CHECK(back.model.input_dim == cfg.input_dim);
  CHECK(bitwise_equal(back.norm.mean, ckpt.norm.mean));
  CHECK(bitwise_equal(back.norm.stdev, ckpt.norm.stdev));
  CHECK(back.params.size() == ckpt.params.size());
  for (const auto& [name, entry] : ckpt.params)
    CHECK(bitwise_equal(back.params.at(name).value, entry.value));

  // writing the loaded state again reproduces the file byte for byte
  const std::string path2 = "ckpt_test2.bin";
  cgc::save_checkpoint(path2, back);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1.size() > 0);
  CHECK(b1 == b2);

  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("checkpoint loader rejects damaged files") {
  CHECK_THROWS_AS(cgc::load_checkpoint("no_such_checkpoint.bin"), cgc::IoError);

  const std::string bad = "ckpt_bad.bin";
  {
    std::ofstream os(bad, std::ios::binary);
    os << "definitely not a checkpoint";
  }
  CHECK_THROWS_AS(cgc::load_checkpoint(bad), cgc::IoError);
  std::remove(bad.c_str());

  // valid file truncated mid-blob
  ModelConfig cfg = tiny_config();
  cgc::Checkpoint ckpt;
  ckpt.model = cfg;
  Rng rng(41);
  cgc::init_params(ckpt.params, cfg, rng);
  const std::string full = "ckpt_full.bin";
  cgc::save_checkpoint(full, ckpt);
  std::ifstream in(full, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const std::string cut = "ckpt_cut.bin";
  {
    std::ofstream os(cut, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 17));
  }
  CHECK_THROWS_AS(cgc::load_checkpoint(cut), cgc::IoError);

  // trailing garbage after the final blob
  const std::string fat = "ckpt_fat.bin";
  {
    std::ofstream os(fat, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    os << "x";
  }
  CHECK_THROWS_AS(cgc::load_checkpoint(fat), cgc::IoError);

  std::remove(full.c_str());
  std::remove(cut.c_str());
  std::remove(fat.c_str());
}
