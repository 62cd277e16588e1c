#include "cgc/model.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "cgc/errors.hpp"

namespace cgc {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian; big-endian hosts unsupported");
static_assert(std::numeric_limits<double>::is_iec559,
              "checkpoint blobs require IEEE-754 doubles");

namespace {

using ad::Node;
using ad::Tape;

std::string stage_prefix(int s) { return "s" + std::to_string(s) + "."; }

Mat xavier(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat w(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = rng.uniform(-bound, bound);
  return w;
}

int argmax_row(const Mat& m, int row) {
  int best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c)
    if (m(row, c) > m(row, best)) best = static_cast<int>(c);
  return best;
}

}  // namespace

void ModelConfig::validate() const {
  if (k_hops < 1) throw ConfigError("k_hops must be >= 1");
  if (n_stages < 1) throw ConfigError("n_stages must be >= 1");
  if (static_cast<int>(hidden_dims.size()) != n_stages)
    throw ConfigError("hidden_dims must list one width per stage");
  if (static_cast<int>(cluster_sizes.size()) != n_stages)
    throw ConfigError("cluster_sizes must list one size per stage");
  for (int h : hidden_dims)
    if (h < 1) throw ConfigError("hidden_dims entries must be >= 1");
  for (std::size_t i = 0; i < cluster_sizes.size(); ++i) {
    if (cluster_sizes[i] < 1) throw ConfigError("cluster_sizes entries must be >= 1");
    if (i > 0 && cluster_sizes[i] >= cluster_sizes[i - 1])
      throw ConfigError("cluster_sizes must be strictly decreasing");
  }
  if (lstm_hidden < 1) throw ConfigError("lstm_hidden must be >= 1");
  if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (aggregator != "mean") throw ConfigError("unsupported aggregator: " + aggregator);
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
}

int ModelConfig::stage_input_dim(int stage) const {
  if (stage < 0 || stage >= n_stages) throw ConfigError("stage index out of range");
  return stage == 0 ? input_dim : hidden_dims[stage - 1];
}

int ModelConfig::readout_dim() const {
  return std::accumulate(hidden_dims.begin(), hidden_dims.end(), 0);
}

void init_params(ParamStore& store, const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  for (int s = 0; s < cfg.n_stages; ++s) {
    const std::string pre = stage_prefix(s);
    const int d_in = cfg.stage_input_dim(s);
    const int h = cfg.hidden_dims[s];
    const int L = cfg.lstm_hidden;
    for (int l = 0; l < cfg.k_hops; ++l)
      store.create(pre + "embed.conv" + std::to_string(l) + ".W",
                   xavier(rng, l == 0 ? d_in : h, h));
    for (const char* dir : {"fw", "bw"}) {
      store.create(pre + "lstm." + dir + ".Wx", xavier(rng, h, 4 * L));
      store.create(pre + "lstm." + dir + ".Wh", xavier(rng, L, 4 * L));
      Mat b = Mat::Zero(1, 4 * L);
      b.middleCols(L, L).setOnes();  // forget gate opens by default
      store.create(pre + "lstm." + dir + ".b", std::move(b));
    }
    store.create(pre + "attn.W", xavier(rng, 2 * L, 1));
    store.create(pre + "attn.b", Mat::Zero(1, 1));
    for (int l = 0; l < cfg.k_hops; ++l)
      store.create(pre + "assign.conv" + std::to_string(l) + ".W",
                   xavier(rng, l == 0 ? d_in : h, h));
    store.create(pre + "assign.lin.W", xavier(rng, cfg.k_hops * h, cfg.cluster_sizes[s]));
    store.create(pre + "assign.lin.b", Mat::Zero(1, cfg.cluster_sizes[s]));
  }
  store.create("clf.W", xavier(rng, cfg.readout_dim(), cfg.n_classes));
  store.create("clf.b", Mat::Zero(1, cfg.n_classes));
}

Mat* GradSink::slot(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) {
    it = buffers_.emplace(name, Mat::Zero(rows, cols)).first;
  } else if (it->second.rows() != rows || it->second.cols() != cols) {
    throw DimensionError("gradient buffer shape mismatch for " + name);
  }
  return &it->second;
}

void GradSink::add_into(ParamStore& store) const {
  for (const auto& [name, g] : buffers_) store.at(name).grad += g;
}

ad::Node* graph_conv(Tape& t, Node* P, Node* h, Node* W) {
  return t.relu(t.matmul(t.matmul(P, h), W));
}

std::pair<ad::Node*, ad::Node*> pool_pair(Tape& t, Node* S, Node* M, Node* P) {
  Node* St = t.transpose(S);
  return {t.matmul(St, M), t.matmul(t.matmul(St, P), S)};
}

ForwardResult model_forward(Tape& t, const ParamStore& params, const Mat& x,
                            const Mat& reweighted, const ModelConfig& cfg,
                            const ForwardOptions& opts) {
  cfg.validate();
  if (x.rows() == 0) throw DimensionError("forward requires at least one node");
  if (x.cols() != cfg.input_dim)
    throw DimensionError("feature width does not match input_dim");
  if (reweighted.rows() != x.rows() || reweighted.cols() != x.rows())
    throw DimensionError("operator must be square and match the node count");
  const bool use_dropout = opts.training && opts.dropout > 0.0;
  if (use_dropout && opts.rng == nullptr)
    throw ConfigError("training with dropout requires an rng");

  auto leaf = [&](const std::string& name) -> Node* {
    const ParamEntry& e = params.at(name);
    if (opts.sink != nullptr)
      return t.param(e.value, opts.sink->slot(name, e.value.rows(), e.value.cols()));
    return t.constant(e.value, "param");
  };

  ForwardResult out;
  Node* H = t.constant(x, "input");
  Node* P = t.constant(reweighted, "operator");
  std::vector<Node*> readouts;
  const int L = cfg.lstm_hidden;

  for (int s = 0; s < cfg.n_stages; ++s) {
    const std::string pre = stage_prefix(s);
    Node* Hin = use_dropout ? t.dropout(H, opts.dropout, true, *opts.rng) : H;
    const Eigen::Index n = Hin->value.rows();

    std::vector<Node*> hs;
    Node* cur = Hin;
    for (int l = 0; l < cfg.k_hops; ++l) {
      cur = graph_conv(t, P, cur, leaf(pre + "embed.conv" + std::to_string(l) + ".W"));
      hs.push_back(cur);
    }

    // Depth sequence h^(1)..h^(k) through an LSTM, nodes as the batch; gates
    // packed (input, forget, candidate, output) in blocks of L columns.
    auto run_lstm = [&](const char* dir, bool reverse) {
      Node* Wx = leaf(pre + "lstm." + std::string(dir) + ".Wx");
      Node* Wh = leaf(pre + "lstm." + std::string(dir) + ".Wh");
      Node* b = leaf(pre + "lstm." + std::string(dir) + ".b");
      Node* hprev = t.constant(Mat::Zero(n, L), "h0");
      Node* cprev = t.constant(Mat::Zero(n, L), "c0");
      std::vector<Node*> outs(cfg.k_hops, nullptr);
      for (int step = 0; step < cfg.k_hops; ++step) {
        const int l = reverse ? cfg.k_hops - 1 - step : step;
        Node* gates =
            t.add_rowvec(t.add(t.matmul(hs[l], Wx), t.matmul(hprev, Wh)), b);
        Node* ig = t.sigmoid(t.block_cols(gates, 0, L));
        Node* fg = t.sigmoid(t.block_cols(gates, L, L));
        Node* gg = t.tanh(t.block_cols(gates, 2 * L, L));
        Node* og = t.sigmoid(t.block_cols(gates, 3 * L, L));
        Node* c = t.add(t.mul(fg, cprev), t.mul(ig, gg));
        Node* hnew = t.mul(og, t.tanh(c));
        outs[l] = hnew;
        hprev = hnew;
        cprev = c;
      }
      return outs;
    };
    std::vector<Node*> fw = run_lstm("fw", false);
    std::vector<Node*> bw = run_lstm("bw", true);

    Node* attnW = leaf(pre + "attn.W");
    Node* attnB = leaf(pre + "attn.b");
    std::vector<Node*> scores;
    for (int l = 0; l < cfg.k_hops; ++l) {
      Node* u = t.concat_cols({fw[l], bw[l]});
      scores.push_back(t.add_rowvec(t.matmul(u, attnW), attnB));
    }
    Node* att = t.softmax_rows(t.concat_cols(scores));  // n x k_hops
    Node* M = nullptr;
    for (int l = 0; l < cfg.k_hops; ++l) {
      Node* term = t.scale_rows(hs[l], t.col(att, l));
      M = (M == nullptr) ? term : t.add(M, term);
    }

    std::vector<Node*> as;
    cur = Hin;
    for (int l = 0; l < cfg.k_hops; ++l) {
      cur = graph_conv(t, P, cur, leaf(pre + "assign.conv" + std::to_string(l) + ".W"));
      as.push_back(cur);
    }
    Node* S = t.softmax_rows(t.add_rowvec(
        t.matmul(t.concat_cols(as), leaf(pre + "assign.lin.W")),
        leaf(pre + "assign.lin.b")));

    Node* readout = t.max_over_rows(M);
    readouts.push_back(readout);

    auto [Hnext, Anext] = pool_pair(t, S, M, P);

    StageTrace trace;
    trace.depth_embeddings.reserve(hs.size());
    for (Node* hl : hs) trace.depth_embeddings.push_back(hl->value);
    trace.attention = att->value;
    trace.embeddings = M->value;
    trace.assignment = S->value;
    trace.coarse_features = Hnext->value;
    trace.coarse_adjacency = Anext->value;
    trace.readout = readout->value;
    out.stages.push_back(std::move(trace));

    if (s + 1 < cfg.n_stages) {
      H = Hnext;
      P = t.reweight_rows(Anext, opts.reweight_p);
    }
  }

  Node* cat = readouts.size() == 1 ? readouts.front() : t.concat_cols(readouts);
  out.logits = t.add_rowvec(t.matmul(cat, leaf("clf.W")), leaf("clf.b"));
  return out;
}

std::vector<int> hard_cluster_ids(const ForwardResult& fwd, int stage) {
  if (stage < 0 || stage >= static_cast<int>(fwd.stages.size()))
    throw ConfigError("cluster stage index out of range");
  const int n = static_cast<int>(fwd.stages[0].assignment.rows());
  std::vector<int> ids(n);
  for (int i = 0; i < n; ++i) {
    int cur = argmax_row(fwd.stages[0].assignment, i);
    for (int s = 1; s <= stage; ++s) cur = argmax_row(fwd.stages[s].assignment, cur);
    ids[i] = cur;
  }
  return ids;
}

namespace {

constexpr char kMagic[8] = {'C', 'G', 'C', 'K', 'P', 'T', '0', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw IoError("checkpoint truncated while reading a length field");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

std::vector<double> row_to_vector(const Mat& m) {
  std::vector<double> out;
  if (m.size() == 0) return out;
  out.reserve(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(0, c));
  return out;
}

Mat vector_to_row(const std::vector<double>& v) {
  if (v.empty()) return Mat();
  Mat m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t c = 0; c < v.size(); ++c) m(0, static_cast<Eigen::Index>(c)) = v[c];
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  ckpt.model.validate();
  nlohmann::json manifest;
  manifest["epoch"] = ckpt.epoch;
  manifest["seed"] = ckpt.seed;
  manifest["optimizer_step"] = ckpt.params.step();
  nlohmann::json model;
  model["k_hops"] = ckpt.model.k_hops;
  model["hidden_dims"] = ckpt.model.hidden_dims;
  model["lstm_hidden"] = ckpt.model.lstm_hidden;
  model["n_stages"] = ckpt.model.n_stages;
  model["cluster_sizes"] = ckpt.model.cluster_sizes;
  model["n_classes"] = ckpt.model.n_classes;
  model["dropout"] = ckpt.model.dropout;
  model["aggregator"] = ckpt.model.aggregator;
  model["input_dim"] = ckpt.model.input_dim;
  manifest["model"] = model;
  manifest["norm"]["mean"] = row_to_vector(ckpt.norm.mean);
  manifest["norm"]["stdev"] = row_to_vector(ckpt.norm.stdev);
  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, entry] : ckpt.params) {
    nlohmann::json p;
    p["name"] = name;
    p["rows"] = static_cast<std::uint64_t>(entry.value.rows());
    p["cols"] = static_cast<std::uint64_t>(entry.value.cols());
    params.push_back(std::move(p));
  }
  manifest["params"] = std::move(params);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  const std::string text = manifest.dump(2) + "\n";
  os.write(kMagic, sizeof(kMagic));
  write_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, entry] : ckpt.params) {
    write_u64(os, static_cast<std::uint64_t>(entry.value.rows()));
    write_u64(os, static_cast<std::uint64_t>(entry.value.cols()));
    os.write(reinterpret_cast<const char*>(entry.value.data()),
             static_cast<std::streamsize>(sizeof(double) * entry.value.size()));
  }
  if (!os) throw IoError("failed while writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file: " + path);
  const std::uint64_t manifest_size = read_u64(is);
  std::string text(manifest_size, '\0');
  is.read(text.data(), static_cast<std::streamsize>(manifest_size));
  if (!is) throw IoError("checkpoint truncated while reading the manifest");

  Checkpoint ckpt;
  std::vector<std::pair<std::string, std::pair<std::uint64_t, std::uint64_t>>> blobs;
  try {
    const nlohmann::json manifest = nlohmann::json::parse(text);
    ckpt.epoch = manifest.at("epoch").get<int>();
    ckpt.seed = manifest.at("seed").get<std::uint64_t>();
    const nlohmann::json& model = manifest.at("model");
    ckpt.model.k_hops = model.at("k_hops").get<int>();
    ckpt.model.hidden_dims = model.at("hidden_dims").get<std::vector<int>>();
    ckpt.model.lstm_hidden = model.at("lstm_hidden").get<int>();
    ckpt.model.n_stages = model.at("n_stages").get<int>();
    ckpt.model.cluster_sizes = model.at("cluster_sizes").get<std::vector<int>>();
    ckpt.model.n_classes = model.at("n_classes").get<int>();
    ckpt.model.dropout = model.at("dropout").get<double>();
    ckpt.model.aggregator = model.at("aggregator").get<std::string>();
    ckpt.model.input_dim = model.at("input_dim").get<int>();
    ckpt.norm.mean = vector_to_row(manifest.at("norm").at("mean").get<std::vector<double>>());
    ckpt.norm.stdev = vector_to_row(manifest.at("norm").at("stdev").get<std::vector<double>>());
    ckpt.params.set_step(manifest.at("optimizer_step").get<std::int64_t>());
    for (const nlohmann::json& p : manifest.at("params")) {
      blobs.emplace_back(p.at("name").get<std::string>(),
                         std::make_pair(p.at("rows").get<std::uint64_t>(),
                                        p.at("cols").get<std::uint64_t>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("invalid checkpoint manifest: ") + e.what());
  }
  ckpt.model.validate();

  for (const auto& [name, shape] : blobs) {
    const std::uint64_t rows = read_u64(is);
    const std::uint64_t cols = read_u64(is);
    if (rows != shape.first || cols != shape.second)
      throw IoError("blob shape header disagrees with the manifest for " + name);
    Mat value(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    is.read(reinterpret_cast<char*>(value.data()),
            static_cast<std::streamsize>(sizeof(double) * value.size()));
    if (!is) throw IoError("checkpoint truncated while reading blob " + name);
    ckpt.params.create(name, std::move(value));
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw IoError("trailing bytes after the final checkpoint blob");
  return ckpt;
}

}  // namespace cgc
