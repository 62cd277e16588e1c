#include "cgc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_map>

#include "cgc/errors.hpp"
#include "cgc/rng.hpp"
#include "json.hpp"

namespace cgc {

namespace {

double sq_dist(const Mat& coords, int i, int j) {
  const double dr = coords(i, 0) - coords(j, 0);
  const double dc = coords(i, 1) - coords(j, 1);
  return dr * dr + dc * dc;
}

int share(double ratio, int n) {
  return static_cast<int>(std::ceil(ratio * static_cast<double>(n)));
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

const char* sampler_kind_name(SamplerKind k) {
  switch (k) {
    case SamplerKind::kFused: return "fused";
    case SamplerKind::kFarthest: return "farthest";
    case SamplerKind::kRandom: return "random";
  }
  throw ConfigError("unknown sampler kind");
}

SamplerKind sampler_kind_from_name(const std::string& name) {
  if (name == "fused") return SamplerKind::kFused;
  if (name == "farthest") return SamplerKind::kFarthest;
  if (name == "random") return SamplerKind::kRandom;
  throw ConfigError("sampler kind must be fused, farthest or random: " + name);
}

void SamplerConfig::validate() const {
  if (!(a_ratio > 0.0 && a_ratio <= 1.0))
    throw ConfigError("sampler: a_ratio must be in (0, 1]");
  if (!(b_ratio >= 0.0 && b_ratio < a_ratio))
    throw ConfigError("sampler: b_ratio must satisfy 0 <= b < a");
  if (a_ratio + b_ratio > 1.0) throw ConfigError("sampler: a + b must not exceed 1");
}

void EdgeConfig::validate() const {
  if (k_max < 1) throw ConfigError("edges: k_max must be at least 1");
  if (!(d > 0.0)) throw ConfigError("edges: d must be positive");
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("edges: p must be in (0, 1)");
}

Mat CellGraph::adjacency() const {
  Mat a = Mat::Zero(n, n);
  for (const auto& [i, j] : edges) {
    a(i, j) = 1.0;
    a(j, i) = 1.0;
  }
  return a;
}

Mat CellGraph::reweighted() const { return reweight_matrix(adjacency(), edge.p); }

std::vector<int> farthest_point_sample(const Mat& coords, int m, std::uint64_t seed) {
  const int n = static_cast<int>(coords.rows());
  if (n == 0) throw Error("farthest_point_sample: no points");
  if (m < 1 || m > n)
    throw Error("farthest_point_sample: need 1 <= m <= n, got m=" + std::to_string(m) +
                " n=" + std::to_string(n));
  Rng rng(seed);
  const int start = static_cast<int>(rng.uniform_u64(static_cast<std::uint64_t>(n)));
  std::vector<int> picks{start};
  picks.reserve(m);
  std::vector<double> min_d2(n);
  for (int i = 0; i < n; ++i) min_d2[i] = sq_dist(coords, i, start);
  min_d2[start] = -1.0;  // selected markers can never win the argmax
  while (static_cast<int>(picks.size()) < m) {
    int best = -1;
    double best_d2 = -1.0;
    for (int i = 0; i < n; ++i)
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    picks.push_back(best);
    min_d2[best] = -1.0;
    for (int i = 0; i < n; ++i)
      if (min_d2[i] >= 0.0) min_d2[i] = std::min(min_d2[i], sq_dist(coords, i, best));
  }
  return picks;
}

std::vector<int> sample_nodes(const Mat& coords, const SamplerConfig& cfg,
                              std::uint64_t seed) {
  cfg.validate();
  const int n = static_cast<int>(coords.rows());
  if (n == 0) throw Error("sample_nodes: no points");
  Rng master(seed);
  const std::uint64_t fps_seed = master.split(0).seed();
  const std::uint64_t pick_seed = master.split(1).seed();

  std::vector<int> out;
  switch (cfg.kind) {
    case SamplerKind::kFused: {
      const int ma = std::min(n, share(cfg.a_ratio, n));
      out = farthest_point_sample(coords, ma, fps_seed);
      std::vector<char> taken(n, 0);
      for (int i : out) taken[i] = 1;
      std::vector<int> rest;
      for (int i = 0; i < n; ++i)
        if (!taken[i]) rest.push_back(i);
      const int mb = std::min<int>(static_cast<int>(rest.size()), share(cfg.b_ratio, n));
      Rng rng(pick_seed);
      rng.shuffle(rest);
      out.insert(out.end(), rest.begin(), rest.begin() + mb);
      break;
    }
    case SamplerKind::kFarthest: {
      const int m = std::min(n, share(cfg.a_ratio + cfg.b_ratio, n));
      out = farthest_point_sample(coords, m, fps_seed);
      break;
    }
    case SamplerKind::kRandom: {
      const int m = std::min(n, share(cfg.a_ratio + cfg.b_ratio, n));
      std::vector<int> all(n);
      for (int i = 0; i < n; ++i) all[i] = i;
      Rng rng(pick_seed);
      rng.shuffle(all);
      out.assign(all.begin(), all.begin() + m);
      break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::pair<int, int>> knn_edges(const Mat& coords, const EdgeConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(coords.rows());
  const double d2_max = cfg.d * cfg.d;

  // uniform hash grid with cell size d: all neighbors closer than d live in
  // the 3x3 cell neighborhood
  auto cell_of = [&](int i) {
    const long long cr = static_cast<long long>(std::floor(coords(i, 0) / cfg.d));
    const long long cc = static_cast<long long>(std::floor(coords(i, 1) / cfg.d));
    return std::make_pair(cr, cc);
  };
  std::unordered_map<long long, std::vector<int>> grid;
  auto key = [](long long cr, long long cc) { return cr * 0x100000001LL + cc; };
  for (int i = 0; i < n; ++i) {
    const auto [cr, cc] = cell_of(i);
    grid[key(cr, cc)].push_back(i);
  }

  std::set<std::pair<int, int>> out;
  std::vector<std::pair<double, int>> cand;
  for (int i = 0; i < n; ++i) {
    cand.clear();
    const auto [cr, cc] = cell_of(i);
    for (long long dr = -1; dr <= 1; ++dr)
      for (long long dc = -1; dc <= 1; ++dc) {
        const auto it = grid.find(key(cr + dr, cc + dc));
        if (it == grid.end()) continue;
        for (int j : it->second) {
          if (j == i) continue;
          const double d2 = sq_dist(coords, i, j);
          if (d2 < d2_max) cand.emplace_back(d2, j);
        }
      }
    const std::size_t keep = std::min<std::size_t>(cand.size(), cfg.k_max);
    std::partial_sort(cand.begin(), cand.begin() + keep, cand.end());
    for (std::size_t t = 0; t < keep; ++t) {
      const int j = cand[t].second;
      out.emplace(std::min(i, j), std::max(i, j));
    }
  }
  return {out.begin(), out.end()};
}

Mat reweight_matrix(const Mat& a, double p) {
  if (a.rows() != a.cols()) throw DimensionError("reweight_matrix: matrix must be square");
  if (p < 0.0 || p >= 1.0) throw ConfigError("reweight_matrix: p must be in [0, 1)");
  const Eigen::Index n = a.rows();
  Mat r = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double off = a.row(i).sum() - a(i, i);
    if (off > 0.0) {
      r.row(i) = (p / off) * a.row(i);
      r(i, i) = 1.0 - p;
    } else {
      r(i, i) = 1.0;
    }
  }
  return r;
}

NormStats compute_norm_stats(const std::vector<CellGraph>& graphs) {
  const int ch = kDescriptorCount + 2;
  long total = 0;
  for (const auto& g : graphs) total += g.n;
  if (total == 0) throw Error("compute_norm_stats: no nodes in the training set");

  Mat sum = Mat::Zero(1, ch), sumsq = Mat::Zero(1, ch);
  for (const auto& g : graphs) {
    for (int i = 0; i < g.n; ++i) {
      for (int c = 0; c < kDescriptorCount; ++c) {
        sum(0, c) += g.features(i, c);
        sumsq(0, c) += g.features(i, c) * g.features(i, c);
      }
      for (int c = 0; c < 2; ++c) {
        sum(0, kDescriptorCount + c) += g.coords(i, c);
        sumsq(0, kDescriptorCount + c) += g.coords(i, c) * g.coords(i, c);
      }
    }
  }
  NormStats s;
  s.mean = sum / static_cast<double>(total);
  s.stdev = (sumsq / static_cast<double>(total) - s.mean.cwiseProduct(s.mean))
                .cwiseMax(0.0)
                .cwiseSqrt()
                .cwiseMax(1e-8);
  return s;
}

Mat model_input(const CellGraph& g, const NormStats& stats) {
  const int ch = kDescriptorCount + 2;
  if (stats.mean.cols() != ch || stats.stdev.cols() != ch)
    throw DimensionError("model_input: stats have the wrong channel count");
  Mat x(g.n, ch);
  x.leftCols(kDescriptorCount) = g.features;
  x.rightCols(2) = g.coords;
  x.array().rowwise() -= stats.mean.row(0).array();
  x.array().rowwise() /= stats.stdev.row(0).array();
  return x;
}

CellGraph assemble_graph(const std::vector<Descriptor>& descriptors,
                         const SamplerConfig& sampler, const EdgeConfig& edge,
                         std::optional<int> label, std::uint64_t seed,
                         const std::string& image_id) {
  if (descriptors.empty()) throw Error("assemble_graph: empty graph (no nuclei)");
  sampler.validate();
  edge.validate();
  const int total = static_cast<int>(descriptors.size());
  Mat all_coords(total, 2);
  for (int i = 0; i < total; ++i) {
    all_coords(i, 0) = descriptors[i].centroid_row;
    all_coords(i, 1) = descriptors[i].centroid_col;
  }
  const std::vector<int> idx = sample_nodes(all_coords, sampler, seed);

  CellGraph g;
  g.n = static_cast<int>(idx.size());
  g.coords = Mat(g.n, 2);
  g.features = Mat(g.n, kDescriptorCount);
  for (int r = 0; r < g.n; ++r) {
    const Descriptor& d = descriptors[idx[r]];
    g.coords(r, 0) = d.centroid_row;
    g.coords(r, 1) = d.centroid_col;
    for (int c = 0; c < kDescriptorCount; ++c) g.features(r, c) = d.v[c];
  }
  g.edges = knn_edges(g.coords, edge);
  g.label = label;
  g.image_id = image_id;
  g.seed = seed;
  g.sampler = sampler;
  g.edge = edge;
  return g;
}

void save_graph_bundle(const CellGraph& g, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir + ": cannot create directory");

  nlohmann::json meta;
  meta["n"] = g.n;
  if (g.label)
    meta["label"] = *g.label;
  else
    meta["label"] = nullptr;
  meta["image_id"] = g.image_id;
  meta["seed"] = g.seed;
  meta["normalization_stats"] = "raw";
  meta["sampler"] = {{"kind", sampler_kind_name(g.sampler.kind)},
                     {"a_ratio", g.sampler.a_ratio},
                     {"b_ratio", g.sampler.b_ratio}};
  meta["edge"] = {{"k_max", g.edge.k_max}, {"d", g.edge.d}, {"p", g.edge.p}};
  std::ofstream mf(fs::path(dir) / "meta.json", std::ios::binary);
  mf << meta.dump(2) << "\n";
  if (!mf) throw IoError(dir + ": cannot write meta.json");

  std::ofstream nf(fs::path(dir) / "nodes.csv", std::ios::binary);
  nf << "id,row,col";
  for (int c = 0; c < kDescriptorCount; ++c) nf << ",f" << c;
  nf << "\n";
  for (int i = 0; i < g.n; ++i) {
    nf << i << "," << fmt17(g.coords(i, 0)) << "," << fmt17(g.coords(i, 1));
    for (int c = 0; c < kDescriptorCount; ++c) nf << "," << fmt17(g.features(i, c));
    nf << "\n";
  }
  if (!nf) throw IoError(dir + ": cannot write nodes.csv");

  std::ofstream ef(fs::path(dir) / "edges.csv", std::ios::binary);
  ef << "i,j\n";
  for (const auto& [i, j] : g.edges) ef << i << "," << j << "\n";
  if (!ef) throw IoError(dir + ": cannot write edges.csv");
}

CellGraph load_graph_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "meta.json", std::ios::binary);
  if (!mf) throw IoError(dir + ": missing meta.json");
  nlohmann::json meta;
  try {
    mf >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(dir + ": bad meta.json: " + e.what());
  }

  CellGraph g;
  try {
    g.n = meta.at("n").get<int>();
    if (!meta.at("label").is_null()) g.label = meta.at("label").get<int>();
    g.image_id = meta.at("image_id").get<std::string>();
    g.seed = meta.at("seed").get<std::uint64_t>();
    g.sampler.kind = sampler_kind_from_name(meta.at("sampler").at("kind").get<std::string>());
    g.sampler.a_ratio = meta.at("sampler").at("a_ratio").get<double>();
    g.sampler.b_ratio = meta.at("sampler").at("b_ratio").get<double>();
    g.edge.k_max = meta.at("edge").at("k_max").get<int>();
    g.edge.d = meta.at("edge").at("d").get<double>();
    g.edge.p = meta.at("edge").at("p").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(dir + ": meta.json missing fields: " + e.what());
  }

  std::ifstream nf(fs::path(dir) / "nodes.csv", std::ios::binary);
  if (!nf) throw IoError(dir + ": missing nodes.csv");
  std::string line;
  std::getline(nf, line);  // header
  g.coords = Mat(g.n, 2);
  g.features = Mat(g.n, kDescriptorCount);
  for (int i = 0; i < g.n; ++i) {
    if (!std::getline(nf, line)) throw IoError(dir + ": nodes.csv truncated");
    std::vector<double> vals;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t next = line.find(',', pos);
      const std::string tok = line.substr(pos, next == std::string::npos ? next : next - pos);
      try {
        vals.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw IoError(dir + ": bad number in nodes.csv: " + tok);
      }
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    if (vals.size() != static_cast<std::size_t>(kDescriptorCount) + 3)
      throw IoError(dir + ": wrong column count in nodes.csv");
    if (static_cast<int>(vals[0]) != i) throw IoError(dir + ": node ids must be 0..n-1");
    g.coords(i, 0) = vals[1];
    g.coords(i, 1) = vals[2];
    for (int c = 0; c < kDescriptorCount; ++c) g.features(i, c) = vals[3 + c];
  }

  std::ifstream ef(fs::path(dir) / "edges.csv", std::ios::binary);
  if (!ef) throw IoError(dir + ": missing edges.csv");
  std::getline(ef, line);  // header
  while (std::getline(ef, line)) {
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) throw IoError(dir + ": bad edge line: " + line);
    int i = 0, j = 0;
    try {
      i = std::stoi(line.substr(0, comma));
      j = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw IoError(dir + ": bad edge line: " + line);
    }
    if (i < 0 || j < 0 || i >= g.n || j >= g.n || i >= j)
      throw IoError(dir + ": invalid edge " + line);
    g.edges.emplace_back(i, j);
  }
  return g;
}

}  // namespace cgc
