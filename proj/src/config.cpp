#include "cgc/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cgc/errors.hpp"

namespace cgc {

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

long long to_ll(const std::string& key, const std::string& raw) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(raw, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not an integer: '" + raw + "'");
  }
  if (pos != raw.size())
    throw ConfigError("config key '" + key + "': not an integer: '" + raw + "'");
  return v;
}

int to_int(const std::string& key, const std::string& raw) {
  long long v = to_ll(key, raw);
  if (v < -(1LL << 31) || v >= (1LL << 31))
    throw ConfigError("config key '" + key + "': out of range: '" + raw + "'");
  return static_cast<int>(v);
}

std::uint64_t to_u64(const std::string& key, const std::string& raw) {
  if (!raw.empty() && raw[0] == '-')
    throw ConfigError("config key '" + key + "': must be nonnegative: '" + raw + "'");
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(raw, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not an integer: '" + raw + "'");
  }
  if (pos != raw.size())
    throw ConfigError("config key '" + key + "': not an integer: '" + raw + "'");
  return v;
}

double to_double(const std::string& key, const std::string& raw) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(raw, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: '" + raw + "'");
  }
  if (pos != raw.size())
    throw ConfigError("config key '" + key + "': not a number: '" + raw + "'");
  return v;
}

std::vector<int> to_int_list(const std::string& key, const std::string& raw) {
  std::vector<int> out;
  std::stringstream ss(raw);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty())
      throw ConfigError("config key '" + key + "': empty list element in '" + raw + "'");
    out.push_back(to_int(key, part));
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt_list(const std::vector<int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

[[noreturn]] void unknown_key(const char* what, const std::string& key) {
  throw ConfigError(std::string(what) + " config: unknown key '" + key + "'");
}

}  // namespace

KvMap parse_kv_text(const std::string& text) {
  KvMap kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected 'key = value', got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

KvMap read_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_kv_text(buf.str());
}

void apply_model_config(ModelConfig& cfg, const KvMap& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "k_hops")
      cfg.k_hops = to_int(key, value);
    else if (key == "hidden_dims")
      cfg.hidden_dims = to_int_list(key, value);
    else if (key == "lstm_hidden")
      cfg.lstm_hidden = to_int(key, value);
    else if (key == "n_stages")
      cfg.n_stages = to_int(key, value);
    else if (key == "cluster_sizes")
      cfg.cluster_sizes = to_int_list(key, value);
    else if (key == "n_classes")
      cfg.n_classes = to_int(key, value);
    else if (key == "dropout")
      cfg.dropout = to_double(key, value);
    else if (key == "aggregator")
      cfg.aggregator = value;
    else if (key == "input_dim")
      cfg.input_dim = to_int(key, value);
    else
      unknown_key("model", key);
  }
}

void apply_train_config(TrainConfig& cfg, const KvMap& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "epochs")
      cfg.epochs = to_int(key, value);
    else if (key == "batch_size")
      cfg.batch_size = to_int(key, value);
    else if (key == "lr")
      cfg.lr = to_double(key, value);
    else if (key == "lr_drop_epochs")
      cfg.lr_drop_epochs = to_int_list(key, value);
    else if (key == "lr_drop_factor")
      cfg.lr_drop_factor = to_double(key, value);
    else if (key == "weight_decay")
      cfg.weight_decay = to_double(key, value);
    else if (key == "dropout")
      cfg.dropout = to_double(key, value);
    else if (key == "seed")
      cfg.seed = to_u64(key, value);
    else
      unknown_key("train", key);
  }
}

void apply_graph_config(SamplerConfig& sampler, EdgeConfig& edge, const KvMap& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "sampler")
      sampler.kind = sampler_kind_from_name(value);
    else if (key == "a_ratio")
      sampler.a_ratio = to_double(key, value);
    else if (key == "b_ratio")
      sampler.b_ratio = to_double(key, value);
    else if (key == "k_max")
      edge.k_max = to_int(key, value);
    else if (key == "d")
      edge.d = to_double(key, value);
    else if (key == "p")
      edge.p = to_double(key, value);
    else
      unknown_key("graph", key);
  }
}

std::string format_model_config(const ModelConfig& cfg) {
  std::string out;
  out += "k_hops = " + std::to_string(cfg.k_hops) + "\n";
  out += "hidden_dims = " + fmt_list(cfg.hidden_dims) + "\n";
  out += "lstm_hidden = " + std::to_string(cfg.lstm_hidden) + "\n";
  out += "n_stages = " + std::to_string(cfg.n_stages) + "\n";
  out += "cluster_sizes = " + fmt_list(cfg.cluster_sizes) + "\n";
  out += "n_classes = " + std::to_string(cfg.n_classes) + "\n";
  out += "dropout = " + fmt_double(cfg.dropout) + "\n";
  out += "aggregator = " + cfg.aggregator + "\n";
  out += "input_dim = " + std::to_string(cfg.input_dim) + "\n";
  return out;
}

std::string format_train_config(const TrainConfig& cfg) {
  std::string out;
  out += "epochs = " + std::to_string(cfg.epochs) + "\n";
  out += "batch_size = " + std::to_string(cfg.batch_size) + "\n";
  out += "lr = " + fmt_double(cfg.lr) + "\n";
  out += "lr_drop_epochs = " + fmt_list(cfg.lr_drop_epochs) + "\n";
  out += "lr_drop_factor = " + fmt_double(cfg.lr_drop_factor) + "\n";
  out += "weight_decay = " + fmt_double(cfg.weight_decay) + "\n";
  out += "dropout = " + fmt_double(cfg.dropout) + "\n";
  out += "seed = " + std::to_string(cfg.seed) + "\n";
  return out;
}

std::string format_graph_config(const SamplerConfig& sampler, const EdgeConfig& edge) {
  std::string out;
  out += std::string("sampler = ") + sampler_kind_name(sampler.kind) + "\n";
  out += "a_ratio = " + fmt_double(sampler.a_ratio) + "\n";
  out += "b_ratio = " + fmt_double(sampler.b_ratio) + "\n";
  out += "k_max = " + std::to_string(edge.k_max) + "\n";
  out += "d = " + fmt_double(edge.d) + "\n";
  out += "p = " + fmt_double(edge.p) + "\n";
  return out;
}

}  // namespace cgc
