#pragma once

#include <map>
#include <string>

#include "cgc/graph.hpp"
#include "cgc/model.hpp"
#include "cgc/train.hpp"

namespace cgc {

using KvMap = std::map<std::string, std::string>;

// Parses "key = value" lines. '#' starts a comment, blank lines are skipped,
// later duplicates of a key win. Malformed lines raise ConfigError.
KvMap parse_kv_text(const std::string& text);

// Reads and parses one config file; unreadable paths raise IoError.
KvMap read_kv_file(const std::string& path);

// Appliers overwrite exactly the keys present in `kv` and leave the rest of
// the config untouched. Unknown keys and unparseable values raise
// ConfigError. Callers run validate() on the result.
void apply_model_config(ModelConfig& cfg, const KvMap& kv);
void apply_train_config(TrainConfig& cfg, const KvMap& kv);
void apply_graph_config(SamplerConfig& sampler, EdgeConfig& edge, const KvMap& kv);

// Key-value text for a configuration, one key per line, parseable by the
// matching applier. Integer lists are comma-separated, reals use %.10g.
std::string format_model_config(const ModelConfig& cfg);
std::string format_train_config(const TrainConfig& cfg);
std::string format_graph_config(const SamplerConfig& sampler, const EdgeConfig& edge);

}  // namespace cgc
