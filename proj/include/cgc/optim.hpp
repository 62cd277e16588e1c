#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "cgc/errors.hpp"
#include "cgc/matrix.hpp"

namespace cgc {

struct ParamEntry {
  Mat value;
  Mat grad;  // accumulated by tape backward passes
  Mat m;     // Adam first moment
  Mat v;     // Adam second moment
};

// Named parameters in a sorted map, so iteration (and thus every serialized
// artifact and optimizer sweep) has one canonical order.
class ParamStore {
 public:
  Mat& create(const std::string& name, Mat init);
  ParamEntry& at(const std::string& name);
  const ParamEntry& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  void zero_grads();
  void scale_grads(double c);

  std::size_t size() const { return entries_.size(); }
  std::size_t count_scalars() const;

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::string, ParamEntry> entries_;
  std::int64_t step_ = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// One Adam update over every entry, reading entry.grad. Weight decay is
// decoupled: values shrink by lr*weight_decay before the moment-based delta,
// so decay never leaks into m/v.
void adam_step(ParamStore& store, const AdamConfig& cfg);

}  // namespace cgc
