#include "cgc/optim.hpp"

#include <cmath>

namespace cgc {

Mat& ParamStore::create(const std::string& name, Mat init) {
  if (entries_.count(name))
    throw Error("ParamStore: duplicate parameter '" + name + "'");
  ParamEntry e;
  e.grad = Mat::Zero(init.rows(), init.cols());
  e.m = e.grad;
  e.v = e.grad;
  e.value = std::move(init);
  return entries_.emplace(name, std::move(e)).first->second.value;
}

ParamEntry& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

const ParamEntry& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) e.grad.setZero();
}

void ParamStore::scale_grads(double c) {
  for (auto& [name, e] : entries_) e.grad *= c;
}

std::size_t ParamStore::count_scalars() const {
  std::size_t total = 0;
  for (const auto& [name, e] : entries_) total += static_cast<std::size_t>(e.value.size());
  return total;
}

void adam_step(ParamStore& store, const AdamConfig& cfg) {
  store.set_step(store.step() + 1);
  const double t = static_cast<double>(store.step());
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, e] : store) {
    if (!e.grad.allFinite())
      throw NumericError("adam_step: non-finite gradient for '" + name + "'");
    if (cfg.weight_decay != 0.0) e.value *= 1.0 - cfg.lr * cfg.weight_decay;
    e.m = cfg.beta1 * e.m + (1.0 - cfg.beta1) * e.grad;
    e.v.array() = cfg.beta2 * e.v.array() + (1.0 - cfg.beta2) * e.grad.array().square();
    e.value.array() -=
        cfg.lr * (e.m.array() / bc1) / ((e.v.array() / bc2).sqrt() + cfg.eps);
  }
}

}  // namespace cgc
