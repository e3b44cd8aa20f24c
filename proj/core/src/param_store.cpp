#include "crowdlstm/param_store.hpp"

#include <cmath>

namespace crowdlstm {

std::size_t ParamStore::add(const std::string& name, std::size_t rows, std::size_t cols,
                            std::size_t fan_in) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  params_.push_back(Param{name, Matrix(rows, cols), Matrix(rows, cols), Matrix(rows, cols),
                          fan_in == 0 ? 1 : fan_in});
  index_[name] = params_.size() - 1;
  return params_.size() - 1;
}

std::size_t ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::init_uniform(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& p : params_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.fan_in));
    for (double& v : p.value.values()) v = rng.uniform(-bound, bound);
  }
  zero_grad();
  zero_moments();
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParamStore::zero_moments() {
  for (auto& p : params_) p.moment.fill(0.0);
}

void ParamStore::scale_grad(double factor) {
  for (auto& p : params_) {
    for (double& g : p.grad.values()) g *= factor;
  }
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) {
    for (double g : p.grad.values()) sq += g * g;
  }
  return std::sqrt(sq);
}

double ParamStore::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (std::isfinite(norm) && norm > max_norm && max_norm > 0.0) scale_grad(max_norm / norm);
  return norm;
}

void ParamStore::accumulate_grad_from(const ParamStore& other) {
  if (other.params_.size() != params_.size()) {
    throw DimensionError("accumulate_grad_from: layout mismatch");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = params_[i].grad.values();
    auto src = other.params_[i].grad.values();
    if (dst.size() != src.size()) throw DimensionError("accumulate_grad_from: " + params_[i].name);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

void rmsprop_step(ParamStore& store, const RmspropConfig& config) {
  for (const auto& p : store) {
    if (!p.grad.all_finite()) throw NumericError("non-finite gradient in parameter " + p.name);
  }
  const double keep = config.decay;
  const double mix = 1.0 - config.decay;
  for (auto& p : store) {
    auto theta = p.value.values();
    auto g = p.grad.values();
    auto s = p.moment.values();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      s[k] = keep * s[k] + mix * g[k] * g[k];
      theta[k] -= config.learning_rate * g[k] / (std::sqrt(s[k]) + config.epsilon);
      g[k] = 0.0;
    }
  }
}

}  // namespace crowdlstm
