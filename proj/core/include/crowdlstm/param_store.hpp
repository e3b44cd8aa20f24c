#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "crowdlstm/tensor.hpp"

namespace crowdlstm {

struct RmspropConfig {
  double learning_rate = 0.003;
  double decay = 0.99;
  double epsilon = 1e-8;
};

// Named parameters with gradient and RMSprop accumulators of identical
// shape. Iteration order is insertion order, which fixes the order of
// initialization draws and of checkpoint blocks.
class ParamStore {
 public:
  struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix moment;
    // Used for the uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initializer.
    std::size_t fan_in = 1;
  };

  // Returns the index of the new parameter. Names must be unique.
  std::size_t add(const std::string& name, std::size_t rows, std::size_t cols,
                  std::size_t fan_in);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;

  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  Param& at(const std::string& name) { return params_[index_of(name)]; }
  const Param& at(const std::string& name) const { return params_[index_of(name)]; }

  std::size_t size() const { return params_.size(); }
  std::size_t total_values() const;
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void init_uniform(std::uint64_t seed);
  void zero_grad();
  void zero_moments();
  void scale_grad(double factor);
  double grad_norm() const;
  // Rescales all gradients so that their global L2 norm is at most max_norm.
  // Returns the norm before clipping.
  double clip_grad_norm(double max_norm);

  // Gradient buffers of another store with identical layout are added in.
  void accumulate_grad_from(const ParamStore& other);

 private:
  std::vector<Param> params_;
  std::map<std::string, std::size_t> index_;
};

// s <- decay s + (1 - decay) g^2; theta <- theta - lr g / (sqrt(s) + eps);
// gradients are cleared afterwards. Throws NumericError naming the first
// parameter with a non-finite gradient, before touching any value.
void rmsprop_step(ParamStore& store, const RmspropConfig& config);

}  // namespace crowdlstm
