#pragma once

// Dense numeric kernels used by every layer of the model. Vectors are plain
// std::vector<double>; weights are row-major Matrix values. Each forward
// primitive has a matching backward that accumulates into caller-owned
// gradient buffers.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace crowdlstm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

using Vec = std::vector<double>;
using ConstSpan = std::span<const double>;
using MutSpan = std::span<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, Vec values);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  ConstSpan values() const { return values_; }
  MutSpan values() { return values_; }
  ConstSpan row(std::size_t r) const { return ConstSpan(values_).subspan(r * cols_, cols_); }

  void fill(double v);
  bool all_finite() const;
  // Throws NumericError naming `what` if any entry is NaN or infinite.
  void require_finite(const std::string& what) const;

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool operator==(const Matrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec values_;
};

// Seeded 64-bit Mersenne Twister with hand-rolled distributions so that
// draws do not depend on the standard library's distribution algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[rng.index(i)]);
  }
}

// y = x W + b for a row vector x.
Vec linear_forward(ConstSpan x, const Matrix& w, ConstSpan b);

// Accumulates dW += x^T dy, db += dy and (if dx is non-empty) dx += dy W^T.
void linear_backward(ConstSpan x, const Matrix& w, ConstSpan dy, Matrix& dw, MutSpan db,
                     MutSpan dx);

Vec relu(ConstSpan x);
void relu_inplace(MutSpan x);
// dx += dy where the forward output was positive.
void relu_backward(ConstSpan y, ConstSpan dy, MutSpan dx);

// Max-subtracted softmax. Throws on empty input.
Vec softmax(ConstSpan v);
// dz += p * (dp - <p, dp>).
void softmax_backward(ConstSpan p, ConstSpan dp, MutSpan dz);

double sigmoid(double x);

// Inverted dropout. In training mode each entry survives with probability
// 1 - rate and is scaled by 1 / (1 - rate); the applied multipliers are
// written to `mask` (if given) so the backward pass can reuse them.
Vec dropout(ConstSpan x, double rate, bool training, Rng& rng, Vec* mask = nullptr);
void check_dropout_rate(double rate);

void axpy(double a, ConstSpan x, MutSpan y);
double dot(ConstSpan a, ConstSpan b);
bool all_finite(ConstSpan v);

}  // namespace crowdlstm
