#include "crowdlstm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace crowdlstm {

namespace {

// Four interleaved partial sums in a fixed order, so the compiler can keep
// several multiply-adds in flight without reassociating anything itself.
double dot4(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < n; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, Vec values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw DimensionError("Matrix: " + std::to_string(values_.size()) + " values for a " +
                         std::to_string(rows) + "x" + std::to_string(cols) + " shape");
  }
  require_finite("Matrix");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Matrix::all_finite() const { return crowdlstm::all_finite(values_); }

void Matrix::require_finite(const std::string& what) const {
  if (!all_finite()) throw NumericError(what + ": non-finite entry");
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // Box-Muller; one value per call keeps the stream position simple.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ConfigError("Rng::index: empty range");
  // Rejection sampling for an unbiased draw.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return static_cast<std::size_t>(v % n);
}

Vec linear_forward(ConstSpan x, const Matrix& w, ConstSpan b) {
  if (x.size() != w.rows() || b.size() != w.cols()) {
    throw DimensionError("linear: x[" + std::to_string(x.size()) + "] W[" +
                         std::to_string(w.rows()) + "x" + std::to_string(w.cols()) + "] b[" +
                         std::to_string(b.size()) + "]");
  }
  Vec y(b.begin(), b.end());
  const std::size_t m = w.cols();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* wr = w.values().data() + i * m;
    for (std::size_t j = 0; j < m; ++j) y[j] += xi * wr[j];
  }
  return y;
}

void linear_backward(ConstSpan x, const Matrix& w, ConstSpan dy, Matrix& dw, MutSpan db,
                     MutSpan dx) {
  const std::size_t n = w.rows();
  const std::size_t m = w.cols();
  if (x.size() != n || dy.size() != m || !dw.same_shape(w) || db.size() != m ||
      (!dx.empty() && dx.size() != n)) {
    throw DimensionError("linear_backward: shape mismatch");
  }
  for (std::size_t j = 0; j < m; ++j) db[j] += dy[j];
  double* gw = dw.values().data();
  const double* wv = w.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    double* gr = gw + i * m;
    const double* wr = wv + i * m;
    if (xi != 0.0) {
      for (std::size_t j = 0; j < m; ++j) gr[j] += xi * dy[j];
    }
    if (!dx.empty()) dx[i] += dot4(wr, dy.data(), m);
  }
}

Vec relu(ConstSpan x) {
  Vec y(x.begin(), x.end());
  relu_inplace(y);
  return y;
}

void relu_inplace(MutSpan x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

void relu_backward(ConstSpan y, ConstSpan dy, MutSpan dx) {
  if (y.size() != dy.size() || dx.size() != dy.size()) {
    throw DimensionError("relu_backward: shape mismatch");
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > 0.0) dx[i] += dy[i];
  }
}

Vec softmax(ConstSpan v) {
  if (v.empty()) throw DimensionError("softmax: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  Vec p(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    p[i] = std::exp(v[i] - mx);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

void softmax_backward(ConstSpan p, ConstSpan dp, MutSpan dz) {
  if (p.size() != dp.size() || dz.size() != p.size()) {
    throw DimensionError("softmax_backward: shape mismatch");
  }
  const double inner = dot(p, dp);
  for (std::size_t i = 0; i < p.size(); ++i) dz[i] += p[i] * (dp[i] - inner);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_dropout_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
}

Vec dropout(ConstSpan x, double rate, bool training, Rng& rng, Vec* mask) {
  check_dropout_rate(rate);
  Vec y(x.begin(), x.end());
  if (!training || rate == 0.0) {
    if (mask) mask->assign(x.size(), 1.0);
    return y;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  if (mask) mask->resize(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double m = rng.uniform() < rate ? 0.0 : keep_scale;
    y[i] *= m;
    if (mask) (*mask)[i] = m;
  }
  return y;
}

void axpy(double a, ConstSpan x, MutSpan y) {
  if (x.size() != y.size()) throw DimensionError("axpy: shape mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

double dot(ConstSpan a, ConstSpan b) {
  if (a.size() != b.size()) throw DimensionError("dot: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool all_finite(ConstSpan v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace crowdlstm
