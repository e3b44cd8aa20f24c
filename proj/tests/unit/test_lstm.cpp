#include <doctest.h>

#include <cmath>

#include "crowdlstm/grad_check.hpp"
#include "crowdlstm/lstm.hpp"
#include "crowdlstm/param_store.hpp"
#include "oracles.hpp"

using namespace crowdlstm;

namespace {

struct Cell {
  Matrix wx, wh, b;
  LstmWeights weights() const { return {wx, wh, b}; }
};

Cell zero_cell(std::size_t n, std::size_t h) { return {Matrix(n, 4 * h), Matrix(h, 4 * h), Matrix(1, 4 * h)}; }

Cell random_cell(std::size_t n, std::size_t h, Rng& rng) {
  Cell c = zero_cell(n, h);
  for (Matrix* m : {&c.wx, &c.wh, &c.b}) {
    for (double& v : m->values()) v = rng.uniform(-1, 1);
  }
  return c;
}

}  // namespace

TEST_CASE("zero weights with zero cell give a zero state") {
  const Cell c = zero_cell(3, 4);
  const auto s = lstm_cell(Vec{1.0, -2.0, 0.5}, LstmState::zeros(4), c.weights());
  CHECK(s.hidden == Vec(4, 0.0));
  CHECK(s.cell == Vec(4, 0.0));
}

TEST_CASE("zero weights halve the previous cell") {
  const Cell c = zero_cell(2, 1);
  const LstmState prev{Vec{0.0}, Vec{1.0}};
  const auto s = lstm_cell(Vec{0.3, 0.7}, prev, c.weights());
  CHECK(s.cell[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.hidden[0] == doctest::Approx(0.5 * std::tanh(0.5)).epsilon(1e-15));
  CHECK(s.hidden[0] == doctest::Approx(0.2311).epsilon(1e-4));
}

TEST_CASE("random 3-dimensional cell matches the independent oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Cell c = random_cell(3, 3, rng);
    LstmState prev{Vec(3), Vec(3)};
    Vec x(3);
    for (double& v : x) v = rng.uniform(-1, 1);
    for (double& v : prev.hidden) v = rng.uniform(-1, 1);
    for (double& v : prev.cell) v = rng.uniform(-1, 1);
    const auto got = lstm_cell(x, prev, c.weights());
    const auto want = oracle::lstm_step(x, prev, c.wx, c.wh, c.b);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(std::abs(got.hidden[k] - want.hidden[k]) <= 1e-12);
      CHECK(std::abs(got.cell[k] - want.cell[k]) <= 1e-12);
    }
  }
}

TEST_CASE("lstm_cell rejects mismatched shapes") {
  const Cell c = zero_cell(3, 2);
  CHECK_THROWS_AS(lstm_cell(Vec(2), LstmState::zeros(2), c.weights()), DimensionError);
  CHECK_THROWS_AS(lstm_cell(Vec(3), LstmState::zeros(3), c.weights()), DimensionError);
}

TEST_CASE("five unrolled steps pass the gradient check") {
  const std::size_t n = 3, h = 4, steps = 5;
  ParamStore store;
  store.add("wx", n, 4 * h, n);
  store.add("wh", h, 4 * h, h);
  store.add("b", 1, 4 * h, n);
  store.add("wo", h, 1, h);
  store.init_uniform(21);

  Rng rng(4);
  std::vector<Vec> xs(steps, Vec(n));
  for (auto& x : xs) {
    for (double& v : x) v = rng.uniform(-1, 1);
  }
  const Vec targets{0.2, -0.1, 0.4, 0.0, -0.3};

  auto loss = [&](ParamStore& s, bool with_grad) {
    auto& wx = s.at("wx");
    auto& wh = s.at("wh");
    auto& b = s.at("b");
    auto& wo = s.at("wo");
    const LstmWeights w{wx.value, wh.value, b.value};
    std::vector<LstmCache> caches(steps);
    std::vector<LstmState> states;
    LstmState st = LstmState::zeros(h);
    double l = 0.0;
    std::vector<double> dys(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      st = lstm_cell(xs[t], st, w, &caches[t]);
      states.push_back(st);
      const double y = dot(st.hidden, wo.value.values());
      l += 0.5 * (y - targets[t]) * (y - targets[t]);
      dys[t] = y - targets[t];
    }
    if (with_grad) {
      Vec dh(h, 0.0), dc(h, 0.0);
      for (std::size_t t = steps; t-- > 0;) {
        for (std::size_t k = 0; k < h; ++k) {
          dh[k] += dys[t] * wo.value(k, 0);
          wo.grad(k, 0) += dys[t] * states[t].hidden[k];
        }
        Vec dh_prev(h, 0.0), dc_prev(h, 0.0), dx(n, 0.0);
        lstm_cell_backward(caches[t], dh, dc, w, {wx.grad, wh.grad, b.grad}, dx, dh_prev, dc_prev);
        dh = dh_prev;
        dc = dc_prev;
      }
    }
    return l;
  };
  const auto r = grad_check(loss, store, {.tolerance = 1e-5});
  CHECK(r.entries_checked == store.total_values());
  CHECK(r.max_relative_error < 1e-5);
}

TEST_CASE("input and state gradients match finite differences") {
  Rng rng(8);
  const Cell c = random_cell(2, 3, rng);
  const Vec x{0.4, -0.9};
  const LstmState prev{Vec{0.1, -0.2, 0.3}, Vec{0.5, 0.0, -0.5}};
  const Vec wh{0.7, -0.3, 1.1}, wc{0.2, 0.4, -0.6};

  auto objective = [&](const Vec& xi, const LstmState& s) {
    const auto out = lstm_cell(xi, s, c.weights());
    return dot(out.hidden, wh) + dot(out.cell, wc);
  };

  LstmCache cache;
  lstm_cell(x, prev, c.weights(), &cache);
  Matrix gx(2, 12), gh(3, 12), gb(1, 12);
  Vec dx(2, 0.0), dhp(3, 0.0), dcp(3, 0.0);
  lstm_cell_backward(cache, wh, wc, c.weights(), {gx, gh, gb}, dx, dhp, dcp);

  const double e = 1e-6;
  for (std::size_t i = 0; i < 2; ++i) {
    Vec xp = x, xm = x;
    xp[i] += e;
    xm[i] -= e;
    CHECK(dx[i] == doctest::Approx((objective(xp, prev) - objective(xm, prev)) / (2 * e)).epsilon(1e-7));
  }
  for (std::size_t k = 0; k < 3; ++k) {
    LstmState p = prev, m = prev;
    p.hidden[k] += e;
    m.hidden[k] -= e;
    CHECK(dhp[k] == doctest::Approx((objective(x, p) - objective(x, m)) / (2 * e)).epsilon(1e-7));
    p = prev;
    m = prev;
    p.cell[k] += e;
    m.cell[k] -= e;
    CHECK(dcp[k] == doctest::Approx((objective(x, p) - objective(x, m)) / (2 * e)).epsilon(1e-7));
  }
}
