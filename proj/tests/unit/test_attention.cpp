#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "crowdlstm/attention.hpp"
#include "crowdlstm/grad_check.hpp"
#include "oracles.hpp"

using namespace crowdlstm;

namespace {

struct Fixture {
  ParamStore store;
  AttentionNet net;
  explicit Fixture(std::uint64_t seed = 1) : net(AttentionNet::create(store)) {
    store.init_uniform(seed);
  }
};

std::vector<AgentState> random_scene(Rng& rng, std::size_t n) {
  std::vector<AgentState> agents;
  for (std::size_t i = 0; i < n; ++i) {
    agents.push_back({static_cast<std::int64_t>(10 + 3 * i),
                      {rng.uniform(-1.9, 1.9), rng.uniform(-1.9, 1.9)},
                      {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)}});
  }
  return agents;
}

}  // namespace

TEST_CASE("pair feature layout") {
  const AgentState target{1, {1.0, 1.0}, {0.5, -0.5}};
  const AgentState neighbor{2, {2.0, 0.0}, {1.0, 2.0}};
  LocalMap map;
  map.values[LocalMap::offset(1, 1)] = 1.0;
  const auto f = make_pair_feature(target, neighbor, map);
  CHECK(f.size() == 54);
  CHECK(f[0] == 0.5);
  CHECK(f[1] == -0.5);
  CHECK(f[2] == 1.0);
  CHECK(f[3] == -1.0);
  CHECK(f[4] == 1.0);
  CHECK(f[5] == 2.0);
  CHECK(f[6 + LocalMap::offset(1, 1)] == 1.0);
}

TEST_CASE("neighbor-centered maps exclude the neighbor itself") {
  const std::vector<AgentState> scene{{1, {0, 0}, {1, 0}}, {2, {0.5, 0}, {0, 1}}};
  const auto inputs = neighbor_inputs(std::span(scene).subspan(1), scene);
  REQUIRE(inputs.size() == 1);
  CHECK(inputs[0].map.occupancy(2, 1) == 1.0);  // the target at relative (-0.5, 0)
  CHECK(inputs[0].map.occupancy(2, 2) == 0.0);
}

TEST_CASE("embed_pair") {
  Fixture fx;
  PairFeature zero{};
  for (auto& p : fx.store) {
    if (p.name.ends_with(".b")) p.value.fill(0.0);
  }
  const Vec e = fx.net.embed_pair(fx.store, zero);
  CHECK(e.size() == 50);
  CHECK(e == Vec(50, 0.0));

  Fixture a(4), b(4);
  PairFeature f{};
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::sin(static_cast<double>(i));
  CHECK(a.net.embed_pair(a.store, f) == b.net.embed_pair(b.store, f));
  CHECK(a.net.embed_pair(a.store, f).size() == 50);
  CHECK_THROWS_AS(a.net.embed_pair(a.store, Vec(53)), DimensionError);
}

TEST_CASE("score examples") {
  Fixture fx;
  const AgentState target{1, {0, 0}, {1, 0}};
  CHECK(fx.net.score_neighbors(fx.store, target, {}).empty());

  const std::vector<AgentState> one{{2, {0.5, 0.5}, {0, 1}}};
  const auto s1 = fx.net.score_neighbors(fx.store, target, neighbor_inputs(one, one));
  REQUIRE(s1.weights.size() == 1);
  CHECK(s1.weights[0] == 1.0);
  CHECK(s1.neighbor_ids == std::vector<std::int64_t>{2});

  NeighborInput same{{3, {1, 1}, {0, 0}}, {}};
  NeighborInput twin = same;
  twin.state.id = 4;
  const std::vector<NeighborInput> pair{same, twin};
  const auto s2 = fx.net.score_neighbors(fx.store, target, pair);
  CHECK(s2.weights == Vec{0.5, 0.5});
}

TEST_CASE("normalization, permutation equivariance and translation invariance") {
  Fixture fx(9);
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 1 + rng.index(10);
    auto scene = random_scene(rng, k + 1);
    const AgentState target = scene[0];
    const std::span<const AgentState> others(scene.data() + 1, k);
    const auto inputs = neighbor_inputs(others, scene);
    const auto scores = fx.net.score_neighbors(fx.store, target, inputs);
    REQUIRE(scores.weights.size() == k);
    CHECK(std::abs(std::accumulate(scores.weights.begin(), scores.weights.end(), 0.0) - 1.0) <=
          1e-9);
    for (double w : scores.weights) CHECK(w > 0.0);

    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    shuffle(perm, rng);
    std::vector<NeighborInput> permuted;
    for (std::size_t i : perm) permuted.push_back(inputs[i]);
    const auto ps = fx.net.score_neighbors(fx.store, target, permuted);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(ps.weights[i] == scores.weights[perm[i]]);
      CHECK(ps.neighbor_ids[i] == scores.neighbor_ids[perm[i]]);
    }

    const Vec2 shift{rng.uniform(-50, 50), rng.uniform(-50, 50)};
    auto moved = scene;
    for (auto& a : moved) a.pos = a.pos + shift;
    const auto ms = fx.net.score_neighbors(
        fx.store, moved[0], neighbor_inputs(std::span<const AgentState>(moved.data() + 1, k), moved));
    for (std::size_t i = 0; i < k; ++i) CHECK(std::abs(ms.weights[i] - scores.weights[i]) <= 1e-12);
  }
}

TEST_CASE("scores match an explicit recomputation") {
  Fixture fx(12);
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng.index(6);
    auto scene = random_scene(rng, k + 1);
    const auto inputs = neighbor_inputs(std::span<const AgentState>(scene.data() + 1, k), scene);
    const auto scores = fx.net.score_neighbors(fx.store, scene[0], inputs);

    auto p = [&](const char* n) -> const Matrix& { return fx.store.at(n).value; };
    std::vector<Vec> emb;
    for (const auto& in : inputs) {
      const auto f = make_pair_feature(scene[0], in.state, in.map);
      const Vec h = oracle::relu(oracle::matvec(Vec(f.begin(), f.end()), p("attention.embed1.w"),
                                                oracle::row_of(p("attention.embed1.b"))));
      emb.push_back(oracle::relu(
          oracle::matvec(h, p("attention.embed2.w"), oracle::row_of(p("attention.embed2.b")))));
    }
    Vec mean(50, 0.0);
    for (const auto& e : emb) {
      for (std::size_t i = 0; i < 50; ++i) mean[i] += e[i] / static_cast<double>(k);
    }
    Vec logits;
    for (const auto& e : emb) {
      Vec in = e;
      in.insert(in.end(), mean.begin(), mean.end());
      const Vec h = oracle::relu(
          oracle::matvec(in, p("attention.mlp.w"), oracle::row_of(p("attention.mlp.b"))));
      logits.push_back(
          oracle::matvec(h, p("attention.score.w"), oracle::row_of(p("attention.score.b")))[0]);
    }
    const Vec want = oracle::softmax(logits);
    for (std::size_t i = 0; i < k; ++i) CHECK(std::abs(scores.weights[i] - want[i]) <= 1e-12);
  }
}

TEST_CASE("weighted crowd feature") {
  const std::vector<Vec> one{{1.0, 2.0, 3.0}};
  CHECK(weighted_crowd_feature(Vec{1.0}, one) == one[0]);

  const std::vector<Vec> same{{0.5, -1.0}, {0.5, -1.0}, {0.5, -1.0}};
  const Vec u = weighted_crowd_feature(Vec{1.0 / 3, 1.0 / 3, 1.0 / 3}, same);
  CHECK(u[0] == doctest::Approx(0.5));
  CHECK(u[1] == doctest::Approx(-1.0));

  const Vec c = weighted_crowd_feature(Vec{0.25, 0.75}, {{4.0, 0.0}, {0.0, 8.0}});
  CHECK(c == Vec{1.0, 6.0});

  CHECK_THROWS_AS(weighted_crowd_feature(Vec{1.0}, same), DimensionError);
}

TEST_CASE("attention backward passes the gradient check") {
  // Small dims keep every entry checkable.
  ParamStore store;
  AttentionDims dims{kPairFeatureWidth, 7, 5, 6};
  const AttentionNet net = AttentionNet::create(store, dims);
  store.init_uniform(31);
  Rng rng(3);
  auto scene = random_scene(rng, 5);
  const auto inputs = neighbor_inputs(std::span<const AgentState>(scene.data() + 1, 4), scene);
  const Vec cw{0.3, -1.2, 0.8, 2.0};
  std::vector<Vec> ew(4, Vec(dims.embed));
  for (auto& v : ew) {
    for (double& x : v) x = rng.uniform(-1, 1);
  }

  auto loss = [&](ParamStore& s, bool with_grad) {
    AttentionCache cache;
    const auto scores = net.score_neighbors(s, scene[0], inputs, &cache);
    const auto emb = AttentionNet::embeddings_in_caller_order(cache);
    double l = dot(scores.weights, cw);
    for (std::size_t j = 0; j < emb.size(); ++j) l += dot(emb[j], ew[j]);
    if (with_grad) net.backward(s, cache, cw, &ew);
    return l;
  };
  // Entries whose true gradient is zero come back as roundoff near 1e-11.
  const auto r = grad_check(loss, store, {.tolerance = 1e-6, .denominator_floor = 1e-5});
  INFO("worst ", r.worst_param, "[", r.worst_index, "] analytic ", r.worst_analytic, " numeric ",
       r.worst_numeric);
  CHECK(r.entries_checked == store.total_values());
  CHECK(r.max_relative_error < 1e-6);
}
