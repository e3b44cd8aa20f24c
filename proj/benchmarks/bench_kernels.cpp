#include <benchmark/benchmark.h>

#include <vector>

#include "crowdlstm/attention.hpp"
#include "crowdlstm/local_map.hpp"
#include "crowdlstm/lstm.hpp"
#include "crowdlstm/param_store.hpp"
#include "crowdlstm/social_pooling.hpp"

using namespace crowdlstm;

namespace {

// `n` agents scattered over a 3 x 3 m patch around the origin.
std::vector<AgentState> crowd(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<AgentState> agents;
  for (std::size_t i = 0; i < n; ++i) {
    agents.push_back({static_cast<std::int64_t>(i + 1),
                      {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)},
                      {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}});
  }
  return agents;
}

Vec random_vec(std::size_t n, Rng& rng) {
  Vec v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void BM_LstmCellForward(benchmark::State& state) {
  ParamStore s;
  s.add("wx", 192, 512, 192);
  s.add("wh", 128, 512, 128);
  s.add("b", 1, 512, 128);
  s.init_uniform(1);
  const LstmWeights w{s.at("wx").value, s.at("wh").value, s.at("b").value};
  Rng rng(2);
  const Vec x = random_vec(192, rng);
  LstmState st{random_vec(128, rng), random_vec(128, rng)};
  for (auto _ : state) {
    LstmState next = lstm_cell(x, st, w);
    benchmark::DoNotOptimize(next.hidden.data());
  }
}
BENCHMARK(BM_LstmCellForward);

void BM_LstmCellBackward(benchmark::State& state) {
  ParamStore s;
  s.add("wx", 192, 512, 192);
  s.add("wh", 128, 512, 128);
  s.add("b", 1, 512, 128);
  s.init_uniform(1);
  const LstmWeights w{s.at("wx").value, s.at("wh").value, s.at("b").value};
  Rng rng(2);
  const Vec x = random_vec(192, rng);
  const LstmState st{random_vec(128, rng), random_vec(128, rng)};
  LstmCache cache;
  lstm_cell(x, st, w, &cache);
  const Vec dh = random_vec(128, rng);
  const Vec dc = random_vec(128, rng);
  Vec dx(192), dh_prev(128), dc_prev(128);
  for (auto _ : state) {
    lstm_cell_backward(cache, dh, dc, w, {s.at("wx").grad, s.at("wh").grad, s.at("b").grad}, dx,
                       dh_prev, dc_prev);
    benchmark::DoNotOptimize(dx.data());
  }
}
BENCHMARK(BM_LstmCellBackward);

void BM_LocalMap(benchmark::State& state) {
  const auto agents = crowd(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) {
    LocalMap m = build_local_map(agents[0], agents);
    benchmark::DoNotOptimize(m.values.data());
  }
}
BENCHMARK(BM_LocalMap)->Arg(4)->Arg(16)->Arg(64);

void BM_SocialTensor(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ParamStore s;
  const SocialPooling pooling = SocialPooling::create(s);
  s.init_uniform(4);
  const auto agents = crowd(n + 1, 5);
  Rng rng(6);
  std::vector<Vec> hidden;
  for (std::size_t i = 0; i < n; ++i) hidden.push_back(random_vec(128, rng));
  std::vector<PoolNeighbor> pool;
  for (std::size_t i = 0; i < n; ++i) pool.push_back({agents[i + 1].id, agents[i + 1].pos, hidden[i]});
  for (auto _ : state) {
    Vec t = pooling.build(s, agents[0].pos, pool);
    benchmark::DoNotOptimize(t.data());
  }
}
BENCHMARK(BM_SocialTensor)->Arg(4)->Arg(16)->Arg(64);

void BM_AttentionScores(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ParamStore s;
  const AttentionNet net = AttentionNet::create(s);
  s.init_uniform(7);
  const auto agents = crowd(n + 1, 8);
  const std::vector<AgentState> neighbors(agents.begin() + 1, agents.end());
  const auto inputs = neighbor_inputs(neighbors, agents);
  for (auto _ : state) {
    AttentionScores sc = net.score_neighbors(s, agents[0], inputs);
    benchmark::DoNotOptimize(sc.weights.data());
  }
}
BENCHMARK(BM_AttentionScores)->Arg(1)->Arg(4)->Arg(16);

}  // namespace
