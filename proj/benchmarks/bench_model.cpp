#include <benchmark/benchmark.h>

#include "crowdlstm/model.hpp"
#include "crowdlstm/synthetic.hpp"

using namespace crowdlstm;

namespace {

// The most crowded window of a small synthetic scene.
SequenceSample busy_window() {
  SyntheticSceneConfig sc;
  sc.num_frames = 400;
  sc.min_track = 60;
  sc.max_track = 200;
  sc.area = 6.0;
  const auto samples = build_sequences(constant_velocity_scene(sc));
  const SequenceSample* best = &samples.front();
  for (const auto& s : samples) {
    if (s.num_peds() > best->num_peds()) best = &s;
  }
  return *best;
}

void BM_SampleLossAndGradient(benchmark::State& state) {
  const SequenceSample sample = busy_window();
  const Mode mode = state.range(0) == 0 ? Mode::attention : Mode::social;
  Predictor m;
  m.init(1);
  const RunContext ctx{mode, nullptr, "bench"};
  Rng rng(2);
  for (auto _ : state) {
    m.params().zero_grad();
    benchmark::DoNotOptimize(m.sample_loss(sample, ctx, true, &rng, true));
  }
  state.SetLabel(to_string(mode) + ", " + std::to_string(sample.num_peds()) + " pedestrians");
}
BENCHMARK(BM_SampleLossAndGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Rollout(benchmark::State& state) {
  const SequenceSample sample = busy_window();
  Predictor m;
  m.init(1);
  const RunContext ctx{Mode::attention, nullptr, "bench"};
  for (auto _ : state) {
    Rollout r = m.rollout(sample, ctx);
    benchmark::DoNotOptimize(r.predicted.data());
  }
  state.SetLabel(std::to_string(sample.num_peds()) + " pedestrians");
}
BENCHMARK(BM_Rollout)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
