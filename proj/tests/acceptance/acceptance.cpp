// Acceptance suite. Each criterion prints one PASS/FAIL line; the exit code
// is non-zero when any selected criterion fails.
//
//   crowdlstm_acceptance            run criteria 1-5 and 7
//   crowdlstm_acceptance 2 3        run a subset

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "crowdlstm/grad_check.hpp"
#include "crowdlstm/local_map.hpp"
#include "crowdlstm/metrics.hpp"
#include "crowdlstm/trainer.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

using namespace crowdlstm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failures with a short description of the first few.
class Tally {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    if (failures_++ < 5) notes_ << (notes_.tellp() > 0 ? "; " : "") << what;
  }
  bool ok() const { return failures_ == 0; }
  std::string summary() const {
    std::ostringstream os;
    os << checks_ << " checks";
    if (failures_) os << ", " << failures_ << " failed: " << notes_.str();
    return os.str();
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failures_ = 0;
  std::ostringstream notes_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::vector<AgentState> random_scene(Rng& rng, std::size_t n, double spread) {
  std::vector<AgentState> agents;
  for (std::size_t i = 0; i < n; ++i) {
    agents.push_back({static_cast<std::int64_t>(100 + 7 * i),
                      {rng.uniform(-spread, spread), rng.uniform(-spread, spread)},
                      {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)}});
  }
  return agents;
}

// ---------------------------------------------------------------- 1

Outcome gradient_integrity() {
  constexpr double kTolerance = 1e-4;
  const GradCheckOptions layer_opts{.step = 1e-5, .tolerance = kTolerance,
                                    .max_entries_per_param = 200, .seed = 1};
  std::vector<std::pair<std::string, GradCheckResult>> results;
  Rng rng(2024);

  {
    // Linear + relu + softmax head.
    ParamStore s;
    s.add("w", 9, 6, 9);
    s.add("b", 1, 6, 9);
    s.init_uniform(3);
    Vec x(9), r(6);
    for (double& v : x) v = rng.uniform(-1, 1);
    for (double& v : r) v = rng.uniform(-1, 1);
    auto loss = [&](ParamStore& st, bool g) {
      const Vec z = relu(linear_forward(x, st.at("w").value, st.at("b").value.values()));
      const Vec p = softmax(z);
      if (g) {
        Vec dz(6, 0.0), dpre(6, 0.0);
        softmax_backward(p, r, dz);
        relu_backward(z, dz, dpre);
        linear_backward(x, st.at("w").value, dpre, st.at("w").grad, st.at("b").grad.values(), {});
      }
      return dot(p, r);
    };
    results.emplace_back("linear/relu/softmax", grad_check(loss, s, layer_opts));
  }
  {
    // LSTM cell at full width, unrolled over five steps.
    ParamStore s;
    s.add("wx", 192, 512, 128);
    s.add("wh", 128, 512, 128);
    s.add("b", 1, 512, 128);
    s.init_uniform(4);
    std::vector<Vec> xs(5, Vec(192));
    for (auto& x : xs) {
      for (double& v : x) v = rng.uniform(-1, 1);
    }
    Vec r(128);
    for (double& v : r) v = rng.uniform(-1, 1);
    auto loss = [&](ParamStore& st, bool g) {
      const LstmWeights w{st.at("wx").value, st.at("wh").value, st.at("b").value};
      std::vector<LstmCache> caches(xs.size());
      LstmState state = LstmState::zeros(128);
      for (std::size_t t = 0; t < xs.size(); ++t) state = lstm_cell(xs[t], state, w, &caches[t]);
      const double l = dot(state.hidden, r) + 0.5 * dot(state.cell, state.cell);
      if (g) {
        LstmGrads lg{st.at("wx").grad, st.at("wh").grad, st.at("b").grad};
        Vec dh = r, dc = state.cell;
        for (std::size_t t = xs.size(); t-- > 0;) {
          Vec dx(192, 0.0), dhp(128, 0.0), dcp(128, 0.0);
          lstm_cell_backward(caches[t], dh, dc, w, lg, dx, dhp, dcp);
          dh = std::move(dhp);
          dc = std::move(dcp);
        }
      }
      return l;
    };
    results.emplace_back("lstm", grad_check(loss, s, layer_opts));
  }
  {
    ParamStore s;
    const AttentionNet net = AttentionNet::create(s);
    s.init_uniform(5);
    const auto scene = random_scene(rng, 5, 1.8);
    const auto inputs = neighbor_inputs(std::span<const AgentState>(scene).subspan(1), scene);
    Vec cw(4);
    for (double& v : cw) v = rng.uniform(-2, 2);
    auto loss = [&](ParamStore& st, bool g) {
      AttentionCache cache;
      const auto scores = net.score_neighbors(st, scene[0], inputs, &cache);
      if (g) net.backward(st, cache, cw);
      return dot(scores.weights, cw);
    };
    results.emplace_back("attention", grad_check(loss, s, layer_opts));
  }
  {
    ParamStore s;
    const SocialPooling pool = SocialPooling::create(s);
    s.init_uniform(6);
    std::vector<Vec> hidden(4, Vec(128));
    for (auto& h : hidden) {
      for (double& v : h) v = rng.uniform(-1, 1);
    }
    std::vector<PoolNeighbor> nbs;
    for (std::int64_t i = 0; i < 4; ++i) {
      nbs.push_back({i, {rng.uniform(-1.9, 1.9), rng.uniform(-1.9, 1.9)}, hidden[i]});
    }
    Vec r(pool.width());
    for (double& v : r) v = rng.uniform(-1, 1);
    auto loss = [&](ParamStore& st, bool g) {
      SocialCache cache;
      const Vec t = pool.build(st, {0, 0}, nbs, &cache);
      if (g) {
        std::vector<Vec> dh(nbs.size());
        pool.backward(st, cache, r, dh);
      }
      return dot(t, r);
    };
    results.emplace_back("social pooling", grad_check(loss, s, layer_opts));
  }
  {
    // Output layer followed by the Gaussian negative log likelihood.
    ParamStore s;
    s.add("w", 128, 5, 128);
    s.add("b", 1, 5, 128);
    s.init_uniform(7);
    Vec h(128);
    for (double& v : h) v = rng.uniform(-1, 1);
    auto loss = [&](ParamStore& st, bool g) {
      const Vec raw = linear_forward(h, st.at("w").value, st.at("b").value.values());
      std::array<double, 5> d{};
      const double l = nll_loss_raw(raw, {0.3, -0.2}, g ? &d : nullptr);
      if (g) linear_backward(h, st.at("w").value, d, st.at("w").grad, st.at("b").grad.values(), {});
      return l;
    };
    results.emplace_back("output/nll", grad_check(loss, s, layer_opts));
  }

  // The composed loss sums 24 likelihood terms (|L| around 50), so central
  // differences at h = 1e-5 carry about eps |L| / h = 1e-9 of roundoff.
  // Gradients below 1e-4 are therefore compared on an absolute 1e-8 scale.
  const SequenceSample pair = scenes::walking_pair();
  const GradCheckOptions model_opts{.step = 1e-5, .tolerance = kTolerance,
                                    .max_entries_per_param = 10, .denominator_floor = 1e-4,
                                    .seed = 2};
  for (auto [mode, input, name] :
       {std::tuple{Mode::attention, AttentionInput::scores, "model attention/scores"},
        std::tuple{Mode::attention, AttentionInput::crowd, "model attention/crowd"},
        std::tuple{Mode::social, AttentionInput::scores, "model social"}}) {
    ModelConfig cfg;
    cfg.dropout = 0.0;
    cfg.attention_input = input;
    Predictor m(cfg);
    m.init(11);
    const RunContext ctx{mode, nullptr, "pair"};
    auto loss = [&](ParamStore&, bool g) { return m.sample_loss(pair, ctx, false, nullptr, g); };
    results.emplace_back(name, grad_check(loss, m.params(), model_opts));
  }

  Outcome out;
  std::ostringstream os;
  for (const auto& [name, r] : results) {
    const bool ok = r.max_relative_error < kTolerance;
    out.pass = out.pass && ok;
    os << name << " " << r.max_relative_error;
    if (r.nonsmooth_skipped > 0) {
      os << " (" << r.nonsmooth_skipped << " of " << r.entries_checked << " entries at relu kinks)";
    }
    if (!ok || std::getenv("CROWDLSTM_VERBOSE")) {
      os << " (worst " << r.worst_param << "[" << r.worst_index << "] analytic " << r.worst_analytic
         << " numeric " << r.worst_numeric << ")";
    }
    os << "; ";
  }
  out.detail = "max relative error: " + os.str();
  return out;
}

// ---------------------------------------------------------------- 2

Outcome oracle_equivalence() {
  constexpr int kInstances = 1000;
  constexpr double kTol = 1e-12;
  Tally tally;
  Rng rng(77);

  // Local maps, with cell indices checked exactly.
  for (int trial = 0; trial < kInstances; ++trial) {
    const auto agents = random_scene(rng, 1 + rng.index(10), 3.0);
    const auto& target = agents[rng.index(agents.size())];
    const auto got = build_local_map(target, agents);
    const auto want = oracle::local_map(target, agents);
    double worst = 0.0;
    for (std::size_t k = 0; k < LocalMap::kSize; ++k) worst = std::max(worst, std::abs(got.values[k] - want[k]));
    tally.expect(worst <= kTol, "local map diff " + fmt(worst));
    for (const auto& a : agents) {
      const Vec2 rel = a.pos - target.pos;
      const auto cell = local_map_cell(rel);
      const bool inside = rel.x >= -2.0 && rel.x < 2.0 && rel.y >= -2.0 && rel.y < 2.0;
      tally.expect(cell.has_value() == inside, "local map cell range");
      if (cell && inside) {
        tally.expect(cell->col == static_cast<int>(std::floor(rel.x + 2.0)) &&
                         cell->row == static_cast<int>(std::floor(rel.y + 2.0)),
                     "local map cell index");
      }
    }
  }

  // Social tensors, with fine-cell indices checked exactly.
  {
    ParamStore store;
    const SocialPooling pool = SocialPooling::create(store);
    store.init_uniform(8);
    for (double& b : store.at("social.proj.b").value.values()) b = std::abs(b);
    const Matrix& w = store.at("social.proj.w").value;
    const Matrix& b = store.at("social.proj.b").value;
    for (int trial = 0; trial < kInstances; ++trial) {
      std::vector<oracle::PoolingNeighbor> ns;
      const std::size_t n = rng.index(9);
      for (std::size_t i = 0; i < n; ++i) {
        Vec h(128);
        for (double& v : h) v = rng.uniform(-1, 1);
        ns.push_back({static_cast<std::int64_t>(rng.index(500)),
                      {rng.uniform(-2.6, 2.6), rng.uniform(-2.6, 2.6)}, std::move(h)});
      }
      const Vec2 target{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
      std::vector<PoolNeighbor> views;
      for (const auto& x : ns) views.push_back({x.id, x.pos, x.hidden});
      const Vec got = pool.build(store, target, views);
      const Vec want = oracle::social_tensor(target, ns, w, b);
      double worst = 0.0;
      for (std::size_t k = 0; k < got.size(); ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
      tally.expect(worst <= kTol, "social tensor diff " + fmt(worst));
      for (const auto& x : ns) {
        const Vec2 rel = x.pos - target;
        const auto cell = pool_cell_index(target, x.pos);
        const bool inside = rel.x >= -2.0 && rel.x < 2.0 && rel.y >= -2.0 && rel.y < 2.0;
        tally.expect(cell.has_value() == inside, "pool cell range");
        if (cell && inside) {
          tally.expect(cell->col == static_cast<int>(std::floor((rel.x + 2.0) * 8.0)) &&
                           cell->row == static_cast<int>(std::floor((rel.y + 2.0) * 8.0)),
                       "pool cell index");
        }
      }
    }
  }

  // Attention softmax scores.
  {
    ParamStore store;
    const AttentionNet net = AttentionNet::create(store);
    store.init_uniform(9);
    for (int trial = 0; trial < kInstances; ++trial) {
      const std::size_t k = 1 + rng.index(10);
      const auto scene = random_scene(rng, k + 1, 1.9);
      const std::vector<AgentState> nbs(scene.begin() + 1, scene.end());
      const auto got = net.score_neighbors(store, scene[0], neighbor_inputs(nbs, scene));
      const Vec want = oracle::attention_scores(store, scene[0], nbs, scene);
      double worst = 0.0;
      for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, std::abs(got.weights[i] - want[i]));
      tally.expect(worst <= kTol, "attention score diff " + fmt(worst));
    }
  }

  // ADE and FDE.
  for (int trial = 0; trial < kInstances; ++trial) {
    std::vector<Vec2> p(12), g(12);
    for (std::size_t k = 0; k < 12; ++k) {
      p[k] = {rng.uniform(-20, 20), rng.uniform(-20, 20)};
      g[k] = {rng.uniform(-20, 20), rng.uniform(-20, 20)};
    }
    tally.expect(std::abs(ade(p, g) - oracle::ade(p, g)) <= kTol, "ade");
    tally.expect(std::abs(fde(p, g) - oracle::fde(p, g)) <= kTol, "fde");
  }
  return {tally.ok(), tally.summary()};
}

// ---------------------------------------------------------------- 3

Outcome attention_invariants() {
  Tally tally;
  ParamStore store;
  const AttentionNet net = AttentionNet::create(store);
  store.init_uniform(10);
  Rng rng(31);
  double worst_sum = 0.0, worst_shift = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + rng.index(10);
    const auto scene = random_scene(rng, k + 1, 1.9);
    const std::span<const AgentState> others = std::span(scene).subspan(1);
    const auto inputs = neighbor_inputs(others, scene);
    const auto s = net.score_neighbors(store, scene[0], inputs);

    const double sum = std::accumulate(s.weights.begin(), s.weights.end(), 0.0);
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    tally.expect(std::abs(sum - 1.0) <= 1e-9, "normalization");

    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    shuffle(perm, rng);
    std::vector<NeighborInput> permuted;
    for (std::size_t i : perm) permuted.push_back(inputs[i]);
    const auto ps = net.score_neighbors(store, scene[0], permuted);
    for (std::size_t i = 0; i < k; ++i) {
      tally.expect(ps.weights[i] == s.weights[perm[i]] && ps.neighbor_ids[i] == s.neighbor_ids[perm[i]],
                   "permutation");
    }

    const Vec2 shift{rng.uniform(-100, 100), rng.uniform(-100, 100)};
    auto moved = scene;
    for (auto& a : moved) a.pos = a.pos + shift;
    const auto ms = net.score_neighbors(
        store, moved[0], neighbor_inputs(std::span<const AgentState>(moved).subspan(1), moved));
    for (std::size_t i = 0; i < k; ++i) {
      const double d = std::abs(ms.weights[i] - s.weights[i]);
      worst_shift = std::max(worst_shift, d);
      tally.expect(d <= 1e-12, "translation " + fmt(d));
    }
  }
  return {tally.ok(), tally.summary() + "; max |sum-1| " + fmt(worst_sum) + ", max translation diff " +
                          fmt(worst_shift)};
}

// ---------------------------------------------------------------- 4

Outcome learnability() {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig c;  // synthetic constant-velocity scene, default hyperparameters
  c.epochs = 20;
  const PreparedData data = prepare_data(c);
  Predictor m(c.model_config());
  m.init(c.seed);
  const RunContext ctx{c.mode, nullptr, data.name};
  const auto r = train_model(m, data.split, c, ctx);
  apply_checkpoint(r.best, m.params());
  const auto ev = evaluate(m, data.name, data.split.test, ctx);
  const double secs = seconds_since(t0);
  const bool ok = ev.metrics.ade < 0.1 && ev.metrics.fde < 0.2 && secs < 600.0;
  return {ok, "test ADE " + fmt(ev.metrics.ade) + " (< 0.1), FDE " + fmt(ev.metrics.fde) +
                  " (< 0.2), best epoch " + std::to_string(r.best_epoch) + ", " +
                  std::to_string(data.split.train.size()) + " training windows, " + fmt(secs) +
                  " s (< 600)"};
}

// ---------------------------------------------------------------- 5

Outcome strict_superset() {
  Tally tally;
  RunConfig c;
  c.synthetic_frames = 300;
  c.synthetic_min_track = 60;
  c.synthetic_max_track = 200;
  c.synthetic_peds = 30;
  c.synthetic_seed = 4;
  c.epochs = 1;
  const PreparedData data = prepare_data(c);
  std::vector<SequenceSample> probe = data.split.test;
  probe.push_back(scenes::walking_pair());

  std::size_t checkpoints = 0;
  for (AttentionInput input : {AttentionInput::scores, AttentionInput::crowd}) {
    RunConfig ci = c;
    ci.attention_input = input;
    // Freshly initialized checkpoints and a trained one.
    std::vector<Checkpoint> ckpts;
    for (std::uint64_t seed : {0, 1, 2}) {
      Predictor m(ci.model_config());
      m.init(seed);
      ckpts.push_back(make_checkpoint(m.params(), checkpoint_header(ci)));
    }
    {
      Predictor m(ci.model_config());
      m.init(ci.seed);
      ckpts.push_back(train_model(m, data.split, ci, {Mode::attention, nullptr, data.name}).best);
    }
    for (const auto& ck : ckpts) {
      ++checkpoints;
      auto m = model_from_checkpoint(ck);
      m->zero_attention_branch();
      for (const auto& s : probe) {
        const auto a = m->rollout(s, {Mode::attention, nullptr, data.name});
        const auto b = m->rollout(s, {Mode::social, nullptr, data.name});
        tally.expect(a.predicted == b.predicted, "rollouts differ on sample " + std::to_string(s.index));
      }
    }
  }
  return {tally.ok(), std::to_string(checkpoints) + " checkpoints x " + std::to_string(probe.size()) +
                          " samples; " + tally.summary()};
}

// ---------------------------------------------------------------- 7

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  RunConfig c;
  c.synthetic_frames = 2000;
  c.synthetic_min_track = 100;
  c.synthetic_max_track = 300;
  c.epochs = 3;
  c.out_dir = (fs::temp_directory_path() / "crowdlstm_acceptance_determinism").string();
  std::vector<std::pair<std::string, std::string>> runs;
  for (int i = 0; i < 2; ++i) {
    fs::remove_all(c.out_dir);
    train(c);
    runs.emplace_back(slurp(fs::path(c.out_dir) / "loss.csv"),
                      slurp(fs::path(c.out_dir) / "checkpoint.bin"));
  }
  fs::remove_all(c.out_dir);
  const bool csv = runs[0].first == runs[1].first;
  const bool ckpt = runs[0].second == runs[1].second;
  return {csv && ckpt && !runs[0].second.empty(),
          std::string("loss.csv ") + (csv ? "identical" : "DIFFERS") + " (" +
              std::to_string(runs[0].first.size()) + " bytes), checkpoint.bin " +
              (ckpt ? "identical" : "DIFFERS") + " (" + std::to_string(runs[0].second.size()) +
              " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
      {1, {"gradient integrity", gradient_integrity}},
      {2, {"oracle equivalence", oracle_equivalence}},
      {3, {"attention invariants", attention_invariants}},
      {4, {"learnability on synthetic constant-velocity data", learnability}},
      {5, {"strict superset with the attention branch zeroed", strict_superset}},
      {7, {"determinism", determinism}},
  };
  // Runtime limits in seconds; 0 means none.
  const std::map<int, double> limits{{1, 60}, {2, 60}, {3, 0}, {4, 600}, {5, 0}, {7, 0}};

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::stoi(argv[i]));
  if (selected.empty()) {
    for (const auto& [id, _] : criteria) selected.push_back(id);
  }

  bool all = true;
  for (int id : selected) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << id << " (criterion 6 has its own binary)\n";
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    const double limit = limits.at(id);
    if (limit > 0 && secs >= limit) {
      o.pass = false;
      o.detail += "; runtime " + fmt(secs) + " s exceeds " + fmt(limit) + " s";
    }
    all = all && o.pass;
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id,
                it->second.first, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
