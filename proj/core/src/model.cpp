#include "crowdlstm/model.hpp"

#include <cmath>
#include <numbers>

namespace crowdlstm {

std::string to_string(Mode m) { return m == Mode::attention ? "attention" : "social"; }

Mode parse_mode(const std::string& s) {
  if (s == "attention") return Mode::attention;
  if (s == "social" || s == "social-only") return Mode::social;
  throw ConfigError("unknown mode '" + s + "' (expected attention or social)");
}

std::string to_string(AttentionInput a) { return a == AttentionInput::scores ? "scores" : "crowd"; }

AttentionInput parse_attention_input(const std::string& s) {
  if (s == "scores") return AttentionInput::scores;
  if (s == "crowd") return AttentionInput::crowd;
  throw ConfigError("unknown attention input '" + s + "' (expected scores or crowd)");
}

GaussianParams transform_outputs(std::span<const double> raw) {
  if (raw.size() != 5) throw DimensionError("transform_outputs: expected 5 raw outputs");
  GaussianParams g;
  g.mux = raw[0];
  g.muy = raw[1];
  g.sx = std::max(std::exp(raw[2]), kSigmaFloor);
  g.sy = std::max(std::exp(raw[3]), kSigmaFloor);
  g.rho = kRhoLimit * std::tanh(raw[4]);
  return g;
}

double nll_loss(const GaussianParams& g, Vec2 target) {
  const double zx = (target.x - g.mux) / g.sx;
  const double zy = (target.y - g.muy) / g.sy;
  const double q = 1.0 - g.rho * g.rho;
  const double z = zx * zx + zy * zy - 2.0 * g.rho * zx * zy;
  return std::log(2.0 * std::numbers::pi) + std::log(g.sx) + std::log(g.sy) + 0.5 * std::log(q) +
         z / (2.0 * q);
}

double nll_loss_raw(std::span<const double> raw, Vec2 target, std::array<double, 5>* d_raw) {
  const GaussianParams g = transform_outputs(raw);
  const double loss = nll_loss(g, target);
  if (d_raw) {
    const double zx = (target.x - g.mux) / g.sx;
    const double zy = (target.y - g.muy) / g.sy;
    const double rho = g.rho;
    const double q = 1.0 - rho * rho;
    const double z = zx * zx + zy * zy - 2.0 * rho * zx * zy;
    const double ax = (zx - rho * zy) / q;
    const double ay = (zy - rho * zx) / q;
    auto& d = *d_raw;
    d[0] = -ax / g.sx;
    d[1] = -ay / g.sy;
    // d/draw of sigma = sigma while above the floor.
    d[2] = std::exp(raw[2]) > kSigmaFloor ? 1.0 - zx * ax : 0.0;
    d[3] = std::exp(raw[3]) > kSigmaFloor ? 1.0 - zy * ay : 0.0;
    const double d_rho = -rho / q - zx * zy / q + z * rho / (q * q);
    const double th = std::tanh(raw[4]);
    d[4] = d_rho * kRhoLimit * (1.0 - th * th);
  }
  return loss;
}

std::vector<std::size_t> attention_neighbors(const std::vector<AgentState>& agents,
                                             std::size_t target) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < agents.size(); ++j) {
    if (j == target) continue;
    if (local_map_cell(agents[j].pos - agents[target].pos)) out.push_back(j);
  }
  return out;
}

struct Predictor::StepCache {
  Vec pos_in;
  Vec pos_act;
  Vec pos_mask;

  AttentionScores scores;
  AttentionCache att_cache;
  bool att_from_net = false;
  std::vector<Vec> att_units;   // scores input, one per neighbor
  Vec crowd_in;                 // crowd input
  Vec crowd_act;
  std::vector<Vec> embeddings;  // crowd input, caller order
  Vec att_mask;

  SocialCache soc_cache;
  std::vector<std::size_t> soc_peds;  // pool-neighbor index -> pedestrian index
  Vec social;
  Vec soc_act;
  Vec soc_mask;

  LstmCache lstm;
  Vec hidden;
  bool has_loss = false;
  std::array<double, 5> d_raw{};
};

struct Predictor::FrameResult {
  std::vector<StepOutput> outputs;
};

Predictor::Predictor(const ModelConfig& config) : config_(config) {
  check_dropout_rate(config_.dropout);
  const std::size_t e = config_.embed;
  const std::size_t h = config_.hidden;
  attention_ = AttentionNet::create(store_, config_.attention);
  pooling_ = SocialPooling::create(store_, h, e, config_.pooling);
  pos_w_ = store_.add("embed.pos.w", 2, e, 2);
  pos_b_ = store_.add("embed.pos.b", 1, e, 2);
  att_w_ = store_.add("embed.attention.w", 1, e, 1);
  att_b_ = store_.add("embed.attention.b", 1, e, 1);
  if (config_.attention_input == AttentionInput::crowd) {
    const std::size_t w = config_.attention.embed;
    crowd_w_ = store_.add("embed.crowd.w", w, e, w);
    crowd_b_ = store_.add("embed.crowd.b", 1, e, w);
  }
  const std::size_t social_width = pooling_.width();
  soc_w_ = store_.add("embed.social.w", social_width, e, social_width);
  soc_b_ = store_.add("embed.social.b", 1, e, social_width);
  lstm_wx_ = store_.add("lstm.wx", config_.lstm_input(), 4 * h, h);
  lstm_wh_ = store_.add("lstm.wh", h, 4 * h, h);
  lstm_b_ = store_.add("lstm.b", 1, 4 * h, h);
  out_w_ = store_.add("output.w", h, 5, h);
  out_b_ = store_.add("output.b", 1, 5, h);
}

void Predictor::zero_attention_branch() {
  for (auto& p : store_) {
    if (p.name.starts_with("attention.") || p.name.starts_with("embed.attention.") ||
        p.name.starts_with("embed.crowd.")) {
      p.value.fill(0.0);
    }
  }
}

Vec Predictor::attention_feature(const AttentionScores& scores, const AttentionCache* att_cache,
                                 StepCache* cache) const {
  const std::size_t e = config_.embed;
  Vec feature(e, 0.0);
  if (scores.empty()) return feature;

  if (config_.attention_input == AttentionInput::scores) {
    for (double alpha : scores.weights) {
      const double in[1] = {alpha};
      Vec unit = linear_forward(in, store_[att_w_].value, store_[att_b_].value.values());
      relu_inplace(unit);
      axpy(1.0, unit, feature);
      if (cache) cache->att_units.push_back(std::move(unit));
    }
    return feature;
  }

  if (!att_cache) {
    throw ConfigError("crowd attention input needs network-computed scores, not frozen ones");
  }
  auto embeddings = AttentionNet::embeddings_in_caller_order(*att_cache);
  Vec crowd = weighted_crowd_feature(scores.weights, embeddings);
  feature = linear_forward(crowd, store_[*crowd_w_].value, store_[*crowd_b_].value.values());
  relu_inplace(feature);
  if (cache) {
    cache->crowd_in = std::move(crowd);
    cache->crowd_act = feature;
    cache->embeddings = std::move(embeddings);
  }
  return feature;
}

Vec Predictor::embed_inputs(Vec2 position, const AttentionScores& scores,
                            std::span<const double> social_tensor, Mode mode, bool training,
                            Rng* rng) const {
  if (social_tensor.size() != pooling_.width()) {
    throw DimensionError("embed_inputs: social tensor width " +
                         std::to_string(social_tensor.size()) + ", expected " +
                         std::to_string(pooling_.width()));
  }
  if (config_.attention_input != AttentionInput::scores) {
    throw ConfigError("embed_inputs: only the scores attention input is supported here");
  }
  if (training && !rng) throw ConfigError("embed_inputs: training mode needs an rng");
  Rng unused(0);
  Rng& r = rng ? *rng : unused;
  const double pos[2] = {position.x, position.y};
  Vec pos_act = relu(linear_forward(pos, store_[pos_w_].value, store_[pos_b_].value.values()));
  Vec att = mode == Mode::attention ? attention_feature(scores, nullptr, nullptr)
                                    : Vec(config_.embed, 0.0);
  Vec soc = relu(linear_forward(social_tensor, store_[soc_w_].value, store_[soc_b_].value.values()));
  Vec x = dropout(pos_act, config_.dropout, training, r);
  const Vec a = dropout(att, config_.dropout, training, r);
  const Vec s = dropout(soc, config_.dropout, training, r);
  x.insert(x.end(), a.begin(), a.end());
  x.insert(x.end(), s.begin(), s.end());
  return x;
}

StepOutput Predictor::step(const LstmState& state, std::span<const double> embedded) const {
  const LstmWeights w{store_[lstm_wx_].value, store_[lstm_wh_].value, store_[lstm_b_].value};
  StepOutput out;
  out.state = lstm_cell(embedded, state, w);
  const Vec raw = linear_forward(out.state.hidden, store_[out_w_].value, store_[out_b_].value.values());
  if (!all_finite(raw)) throw NumericError("step: non-finite output");
  std::copy(raw.begin(), raw.end(), out.raw.begin());
  out.gaussian = transform_outputs(raw);
  return out;
}

Predictor::FrameResult Predictor::forward_frame(const SequenceSample& sample, std::size_t t,
                                                const std::vector<AgentState>& agents,
                                                const std::vector<Vec2>& origins,
                                                const std::vector<LstmState>& prev,
                                                const RunContext& ctx, bool training, Rng* rng,
                                                std::vector<StepCache>* caches,
                                                const SocialObserver* observer) const {
  const std::size_t n = agents.size();
  const std::size_t e = config_.embed;
  if (training && !rng) throw ConfigError("training forward pass needs an rng");
  Rng unused(0);
  Rng& r = rng ? *rng : unused;
  const bool use_net = ctx.mode == Mode::attention && ctx.frozen == nullptr;

  std::vector<LocalMap> maps;
  if (use_net) {
    maps.reserve(n);
    for (const auto& a : agents) maps.push_back(build_local_map(a, agents));
  }
  if (caches) caches->assign(n, StepCache{});

  const LstmWeights lw{store_[lstm_wx_].value, store_[lstm_wh_].value, store_[lstm_b_].value};
  FrameResult result;
  result.outputs.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    StepCache* c = caches ? &(*caches)[i] : nullptr;

    const Vec2 rel = agents[i].pos - origins[i];
    const Vec pos_in = {rel.x, rel.y};
    Vec pos_act = linear_forward(pos_in, store_[pos_w_].value, store_[pos_b_].value.values());
    relu_inplace(pos_act);

    Vec att(e, 0.0);
    AttentionScores scores;
    scores.target_id = agents[i].id;
    if (ctx.mode == Mode::attention) {
      const auto nb = attention_neighbors(agents, i);
      if (!nb.empty()) {
        if (use_net) {
          std::vector<NeighborInput> inputs;
          inputs.reserve(nb.size());
          for (std::size_t j : nb) inputs.push_back({agents[j], maps[j]});
          AttentionCache local_att;
          AttentionCache& ac = c ? c->att_cache : local_att;
          scores = attention_.score_neighbors(store_, agents[i], inputs, &ac);
          if (c) c->att_from_net = true;
          att = attention_feature(scores, &ac, c);
        } else {
          std::vector<std::int64_t> ids;
          ids.reserve(nb.size());
          for (std::size_t j : nb) ids.push_back(agents[j].id);
          scores = ctx.frozen->lookup(ctx.dataset, sample.frames[t], agents[i].id, ids);
          att = attention_feature(scores, nullptr, c);
        }
      }
    }

    std::vector<PoolNeighbor> pool;
    std::vector<std::size_t> pool_peds;
    pool.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      pool.push_back({agents[j].id, agents[j].pos, prev[j].hidden});
      pool_peds.push_back(j);
    }
    SocialCache local_soc;
    Vec social = pooling_.build(store_, agents[i].pos, pool, c ? &c->soc_cache : &local_soc);
    if (observer && *observer) (*observer)(t, i, social);
    Vec soc_act = linear_forward(social, store_[soc_w_].value, store_[soc_b_].value.values());
    relu_inplace(soc_act);

    Vec pos_mask, att_mask, soc_mask;
    Vec x = dropout(pos_act, config_.dropout, training, r, &pos_mask);
    const Vec att_d = dropout(att, config_.dropout, training, r, &att_mask);
    const Vec soc_d = dropout(soc_act, config_.dropout, training, r, &soc_mask);
    x.insert(x.end(), att_d.begin(), att_d.end());
    x.insert(x.end(), soc_d.begin(), soc_d.end());

    StepOutput& out = result.outputs[i];
    out.state = lstm_cell(x, prev[i], lw, c ? &c->lstm : nullptr);
    const Vec raw =
        linear_forward(out.state.hidden, store_[out_w_].value, store_[out_b_].value.values());
    if (!all_finite(raw)) {
      throw NumericError("non-finite model output at frame " + std::to_string(sample.frames[t]) +
                         " for pedestrian " + std::to_string(agents[i].id));
    }
    std::copy(raw.begin(), raw.end(), out.raw.begin());
    out.gaussian = transform_outputs(raw);

    if (c) {
      c->pos_in = pos_in;
      c->pos_act = std::move(pos_act);
      c->pos_mask = std::move(pos_mask);
      c->scores = std::move(scores);
      c->att_mask = std::move(att_mask);
      c->soc_peds = std::move(pool_peds);
      c->social = std::move(social);
      c->soc_act = std::move(soc_act);
      c->soc_mask = std::move(soc_mask);
      c->hidden = out.state.hidden;
    }
  }
  return result;
}

void Predictor::backward_frame(std::vector<StepCache>& caches, std::vector<Vec>& d_hidden,
                               std::vector<Vec>& d_cell, std::vector<Vec>& d_hidden_prev,
                               std::vector<Vec>& d_cell_prev, const RunContext& ctx) {
  const std::size_t e = config_.embed;
  const LstmWeights lw{store_[lstm_wx_].value, store_[lstm_wh_].value, store_[lstm_b_].value};
  LstmGrads lg{store_[lstm_wx_].grad, store_[lstm_wh_].grad, store_[lstm_b_].grad};

  for (std::size_t i = 0; i < caches.size(); ++i) {
    StepCache& c = caches[i];
    Vec dh = d_hidden[i];
    if (c.has_loss) {
      linear_backward(c.hidden, store_[out_w_].value, c.d_raw, store_[out_w_].grad,
                      store_[out_b_].grad.values(), dh);
    }

    Vec dx(config_.lstm_input(), 0.0);
    lstm_cell_backward(c.lstm, dh, d_cell[i], lw, lg, dx, d_hidden_prev[i], d_cell_prev[i]);

    // Position block.
    {
      Vec d(e), dz(e, 0.0);
      for (std::size_t k = 0; k < e; ++k) d[k] = dx[k] * c.pos_mask[k];
      relu_backward(c.pos_act, d, dz);
      linear_backward(c.pos_in, store_[pos_w_].value, dz, store_[pos_w_].grad,
                      store_[pos_b_].grad.values(), {});
    }

    // Attention block.
    if (ctx.mode == Mode::attention && !c.scores.empty()) {
      Vec d(e);
      for (std::size_t k = 0; k < e; ++k) d[k] = dx[e + k] * c.att_mask[k];
      const std::size_t m = c.scores.weights.size();
      Vec d_alpha(m, 0.0);
      std::vector<Vec> d_emb;
      if (config_.attention_input == AttentionInput::scores) {
        for (std::size_t j = 0; j < m; ++j) {
          Vec dz(e, 0.0);
          relu_backward(c.att_units[j], d, dz);
          const double in[1] = {c.scores.weights[j]};
          linear_backward(in, store_[att_w_].value, dz, store_[att_w_].grad,
                          store_[att_b_].grad.values(), MutSpan(&d_alpha[j], 1));
        }
      } else {
        Vec dz(e, 0.0);
        relu_backward(c.crowd_act, d, dz);
        Vec d_crowd(c.crowd_in.size(), 0.0);
        linear_backward(c.crowd_in, store_[*crowd_w_].value, dz, store_[*crowd_w_].grad,
                        store_[*crowd_b_].grad.values(), d_crowd);
        d_emb.resize(m);
        for (std::size_t j = 0; j < m; ++j) {
          d_alpha[j] = dot(d_crowd, c.embeddings[j]);
          d_emb[j] = d_crowd;
          for (double& v : d_emb[j]) v *= c.scores.weights[j];
        }
      }
      if (c.att_from_net) {
        attention_.backward(store_, c.att_cache, d_alpha, d_emb.empty() ? nullptr : &d_emb);
      }
    }

    // Social block.
    {
      Vec d(e), dz(e, 0.0);
      for (std::size_t k = 0; k < e; ++k) d[k] = dx[2 * e + k] * c.soc_mask[k];
      relu_backward(c.soc_act, d, dz);
      linear_backward(c.social, store_[soc_w_].value, dz, store_[soc_w_].grad,
                      store_[soc_b_].grad.values(), {});
      if (!c.soc_cache.slot.empty()) {
        // Only occupied cells lead back to neighbor hidden states.
        Vec d_social(c.social.size(), 0.0);
        const Matrix& w = store_[soc_w_].value;
        for (std::size_t slot : c.soc_cache.slot) {
          for (std::size_t r = slot; r < slot + e; ++r) {
            if (d_social[r] == 0.0) d_social[r] = dot(w.row(r), dz);
          }
        }
        std::vector<Vec> d_nb(c.soc_peds.size());
        pooling_.backward(store_, c.soc_cache, d_social, d_nb);
        for (std::size_t k = 0; k < d_nb.size(); ++k) {
          if (!d_nb[k].empty()) axpy(1.0, d_nb[k], d_hidden_prev[c.soc_peds[k]]);
        }
      }
    }
  }
}

namespace {

std::vector<AgentState> agents_at(const SequenceSample& s, std::size_t t,
                                  const std::vector<std::vector<Vec2>>& pos,
                                  const std::vector<std::vector<Vec2>>& vel) {
  std::vector<AgentState> agents(s.num_peds());
  for (std::size_t p = 0; p < s.num_peds(); ++p) {
    agents[p] = {s.ped_ids[p], pos[p][t], vel[p][t]};
  }
  return agents;
}

void check_sample(const SequenceSample& s) {
  if (s.num_peds() == 0) throw ConfigError("sample has no pedestrians");
  if (s.frames.size() != SequenceSample::kLength || s.positions.size() != s.num_peds() ||
      s.velocities.size() != s.num_peds()) {
    throw DimensionError("malformed sample");
  }
}

}  // namespace

double Predictor::sample_loss(const SequenceSample& sample, const RunContext& ctx, bool training,
                              Rng* rng, bool with_grad) {
  check_sample(sample);
  const std::size_t n = sample.num_peds();
  const std::size_t steps = sample.frames.size() - 1;
  const std::size_t first_loss_step = SequenceSample::kObserved - 1;
  const std::size_t h = config_.hidden;

  std::vector<Vec2> origins(n);
  for (std::size_t p = 0; p < n; ++p) origins[p] = sample.positions[p][0];

  std::vector<LstmState> states(n, LstmState::zeros(h));
  std::vector<std::vector<StepCache>> caches(with_grad ? steps : 0);
  double loss = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    const auto agents = agents_at(sample, t, sample.positions, sample.velocities);
    auto frame = forward_frame(sample, t, agents, origins, states, ctx, training, rng,
                               with_grad ? &caches[t] : nullptr);
    for (std::size_t p = 0; p < n; ++p) {
      if (t >= first_loss_step) {
        const Vec2 target = sample.positions[p][t + 1] - sample.positions[p][t];
        std::array<double, 5>* d = with_grad ? &caches[t][p].d_raw : nullptr;
        loss += nll_loss_raw(frame.outputs[p].raw, target, d);
        if (with_grad) caches[t][p].has_loss = true;
      }
      states[p] = std::move(frame.outputs[p].state);
    }
  }
  if (!std::isfinite(loss)) throw NumericError("non-finite loss on sample " + std::to_string(sample.index));

  if (with_grad) {
    std::vector<Vec> d_hidden(n, Vec(h, 0.0)), d_cell(n, Vec(h, 0.0));
    for (std::size_t t = steps; t-- > 0;) {
      std::vector<Vec> dh_prev(n, Vec(h, 0.0)), dc_prev(n, Vec(h, 0.0));
      backward_frame(caches[t], d_hidden, d_cell, dh_prev, dc_prev, ctx);
      d_hidden = std::move(dh_prev);
      d_cell = std::move(dc_prev);
      caches[t].clear();
    }
  }
  return loss;
}

Rollout Predictor::rollout(const SequenceSample& sample, const RunContext& ctx,
                           const RolloutOptions& options) const {
  check_sample(sample);
  const std::size_t n = sample.num_peds();
  const std::size_t steps = sample.frames.size() - 1;
  const std::size_t obs = SequenceSample::kObserved;

  auto pos = sample.positions;
  auto vel = sample.velocities;
  std::vector<Vec2> origins(n);
  for (std::size_t p = 0; p < n; ++p) origins[p] = sample.positions[p][0];

  Rng sampler(options.seed);
  Rollout out;
  out.predicted.assign(n, {});
  out.gaussians.assign(n, {});
  std::vector<LstmState> states(n, LstmState::zeros(config_.hidden));
  for (std::size_t t = 0; t < steps; ++t) {
    const auto agents = agents_at(sample, t, pos, vel);
    auto frame = forward_frame(sample, t, agents, origins, states, ctx, false, nullptr, nullptr,
                               &options.on_social_tensor);
    for (std::size_t p = 0; p < n; ++p) {
      states[p] = std::move(frame.outputs[p].state);
      if (t + 1 < obs) continue;
      const GaussianParams& g = frame.outputs[p].gaussian;
      Vec2 step{g.mux, g.muy};
      if (options.sample) {
        const double z1 = sampler.normal();
        const double z2 = sampler.normal();
        step.x += g.sx * z1;
        step.y += g.sy * (g.rho * z1 + std::sqrt(1.0 - g.rho * g.rho) * z2);
      }
      pos[p][t + 1] = pos[p][t] + step;
      const double dt = sample.frame_dt.size() > t + 1 ? sample.frame_dt[t + 1] : 0.0;
      vel[p][t + 1] = dt > 0.0 ? step * (1.0 / dt) : Vec2{};
      out.predicted[p].push_back(pos[p][t + 1]);
      out.gaussians[p].push_back(g);
    }
  }
  return out;
}

}  // namespace crowdlstm
