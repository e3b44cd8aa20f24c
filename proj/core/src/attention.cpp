#include "crowdlstm/attention.hpp"

#include <algorithm>
#include <numeric>

namespace crowdlstm {

PairFeature make_pair_feature(const AgentState& target, const AgentState& neighbor,
                              const LocalMap& neighbor_map) {
  const auto rel = relative_state(target, neighbor);
  PairFeature f{};
  f[0] = target.vel.x;
  f[1] = target.vel.y;
  f[2] = rel.pos.x;
  f[3] = rel.pos.y;
  f[4] = rel.vel.x;
  f[5] = rel.vel.y;
  std::copy(neighbor_map.values.begin(), neighbor_map.values.end(), f.begin() + 6);
  return f;
}

std::vector<NeighborInput> neighbor_inputs(std::span<const AgentState> neighbors,
                                           std::span<const AgentState> scene) {
  std::vector<NeighborInput> out;
  out.reserve(neighbors.size());
  for (const auto& n : neighbors) out.push_back({n, build_local_map(n, scene)});
  return out;
}

AttentionNet AttentionNet::create(ParamStore& store, const AttentionDims& d) {
  AttentionNet net;
  net.dims_ = d;
  net.w1_ = store.add("attention.embed1.w", d.feature, d.embed_hidden, d.feature);
  net.b1_ = store.add("attention.embed1.b", 1, d.embed_hidden, d.feature);
  net.w2_ = store.add("attention.embed2.w", d.embed_hidden, d.embed, d.embed_hidden);
  net.b2_ = store.add("attention.embed2.b", 1, d.embed, d.embed_hidden);
  net.w3_ = store.add("attention.mlp.w", 2 * d.embed, d.mlp_hidden, 2 * d.embed);
  net.b3_ = store.add("attention.mlp.b", 1, d.mlp_hidden, 2 * d.embed);
  net.w4_ = store.add("attention.score.w", d.mlp_hidden, 1, d.mlp_hidden);
  net.b4_ = store.add("attention.score.b", 1, 1, d.mlp_hidden);
  return net;
}

AttentionNet AttentionNet::bind(const ParamStore& store, const AttentionDims& d) {
  AttentionNet net;
  net.dims_ = d;
  net.w1_ = store.index_of("attention.embed1.w");
  net.b1_ = store.index_of("attention.embed1.b");
  net.w2_ = store.index_of("attention.embed2.w");
  net.b2_ = store.index_of("attention.embed2.b");
  net.w3_ = store.index_of("attention.mlp.w");
  net.b3_ = store.index_of("attention.mlp.b");
  net.w4_ = store.index_of("attention.score.w");
  net.b4_ = store.index_of("attention.score.b");
  return net;
}

Vec AttentionNet::embed_pair(const ParamStore& store, std::span<const double> feature) const {
  if (feature.size() != dims_.feature) {
    throw DimensionError("embed_pair: feature width " + std::to_string(feature.size()) +
                         ", expected " + std::to_string(dims_.feature));
  }
  Vec h = linear_forward(feature, store[w1_].value, store[b1_].value.values());
  relu_inplace(h);
  Vec e = linear_forward(h, store[w2_].value, store[b2_].value.values());
  relu_inplace(e);
  return e;
}

AttentionScores AttentionNet::score_neighbors(const ParamStore& store, const AgentState& target,
                                              std::span<const NeighborInput> neighbors,
                                              AttentionCache* cache) const {
  AttentionScores out;
  out.target_id = target.id;
  const std::size_t n = neighbors.size();
  if (cache) *cache = AttentionCache{};
  if (n == 0) return out;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return neighbors[a].state.id < neighbors[b].state.id;
  });

  AttentionCache local;
  AttentionCache& c = cache ? *cache : local;
  c.order = order;
  c.features.resize(n);
  c.hidden1.resize(n);
  c.embeddings.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& nb = neighbors[order[k]];
    c.features[k] = make_pair_feature(target, nb.state, nb.map);
    Vec h = linear_forward(c.features[k], store[w1_].value, store[b1_].value.values());
    relu_inplace(h);
    Vec e = linear_forward(h, store[w2_].value, store[b2_].value.values());
    relu_inplace(e);
    c.hidden1[k] = std::move(h);
    c.embeddings[k] = std::move(e);
  }

  c.mean_embedding.assign(dims_.embed, 0.0);
  for (const auto& e : c.embeddings) axpy(1.0, e, c.mean_embedding);
  for (double& v : c.mean_embedding) v /= static_cast<double>(n);

  Vec scores(n);
  c.mlp_input.resize(n);
  c.mlp_hidden.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    Vec in(c.embeddings[k]);
    in.insert(in.end(), c.mean_embedding.begin(), c.mean_embedding.end());
    Vec h = linear_forward(in, store[w3_].value, store[b3_].value.values());
    relu_inplace(h);
    scores[k] = linear_forward(h, store[w4_].value, store[b4_].value.values())[0];
    c.mlp_input[k] = std::move(in);
    c.mlp_hidden[k] = std::move(h);
  }
  c.weights = softmax(scores);

  out.neighbor_ids.resize(n);
  out.weights.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.neighbor_ids[order[k]] = neighbors[order[k]].state.id;
    out.weights[order[k]] = c.weights[k];
  }
  return out;
}

void AttentionNet::backward(ParamStore& store, const AttentionCache& c,
                            std::span<const double> d_weights,
                            const std::vector<Vec>* d_embeddings) const {
  const std::size_t n = c.order.size();
  if (d_weights.size() != n || (d_embeddings && d_embeddings->size() != n)) {
    throw DimensionError("attention backward: neighbor count mismatch");
  }
  if (n == 0) return;

  Vec dw_canon(n);
  for (std::size_t k = 0; k < n; ++k) dw_canon[k] = d_weights[c.order[k]];
  Vec d_scores(n, 0.0);
  softmax_backward(c.weights, dw_canon, d_scores);

  auto& p1 = store[w1_];
  auto& p2 = store[w2_];
  auto& p3 = store[w3_];
  auto& p4 = store[w4_];
  const std::size_t e = dims_.embed;

  std::vector<Vec> d_emb(n, Vec(e, 0.0));
  Vec d_mean(e, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    Vec d_hidden(dims_.mlp_hidden, 0.0);
    const double ds[1] = {d_scores[k]};
    linear_backward(c.mlp_hidden[k], p4.value, ds, p4.grad, store[b4_].grad.values(), d_hidden);
    Vec dz(dims_.mlp_hidden, 0.0);
    relu_backward(c.mlp_hidden[k], d_hidden, dz);
    Vec d_in(2 * e, 0.0);
    linear_backward(c.mlp_input[k], p3.value, dz, p3.grad, store[b3_].grad.values(), d_in);
    for (std::size_t i = 0; i < e; ++i) {
      d_emb[k][i] += d_in[i];
      d_mean[i] += d_in[e + i];
    }
    if (d_embeddings) axpy(1.0, (*d_embeddings)[c.order[k]], d_emb[k]);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    axpy(inv_n, d_mean, d_emb[k]);

    Vec dz2(e, 0.0);
    relu_backward(c.embeddings[k], d_emb[k], dz2);
    Vec d_h1(dims_.embed_hidden, 0.0);
    linear_backward(c.hidden1[k], p2.value, dz2, p2.grad, store[b2_].grad.values(), d_h1);
    Vec dz1(dims_.embed_hidden, 0.0);
    relu_backward(c.hidden1[k], d_h1, dz1);
    linear_backward(c.features[k], p1.value, dz1, p1.grad, store[b1_].grad.values(), {});
  }
}

std::vector<Vec> AttentionNet::embeddings_in_caller_order(const AttentionCache& cache) {
  std::vector<Vec> out(cache.order.size());
  for (std::size_t k = 0; k < cache.order.size(); ++k) out[cache.order[k]] = cache.embeddings[k];
  return out;
}

Vec weighted_crowd_feature(std::span<const double> weights, const std::vector<Vec>& embeddings) {
  if (weights.size() != embeddings.size()) {
    throw DimensionError("weighted_crowd_feature: " + std::to_string(weights.size()) +
                         " weights for " + std::to_string(embeddings.size()) + " embeddings");
  }
  if (embeddings.empty()) return {};
  Vec out(embeddings.front().size(), 0.0);
  for (std::size_t j = 0; j < weights.size(); ++j) axpy(weights[j], embeddings[j], out);
  return out;
}

}  // namespace crowdlstm
