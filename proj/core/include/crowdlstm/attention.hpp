#pragma once

// Human-human attention: each (target, neighbor) pair is embedded from the
// target's velocity, the neighbor's relative state and the neighbor-centered
// local map; an MLP over [pair embedding, mean embedding] yields one score
// per neighbor and a softmax normalizes over the neighbors.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "crowdlstm/local_map.hpp"
#include "crowdlstm/param_store.hpp"

namespace crowdlstm {

// [target vx, target vy, rel x, rel y, neighbor vx, neighbor vy, map(48)].
// The target's own position is the origin and contributes no columns.
inline constexpr std::size_t kPairFeatureWidth = 6 + LocalMap::kSize;
using PairFeature = std::array<double, kPairFeatureWidth>;

PairFeature make_pair_feature(const AgentState& target, const AgentState& neighbor,
                              const LocalMap& neighbor_map);

struct NeighborInput {
  AgentState state;
  LocalMap map;  // centered on this neighbor
};

// Builds one NeighborInput per entry of `neighbors`, with each map drawn
// from all of `scene` except the neighbor itself.
std::vector<NeighborInput> neighbor_inputs(std::span<const AgentState> neighbors,
                                           std::span<const AgentState> scene);

struct AttentionScores {
  std::int64_t target_id = 0;
  std::vector<std::int64_t> neighbor_ids;
  std::vector<double> weights;

  bool empty() const { return weights.empty(); }
};

struct AttentionDims {
  std::size_t feature = kPairFeatureWidth;
  std::size_t embed_hidden = 100;
  std::size_t embed = 50;
  std::size_t mlp_hidden = 100;
};

struct AttentionCache {
  // Canonical (ascending neighbor id) order; order[k] is the caller index of
  // canonical entry k.
  std::vector<std::size_t> order;
  std::vector<PairFeature> features;
  std::vector<Vec> hidden1;     // relu(feature W1 + b1)
  std::vector<Vec> embeddings;  // relu(hidden1 W2 + b2)
  Vec mean_embedding;
  std::vector<Vec> mlp_input;   // [embedding, mean_embedding]
  std::vector<Vec> mlp_hidden;  // relu(mlp_input W3 + b3)
  Vec weights;                  // softmax, canonical order
};

class AttentionNet {
 public:
  AttentionNet() = default;
  // Adds the attention parameters to `store` under "attention.*".
  static AttentionNet create(ParamStore& store, const AttentionDims& dims = {});
  // Looks up previously registered parameters.
  static AttentionNet bind(const ParamStore& store, const AttentionDims& dims = {});

  const AttentionDims& dims() const { return dims_; }

  Vec embed_pair(const ParamStore& store, std::span<const double> feature) const;

  // Zero neighbors produce empty scores. Results are exactly equivariant
  // under reordering of `neighbors` (ties broken by id).
  AttentionScores score_neighbors(const ParamStore& store, const AgentState& target,
                                  std::span<const NeighborInput> neighbors,
                                  AttentionCache* cache = nullptr) const;

  // Accumulates parameter gradients given dL/dalpha and, optionally, extra
  // dL/d(embedding_j) (both in the caller's neighbor order).
  void backward(ParamStore& store, const AttentionCache& cache, std::span<const double> d_weights,
                const std::vector<Vec>* d_embeddings = nullptr) const;

  // Pair embeddings in caller order, taken from a forward cache.
  static std::vector<Vec> embeddings_in_caller_order(const AttentionCache& cache);

 private:
  AttentionDims dims_;
  std::size_t w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0, w3_ = 0, b3_ = 0, w4_ = 0, b4_ = 0;
};

// sum_j alpha_j e_j.
Vec weighted_crowd_feature(std::span<const double> weights, const std::vector<Vec>& embeddings);

}  // namespace crowdlstm
