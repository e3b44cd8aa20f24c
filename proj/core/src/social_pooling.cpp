#include "crowdlstm/social_pooling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace crowdlstm {

std::optional<GridCell> pool_cell_index(Vec2 target, Vec2 neighbor,
                                        const PoolingGeometry& g) {
  const Vec2 rel = neighbor - target;
  const double half = g.region_side / 2.0;
  const double cell = g.fine_side();
  const double fx = std::floor((rel.x + half) / cell);
  const double fy = std::floor((rel.y + half) / cell);
  if (!(fx >= 0.0 && fx < g.fine_cells && fy >= 0.0 && fy < g.fine_cells)) return std::nullopt;
  return GridCell{static_cast<int>(fy), static_cast<int>(fx)};
}

SocialPooling SocialPooling::create(ParamStore& store, std::size_t hidden, std::size_t embed,
                                    const PoolingGeometry& geometry) {
  if (geometry.fine_cells % geometry.window != 0) {
    throw ConfigError("pooling window must divide the fine grid");
  }
  SocialPooling s;
  s.geometry_ = geometry;
  s.hidden_ = hidden;
  s.embed_ = embed;
  s.w_ = store.add("social.proj.w", hidden, embed, hidden);
  s.b_ = store.add("social.proj.b", 1, embed, hidden);
  return s;
}

SocialPooling SocialPooling::bind(const ParamStore& store, std::size_t hidden, std::size_t embed,
                                  const PoolingGeometry& geometry) {
  SocialPooling s;
  s.geometry_ = geometry;
  s.hidden_ = hidden;
  s.embed_ = embed;
  s.w_ = store.index_of("social.proj.w");
  s.b_ = store.index_of("social.proj.b");
  return s;
}

Vec SocialPooling::project(const ParamStore& store, std::span<const double> hidden) const {
  if (hidden.size() != hidden_) {
    throw DimensionError("social pooling: hidden width " + std::to_string(hidden.size()) +
                         ", expected " + std::to_string(hidden_));
  }
  Vec e = linear_forward(hidden, store[w_].value, store[b_].value.values());
  relu_inplace(e);
  return e;
}

Vec SocialPooling::build(const ParamStore& store, Vec2 target,
                         std::span<const PoolNeighbor> neighbors, SocialCache* cache) const {
  Vec tensor(width(), 0.0);
  if (cache) *cache = SocialCache{};

  std::vector<std::size_t> order(neighbors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return neighbors[a].id < neighbors[b].id; });

  const int coarse = geometry_.coarse_cells();
  for (std::size_t i : order) {
    const auto& nb = neighbors[i];
    if (nb.hidden.size() != hidden_) {
      throw DimensionError("social pooling: hidden width " + std::to_string(nb.hidden.size()) +
                           ", expected " + std::to_string(hidden_));
    }
    const auto fine = pool_cell_index(target, nb.pos, geometry_);
    if (!fine) continue;
    const int row = fine->row / geometry_.window;
    const int col = fine->col / geometry_.window;
    const auto slot = static_cast<std::size_t>(row * coarse + col) * embed_;
    Vec e = project(store, nb.hidden);
    for (std::size_t k = 0; k < embed_; ++k) tensor[slot + k] += e[k];
    if (cache) {
      cache->caller_index.push_back(i);
      cache->slot.push_back(slot);
      cache->hidden.emplace_back(nb.hidden.begin(), nb.hidden.end());
      cache->projected.push_back(std::move(e));
    }
  }
  return tensor;
}

void SocialPooling::backward(ParamStore& store, const SocialCache& cache,
                             std::span<const double> d_tensor, std::vector<Vec>& d_hidden) const {
  if (d_tensor.size() != width()) throw DimensionError("social pooling backward: width mismatch");
  auto& w = store[w_];
  auto& b = store[b_];
  for (std::size_t k = 0; k < cache.slot.size(); ++k) {
    const auto d_e = d_tensor.subspan(cache.slot[k], embed_);
    Vec dz(embed_, 0.0);
    relu_backward(cache.projected[k], d_e, dz);
    Vec& dh = d_hidden.at(cache.caller_index[k]);
    if (dh.size() != hidden_) dh.assign(hidden_, 0.0);
    linear_backward(cache.hidden[k], w.value, dz, w.grad, b.grad.values(), dh);
  }
}

}  // namespace crowdlstm
