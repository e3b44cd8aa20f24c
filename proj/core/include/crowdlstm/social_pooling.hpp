#pragma once

// Social tensor: neighbors' previous hidden states, projected 128 -> 64 by
// a shared linear+ReLU layer, are scattered into a 32x32 grid around the
// target and sum-pooled by non-overlapping 8x8 windows into 4x4 cells. The
// flattened tensor is (row * 4 + col) * 64 + channel, rows along y.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "crowdlstm/local_map.hpp"
#include "crowdlstm/param_store.hpp"

namespace crowdlstm {

struct PoolingGeometry {
  double region_side = 4.0;  // metres covered by the fine grid
  int fine_cells = 32;
  int window = 8;

  int coarse_cells() const { return fine_cells / window; }
  double fine_side() const { return region_side / fine_cells; }
};

// Fine-grid cell (row along y, col along x) of a neighbor, or nullopt when
// it falls outside the half-open region around the target.
std::optional<GridCell> pool_cell_index(Vec2 target, Vec2 neighbor,
                                        const PoolingGeometry& geometry = {});

struct PoolNeighbor {
  std::int64_t id = 0;
  Vec2 pos;
  std::span<const double> hidden;  // previous-step hidden state
};

struct SocialCache {
  // One entry per in-range neighbor, in ascending id order.
  std::vector<std::size_t> caller_index;
  std::vector<std::size_t> slot;  // offset of the 64-wide block
  std::vector<Vec> hidden;
  std::vector<Vec> projected;
};

class SocialPooling {
 public:
  SocialPooling() = default;
  static SocialPooling create(ParamStore& store, std::size_t hidden = 128,
                              std::size_t embed = 64, const PoolingGeometry& geometry = {});
  static SocialPooling bind(const ParamStore& store, std::size_t hidden = 128,
                            std::size_t embed = 64, const PoolingGeometry& geometry = {});

  std::size_t width() const {
    const auto c = static_cast<std::size_t>(geometry_.coarse_cells());
    return c * c * embed_;
  }
  std::size_t embed() const { return embed_; }
  const PoolingGeometry& geometry() const { return geometry_; }

  Vec project(const ParamStore& store, std::span<const double> hidden) const;

  // The target itself must not be among `neighbors`.
  Vec build(const ParamStore& store, Vec2 target, std::span<const PoolNeighbor> neighbors,
            SocialCache* cache = nullptr) const;

  // Accumulates projection gradients; d_hidden[i] (caller order, width H)
  // receives dL/d(hidden of neighbor i).
  void backward(ParamStore& store, const SocialCache& cache, std::span<const double> d_tensor,
                std::vector<Vec>& d_hidden) const;

 private:
  PoolingGeometry geometry_;
  std::size_t hidden_ = 128;
  std::size_t embed_ = 64;
  std::size_t w_ = 0;
  std::size_t b_ = 0;
};

}  // namespace crowdlstm
