#pragma once

#include <array>
#include <optional>
#include <span>

#include "crowdlstm/dataset.hpp"

namespace crowdlstm {

struct RelativeState {
  Vec2 pos;  // neighbor position with the target at the origin
  Vec2 vel;  // neighbor velocity, world frame
};

RelativeState relative_state(const AgentState& target, const AgentState& neighbor);

// 4x4 grid of 1 m cells covering [-2, 2) x [-2, 2) around the target. Each
// cell holds (occupancy, sum vx, sum vy). Flattened row-major with rows
// along y and channels innermost: index = ((row * 4) + col) * 3 + channel.
struct LocalMap {
  static constexpr int kCells = 4;
  static constexpr int kChannels = 3;
  static constexpr std::size_t kSize = kCells * kCells * kChannels;
  static constexpr double kCellSide = 1.0;
  static constexpr double kHalfExtent = kCells * kCellSide / 2.0;

  std::array<double, kSize> values{};

  static std::size_t offset(int row, int col) {
    return static_cast<std::size_t>((row * kCells + col) * kChannels);
  }
  double occupancy(int row, int col) const { return values[offset(row, col)]; }
  double sum_vx(int row, int col) const { return values[offset(row, col) + 1]; }
  double sum_vy(int row, int col) const { return values[offset(row, col) + 2]; }
};

struct GridCell {
  int row = 0;  // y index
  int col = 0;  // x index
  bool operator==(const GridCell&) const = default;
};

// Cell of a relative position, or nullopt when outside [-2, 2)^2.
std::optional<GridCell> local_map_cell(Vec2 rel);

// `agents` may contain the target itself (matched by id); it is skipped.
LocalMap build_local_map(const AgentState& target, std::span<const AgentState> agents);

}  // namespace crowdlstm
