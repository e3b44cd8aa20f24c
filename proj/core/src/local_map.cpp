#include "crowdlstm/local_map.hpp"

#include <cmath>

namespace crowdlstm {

RelativeState relative_state(const AgentState& target, const AgentState& neighbor) {
  return {neighbor.pos - target.pos, neighbor.vel};
}

std::optional<GridCell> local_map_cell(Vec2 rel) {
  const double fx = std::floor((rel.x + LocalMap::kHalfExtent) / LocalMap::kCellSide);
  const double fy = std::floor((rel.y + LocalMap::kHalfExtent) / LocalMap::kCellSide);
  if (!(fx >= 0.0 && fx < LocalMap::kCells && fy >= 0.0 && fy < LocalMap::kCells)) {
    return std::nullopt;
  }
  return GridCell{static_cast<int>(fy), static_cast<int>(fx)};
}

LocalMap build_local_map(const AgentState& target, std::span<const AgentState> agents) {
  LocalMap map;
  for (const auto& a : agents) {
    if (a.id == target.id) continue;
    const auto rel = relative_state(target, a);
    const auto cell = local_map_cell(rel.pos);
    if (!cell) continue;
    const std::size_t o = LocalMap::offset(cell->row, cell->col);
    map.values[o] += 1.0;
    map.values[o + 1] += rel.vel.x;
    map.values[o + 2] += rel.vel.y;
  }
  return map;
}

}  // namespace crowdlstm
