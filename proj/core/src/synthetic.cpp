#include "crowdlstm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace crowdlstm {

std::vector<TrackPoint> constant_velocity_scene(const SyntheticSceneConfig& c) {
  if (c.min_track == 0 || c.min_track > c.max_track || c.max_track > c.num_frames) {
    throw ConfigError("synthetic scene: track lengths must satisfy 0 < min <= max <= num_frames");
  }
  Rng rng(c.seed);
  std::vector<TrackPoint> points;
  for (std::size_t p = 0; p < c.num_peds; ++p) {
    const std::size_t len = c.min_track + rng.index(c.max_track - c.min_track + 1);
    const std::size_t start = rng.index(c.num_frames - len + 1);
    const double speed = rng.uniform(c.min_speed, c.max_speed);
    const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double step_x = speed * std::cos(heading) * c.frame_period;
    const double step_y = speed * std::sin(heading) * c.frame_period;
    const double x0 = rng.uniform(0.0, c.area);
    const double y0 = rng.uniform(0.0, c.area);
    for (std::size_t k = 0; k < len; ++k) {
      TrackPoint tp;
      tp.frame = static_cast<std::int64_t>(start + k) * c.frame_step;
      tp.ped_id = static_cast<std::int64_t>(p) + 1;
      tp.x = x0 + step_x * static_cast<double>(k) + c.noise_sigma * rng.normal();
      tp.y = y0 + step_y * static_cast<double>(k) + c.noise_sigma * rng.normal();
      points.push_back(tp);
    }
  }
  std::sort(points.begin(), points.end(), [](const TrackPoint& a, const TrackPoint& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.ped_id < b.ped_id;
  });
  return points;
}

}  // namespace crowdlstm
