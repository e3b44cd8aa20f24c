#pragma once

#include <cstdint>
#include <vector>

#include "crowdlstm/dataset.hpp"

namespace crowdlstm {

// Straight-line walkers with Gaussian position noise, annotated every
// `frame_step` raw frames like the ETH/UCY files.
struct SyntheticSceneConfig {
  std::size_t num_peds = 50;
  std::size_t num_frames = 20000;  // annotated frames in the scene
  std::size_t min_track = 300;
  std::size_t max_track = 900;
  std::int64_t frame_step = 10;
  double frame_period = 0.4;  // seconds between annotated frames
  double min_speed = 0.5;     // units per second
  double max_speed = 1.5;
  double area = 20.0;         // side of the square where tracks start
  double noise_sigma = 0.01;
  std::uint64_t seed = 0;
};

std::vector<TrackPoint> constant_velocity_scene(const SyntheticSceneConfig& config);

}  // namespace crowdlstm
