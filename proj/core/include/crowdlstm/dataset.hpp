#pragma once

// Annotation parsing, velocity derivation and 20-frame windowing for
// ETH/UCY-style pedestrian tracks.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crowdlstm/tensor.hpp"

namespace crowdlstm {

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;
};

double distance(Vec2 a, Vec2 b);

struct TrackPoint {
  std::int64_t frame = 0;
  std::int64_t ped_id = 0;
  double x = 0.0;
  double y = 0.0;

  bool operator==(const TrackPoint&) const = default;
};

struct Velocity {
  double vx = 0.0;
  double vy = 0.0;

  bool operator==(const Velocity&) const = default;
};

// Zero-based field positions of each quantity within a line.
struct ColumnOrder {
  std::size_t frame = 0;
  std::size_t ped = 1;
  std::size_t x = 2;
  std::size_t y = 3;

  static ColumnOrder standard() { return {}; }
  static ColumnOrder swapped_xy() { return {0, 1, 3, 2}; }
  // "fpxy" / "fpyx" style letter strings.
  static ColumnOrder parse(const std::string& letters);
  std::string to_string() const;
};

// Lines hold >= 4 numeric fields separated by whitespace and/or commas.
// Blank lines and lines starting with '#' are skipped. Output is sorted by
// (frame, ped_id).
std::vector<TrackPoint> parse_dataset(std::istream& in, const ColumnOrder& columns = {});
std::vector<TrackPoint> load_dataset(const std::string& path, const ColumnOrder& columns = {});

// Writes "frame ped x y" lines in the standard column order at full
// precision, so parse_dataset reproduces the points exactly.
void write_dataset(std::ostream& out, const std::vector<TrackPoint>& points);

// v = (p_t - p_{t-1}) / dt with dt = (frame gap) * frame_period. The gap is
// counted in annotation steps: raw frame ids are divided by `frame_step`
// (ETH/UCY files number every 10th video frame, for instance).
Velocity compute_velocity(const TrackPoint& prev, const TrackPoint& cur, double frame_period,
                          std::int64_t frame_step = 1);

// Greatest common divisor of the gaps between consecutive distinct frame ids
// (1 when fewer than two frames exist).
std::int64_t detect_frame_step(const std::vector<TrackPoint>& points);

// Velocity of every point, in input order. The first point of each track
// gets (0, 0).
std::vector<Velocity> track_velocities(const std::vector<TrackPoint>& points, double frame_period,
                                       std::int64_t frame_step = 1);

struct SequenceSample {
  static constexpr std::size_t kObserved = 8;
  static constexpr std::size_t kPredicted = 12;
  static constexpr std::size_t kLength = kObserved + kPredicted;

  std::size_t index = 0;  // position in the dataset's window enumeration
  std::vector<std::int64_t> frames;
  std::vector<std::int64_t> ped_ids;  // ascending
  // positions[p][t], velocities[p][t] for pedestrian p and window frame t.
  std::vector<std::vector<Vec2>> positions;
  std::vector<std::vector<Vec2>> velocities;
  // Seconds elapsed from window frame t-1 to t; entry 0 is 0.
  std::vector<double> frame_dt;

  std::size_t num_peds() const { return ped_ids.size(); }
  std::int64_t start_frame() const { return frames.empty() ? 0 : frames.front(); }
};

struct WindowConfig {
  std::size_t observed = SequenceSample::kObserved;
  std::size_t predicted = SequenceSample::kPredicted;
  std::size_t stride = 10;
  double frame_period = 0.4;
  std::int64_t frame_step = 0;  // 0: detect from the data
};

// Windows advance by `stride` annotated frames; pedestrians must be present
// in every frame of the window; empty windows are dropped.
std::vector<SequenceSample> build_sequences(const std::vector<TrackPoint>& points,
                                            const WindowConfig& config = {});

struct SplitFractions {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;
};

struct DatasetSplit {
  std::vector<SequenceSample> train;
  std::vector<SequenceSample> val;
  std::vector<SequenceSample> test;
};

void validate_fractions(const SplitFractions& f);
DatasetSplit split_dataset(const std::vector<SequenceSample>& samples, const SplitFractions& f,
                           std::uint64_t seed);

// "split start_frame index" lines.
void write_split_manifest(std::ostream& out, const DatasetSplit& split);

// Everyone annotated at a frame, with track-derived velocities.
struct AgentState {
  std::int64_t id = 0;
  Vec2 pos;
  Vec2 vel;
};
std::map<std::int64_t, std::vector<AgentState>> agents_by_frame(
    const std::vector<TrackPoint>& points, double frame_period, std::int64_t frame_step = 0);

struct DatasetPreset {
  std::string name;
  std::string file_name;
  ColumnOrder columns;
  double frame_period = 0.4;
};

// ETH, HOTEL, UNIV1, UNIV3, ZARA1, ZARA2 (case-insensitive lookup).
const std::vector<DatasetPreset>& dataset_presets();
std::optional<DatasetPreset> find_preset(const std::string& name);

}  // namespace crowdlstm
