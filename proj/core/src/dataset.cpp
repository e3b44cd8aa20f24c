#include "crowdlstm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace crowdlstm {

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

ColumnOrder ColumnOrder::parse(const std::string& letters) {
  if (letters.size() != 4) throw ConfigError("column order must be 4 letters, e.g. fpxy");
  ColumnOrder c;
  std::set<char> seen;
  for (std::size_t i = 0; i < 4; ++i) {
    const char ch = static_cast<char>(std::tolower(static_cast<unsigned char>(letters[i])));
    if (!seen.insert(ch).second) throw ConfigError("repeated column letter in " + letters);
    switch (ch) {
      case 'f': c.frame = i; break;
      case 'p': c.ped = i; break;
      case 'x': c.x = i; break;
      case 'y': c.y = i; break;
      default: throw ConfigError("unknown column letter '" + std::string(1, ch) + "'");
    }
  }
  return c;
}

std::string ColumnOrder::to_string() const {
  std::string s(4, '?');
  s[frame] = 'f';
  s[ped] = 'p';
  s[x] = 'x';
  s[y] = 'y';
  return s;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto is_sep = [](char c) { return c == ',' || c == ' ' || c == '\t' || c == '\r'; };
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_sep(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::int64_t to_id(std::string_view s, const char* what, std::size_t line_no) {
  auto v = to_double(s);
  if (!v || std::floor(*v) != *v || std::abs(*v) > 9.0e15) {
    throw ParseError(std::string("invalid ") + what + " '" + std::string(s) + "'", line_no);
  }
  return static_cast<std::int64_t>(*v);
}

}  // namespace

std::vector<TrackPoint> parse_dataset(std::istream& in, const ColumnOrder& columns) {
  const std::size_t needed =
      std::max({columns.frame, columns.ped, columns.x, columns.y}) + 1;
  std::vector<TrackPoint> points;
  std::vector<std::size_t> line_of;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_fields(line);
    if (fields.empty() || fields.front().front() == '#') continue;
    if (fields.size() < std::max<std::size_t>(needed, 4)) {
      throw ParseError("expected at least 4 fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    TrackPoint p;
    p.frame = to_id(fields[columns.frame], "frame", line_no);
    p.ped_id = to_id(fields[columns.ped], "pedestrian id", line_no);
    auto x = to_double(fields[columns.x]);
    auto y = to_double(fields[columns.y]);
    if (!x || !y) throw ParseError("non-numeric coordinate", line_no);
    p.x = *x;
    p.y = *y;
    points.push_back(p);
    line_of.push_back(line_no);
  }
  if (points.empty()) throw ParseError("no annotation rows", line_no);

  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].frame != points[b].frame) return points[a].frame < points[b].frame;
    return points[a].ped_id < points[b].ped_id;
  });
  std::vector<TrackPoint> sorted;
  sorted.reserve(points.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& p = points[order[k]];
    if (!sorted.empty() && sorted.back().frame == p.frame && sorted.back().ped_id == p.ped_id) {
      throw ParseError("duplicate (frame " + std::to_string(p.frame) + ", pedestrian " +
                           std::to_string(p.ped_id) + ")",
                       line_of[order[k]]);
    }
    sorted.push_back(p);
  }
  return sorted;
}

std::vector<TrackPoint> load_dataset(const std::string& path, const ColumnOrder& columns) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file " + path);
  return parse_dataset(in, columns);
}

void write_dataset(std::ostream& out, const std::vector<TrackPoint>& points) {
  out << std::setprecision(17);
  for (const auto& p : points) out << p.frame << ' ' << p.ped_id << ' ' << p.x << ' ' << p.y << '\n';
}

Velocity compute_velocity(const TrackPoint& prev, const TrackPoint& cur, double frame_period,
                          std::int64_t frame_step) {
  if (frame_step <= 0) throw ConfigError("compute_velocity: frame step must be positive");
  const double gap =
      static_cast<double>(cur.frame - prev.frame) / static_cast<double>(frame_step);
  const double dt = gap * frame_period;
  if (!(dt > 0.0)) {
    throw ConfigError("compute_velocity: non-positive time step between frames " +
                      std::to_string(prev.frame) + " and " + std::to_string(cur.frame));
  }
  return {(cur.x - prev.x) / dt, (cur.y - prev.y) / dt};
}

std::int64_t detect_frame_step(const std::vector<TrackPoint>& points) {
  std::set<std::int64_t> frames;
  for (const auto& p : points) frames.insert(p.frame);
  std::int64_t step = 0;
  std::int64_t prev = 0;
  bool first = true;
  for (std::int64_t f : frames) {
    if (!first) step = std::gcd(step, f - prev);
    prev = f;
    first = false;
  }
  return step > 0 ? step : 1;
}

std::vector<Velocity> track_velocities(const std::vector<TrackPoint>& points, double frame_period,
                                       std::int64_t frame_step) {
  std::vector<Velocity> vel(points.size());
  std::map<std::int64_t, std::size_t> last_seen;
  // Points are processed in frame order so the previous entry is the
  // previous annotation of the same track.
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return points[a].frame < points[b].frame; });
  for (std::size_t i : order) {
    auto it = last_seen.find(points[i].ped_id);
    if (it != last_seen.end()) {
      vel[i] = compute_velocity(points[it->second], points[i], frame_period, frame_step);
    }
    last_seen[points[i].ped_id] = i;
  }
  return vel;
}

std::vector<SequenceSample> build_sequences(const std::vector<TrackPoint>& points,
                                            const WindowConfig& config) {
  if (config.stride == 0) throw ConfigError("stride must be positive");
  const std::size_t length = config.observed + config.predicted;
  const std::int64_t step =
      config.frame_step > 0 ? config.frame_step : detect_frame_step(points);
  const auto vel = track_velocities(points, config.frame_period, step);

  std::vector<std::int64_t> frames;
  // frame -> (ped -> point index)
  std::map<std::int64_t, std::map<std::int64_t, std::size_t>> at;
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto& slot = at[points[i].frame];
    if (!slot.emplace(points[i].ped_id, i).second) {
      throw ConfigError("duplicate (frame, pedestrian) in build_sequences");
    }
  }
  for (const auto& [f, _] : at) frames.push_back(f);

  std::vector<SequenceSample> out;
  std::size_t window_index = 0;
  for (std::size_t s = 0; s + length <= frames.size(); s += config.stride, ++window_index) {
    SequenceSample sample;
    sample.index = window_index;
    sample.frames.assign(frames.begin() + static_cast<std::ptrdiff_t>(s),
                         frames.begin() + static_cast<std::ptrdiff_t>(s + length));
    for (const auto& [ped, _] : at[sample.frames.front()]) {
      bool everywhere = true;
      for (std::int64_t f : sample.frames) {
        if (!at[f].count(ped)) {
          everywhere = false;
          break;
        }
      }
      if (everywhere) sample.ped_ids.push_back(ped);
    }
    if (sample.ped_ids.empty()) continue;
    sample.frame_dt.assign(length, 0.0);
    for (std::size_t t = 1; t < length; ++t) {
      sample.frame_dt[t] = static_cast<double>(sample.frames[t] - sample.frames[t - 1]) /
                           static_cast<double>(step) * config.frame_period;
    }
    for (std::int64_t ped : sample.ped_ids) {
      std::vector<Vec2> pos, v;
      pos.reserve(length);
      v.reserve(length);
      for (std::int64_t f : sample.frames) {
        const std::size_t i = at[f][ped];
        pos.push_back({points[i].x, points[i].y});
        v.push_back({vel[i].vx, vel[i].vy});
      }
      sample.positions.push_back(std::move(pos));
      sample.velocities.push_back(std::move(v));
    }
    out.push_back(std::move(sample));
  }
  return out;
}

void validate_fractions(const SplitFractions& f) {
  const bool sane = f.train > 0.0 && f.val >= 0.0 && f.test >= 0.0 &&
                    std::abs(f.train + f.val + f.test - 1.0) < 1e-9;
  if (!sane) {
    std::ostringstream os;
    os << "split fractions must be nonnegative with train > 0 and sum to 1, got (" << f.train
       << ", " << f.val << ", " << f.test << ")";
    throw ConfigError(os.str());
  }
}

DatasetSplit split_dataset(const std::vector<SequenceSample>& samples, const SplitFractions& f,
                           std::uint64_t seed) {
  validate_fractions(f);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);

  const auto n = static_cast<double>(samples.size());
  auto n_train = static_cast<std::size_t>(std::llround(n * f.train));
  auto n_val = static_cast<std::size_t>(std::llround(n * f.val));
  n_train = std::min(n_train, samples.size());
  n_val = std::min(n_val, samples.size() - n_train);

  DatasetSplit split;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& s = samples[order[k]];
    if (k < n_train) split.train.push_back(s);
    else if (k < n_train + n_val) split.val.push_back(s);
    else split.test.push_back(s);
  }
  return split;
}

void write_split_manifest(std::ostream& out, const DatasetSplit& split) {
  auto emit = [&](const char* name, const std::vector<SequenceSample>& v) {
    for (const auto& s : v) out << name << ' ' << s.start_frame() << ' ' << s.index << '\n';
  };
  emit("train", split.train);
  emit("val", split.val);
  emit("test", split.test);
}

std::map<std::int64_t, std::vector<AgentState>> agents_by_frame(
    const std::vector<TrackPoint>& points, double frame_period, std::int64_t frame_step) {
  const std::int64_t step = frame_step > 0 ? frame_step : detect_frame_step(points);
  const auto vel = track_velocities(points, frame_period, step);
  std::map<std::int64_t, std::vector<AgentState>> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    out[points[i].frame].push_back(
        {points[i].ped_id, {points[i].x, points[i].y}, {vel[i].vx, vel[i].vy}});
  }
  for (auto& [_, agents] : out) {
    std::sort(agents.begin(), agents.end(),
              [](const AgentState& a, const AgentState& b) { return a.id < b.id; });
  }
  return out;
}

const std::vector<DatasetPreset>& dataset_presets() {
  static const std::vector<DatasetPreset> presets = {
      {"ETH", "biwi_eth.txt", ColumnOrder::standard(), 0.4},
      {"HOTEL", "biwi_hotel.txt", ColumnOrder::standard(), 0.4},
      {"UNIV1", "students001.txt", ColumnOrder::standard(), 0.4},
      {"UNIV3", "students003.txt", ColumnOrder::standard(), 0.4},
      {"ZARA1", "crowds_zara01.txt", ColumnOrder::standard(), 0.4},
      {"ZARA2", "crowds_zara02.txt", ColumnOrder::standard(), 0.4},
  };
  return presets;
}

std::optional<DatasetPreset> find_preset(const std::string& name) {
  std::string upper = name;
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const auto& p : dataset_presets()) {
    if (p.name == upper) return p;
  }
  return std::nullopt;
}

}  // namespace crowdlstm
