#include "crowdlstm/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#ifndef CROWDLSTM_VERSION_STRING
#define CROWDLSTM_VERSION_STRING "dev"
#endif

namespace crowdlstm {

const char* version() { return CROWDLSTM_VERSION_STRING; }

namespace {

std::string fmt(double v) {
  // Shortest representation that round-trips.
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

template <typename T>
T to_int(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.dropout = dropout;
  m.attention_input = attention_input;
  return m;
}

RmspropConfig RunConfig::optimizer() const { return {learning_rate, rms_decay, rms_epsilon}; }

WindowConfig RunConfig::window() const {
  WindowConfig w;
  w.stride = stride;
  w.frame_period = frame_period;
  w.frame_step = frame_step;
  return w;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("lr must be positive");
  if (!(rms_decay >= 0.0 && rms_decay < 1.0)) fail("rms_decay must be in [0, 1)");
  if (!(rms_epsilon > 0.0)) fail("rms_epsilon must be positive");
  if (!(clip_norm > 0.0)) fail("clip_norm must be positive");
  check_dropout_rate(dropout);
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(frame_period > 0.0) || !std::isfinite(frame_period)) fail("frame_period must be positive");
  if (frame_step < 0) fail("frame_step must be >= 0");
  if (stride == 0) fail("stride must be positive");
  validate_fractions(split);
  if (out_dir.empty()) fail("out must not be empty");
  if (dataset != "synthetic" && !find_preset(dataset) && data_path.empty()) {
    fail("dataset '" + dataset + "' is not a preset; give data_path");
  }
  if (!scores_file.empty() && attention_input == AttentionInput::crowd) {
    fail("frozen scores cannot drive the crowd attention input");
  }
  ColumnOrder::parse(columns);
}

std::vector<std::pair<std::string, std::string>> RunConfig::to_entries() const {
  return {
      {"dataset", dataset},
      {"data_path", data_path},
      {"data_dir", data_dir},
      {"columns", columns},
      {"mode", to_string(mode)},
      {"attention_input", to_string(attention_input)},
      {"epochs", std::to_string(epochs)},
      {"lr", fmt(learning_rate)},
      {"rms_decay", fmt(rms_decay)},
      {"rms_epsilon", fmt(rms_epsilon)},
      {"clip_norm", fmt(clip_norm)},
      {"dropout", fmt(dropout)},
      {"batch_size", std::to_string(batch_size)},
      {"seed", std::to_string(seed)},
      {"frame_period", fmt(frame_period)},
      {"frame_step", std::to_string(frame_step)},
      {"stride", std::to_string(stride)},
      {"split_train", fmt(split.train)},
      {"split_val", fmt(split.val)},
      {"split_test", fmt(split.test)},
      {"out", out_dir},
      {"scores_file", scores_file},
      {"synthetic_peds", std::to_string(synthetic_peds)},
      {"synthetic_frames", std::to_string(synthetic_frames)},
      {"synthetic_min_track", std::to_string(synthetic_min_track)},
      {"synthetic_max_track", std::to_string(synthetic_max_track)},
      {"synthetic_noise", fmt(synthetic_noise)},
      {"synthetic_seed", std::to_string(synthetic_seed)},
  };
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "dataset") dataset = value;
  else if (key == "data_path") data_path = value;
  else if (key == "data_dir") data_dir = value;
  else if (key == "columns") columns = value;
  else if (key == "mode") mode = parse_mode(value);
  else if (key == "attention_input") attention_input = parse_attention_input(value);
  else if (key == "epochs") epochs = to_int<std::size_t>(key, value);
  else if (key == "lr") learning_rate = to_real(key, value);
  else if (key == "rms_decay") rms_decay = to_real(key, value);
  else if (key == "rms_epsilon") rms_epsilon = to_real(key, value);
  else if (key == "clip_norm") clip_norm = to_real(key, value);
  else if (key == "dropout") dropout = to_real(key, value);
  else if (key == "batch_size") batch_size = to_int<std::size_t>(key, value);
  else if (key == "seed") seed = to_int<std::uint64_t>(key, value);
  else if (key == "frame_period") frame_period = to_real(key, value);
  else if (key == "frame_step") frame_step = to_int<std::int64_t>(key, value);
  else if (key == "stride") stride = to_int<std::size_t>(key, value);
  else if (key == "split_train") split.train = to_real(key, value);
  else if (key == "split_val") split.val = to_real(key, value);
  else if (key == "split_test") split.test = to_real(key, value);
  else if (key == "out") out_dir = value;
  else if (key == "scores_file") scores_file = value;
  else if (key == "synthetic_peds") synthetic_peds = to_int<std::size_t>(key, value);
  else if (key == "synthetic_frames") synthetic_frames = to_int<std::size_t>(key, value);
  else if (key == "synthetic_min_track") synthetic_min_track = to_int<std::size_t>(key, value);
  else if (key == "synthetic_max_track") synthetic_max_track = to_int<std::size_t>(key, value);
  else if (key == "synthetic_noise") synthetic_noise = to_real(key, value);
  else if (key == "synthetic_seed") synthetic_seed = to_int<std::uint64_t>(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig RunConfig::from_entries(const std::vector<std::pair<std::string, std::string>>& entries) {
  RunConfig c;
  for (const auto& [k, v] : entries) c.set(k, v);
  return c;
}

std::vector<std::pair<std::string, std::string>> read_key_values(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line_no);
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  return RunConfig::from_entries(read_key_values(in));
}

void write_run_config(std::ostream& out, const RunConfig& config) {
  for (const auto& [k, v] : config.to_entries()) out << k << '=' << v << '\n';
}

void write_artifact_header(std::ostream& out, const RunConfig& config) {
  out << "# crowdlstm " << version() << '\n';
  for (const auto& [k, v] : config.to_entries()) out << "# " << k << '=' << v << '\n';
}

}  // namespace crowdlstm
