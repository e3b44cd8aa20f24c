#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "crowdlstm/dataset.hpp"
#include "crowdlstm/model.hpp"
#include "crowdlstm/param_store.hpp"

namespace crowdlstm {

const char* version();

struct RunConfig {
  std::string dataset = "synthetic";  // preset name (ETH ... ZARA2) or "synthetic"
  std::string data_path;              // annotation file; presets default to <data_dir>/<file>
  std::string data_dir = "data";
  std::string columns = "fpxy";
  Mode mode = Mode::attention;
  AttentionInput attention_input = AttentionInput::scores;
  std::size_t epochs = 30;
  double learning_rate = 0.003;
  double rms_decay = 0.99;
  double rms_epsilon = 1e-8;
  double clip_norm = 10.0;
  double dropout = 0.5;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  double frame_period = 0.4;
  std::int64_t frame_step = 0;  // 0: detect
  std::size_t stride = 10;
  SplitFractions split;
  std::string out_dir = "out";
  std::string scores_file;
  // Synthetic scene parameters (dataset = synthetic).
  std::size_t synthetic_peds = 50;
  std::size_t synthetic_frames = 20000;
  std::size_t synthetic_min_track = 300;
  std::size_t synthetic_max_track = 900;
  double synthetic_noise = 0.01;
  std::uint64_t synthetic_seed = 0;

  ModelConfig model_config() const;
  RmspropConfig optimizer() const;
  WindowConfig window() const;

  // Throws ConfigError on out-of-range values.
  void validate() const;

  // Ordered key=value pairs; parse_entries(to_entries()) reproduces the config.
  std::vector<std::pair<std::string, std::string>> to_entries() const;
  void set(const std::string& key, const std::string& value);
  static RunConfig from_entries(const std::vector<std::pair<std::string, std::string>>& entries);
};

// Reads key=value lines; '#' starts a comment line. Unknown keys are errors.
std::vector<std::pair<std::string, std::string>> read_key_values(std::istream& in);
RunConfig load_run_config(const std::string& path);

// "key=value\n" lines.
void write_run_config(std::ostream& out, const RunConfig& config);
// "# crowdlstm <version>" followed by "# key=value" lines.
void write_artifact_header(std::ostream& out, const RunConfig& config);

}  // namespace crowdlstm
