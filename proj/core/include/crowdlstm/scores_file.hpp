#pragma once

// Plain-text attention score exchange. One record per line, whitespace
// separated, in this column order:
//
//   dataset frame target_id neighbor_id alpha
//
// Lines starting with '#' are comments. For every (dataset, frame, target)
// the alphas must be positive and sum to 1 within 1e-9.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "crowdlstm/attention.hpp"

namespace crowdlstm {

struct ScoreRecord {
  std::string dataset;
  std::int64_t frame = 0;
  std::int64_t target_id = 0;
  std::int64_t neighbor_id = 0;
  double alpha = 0.0;

  bool operator==(const ScoreRecord&) const = default;
};

inline constexpr double kScoreSumTolerance = 1e-9;

void write_score_records(std::ostream& out, const std::vector<ScoreRecord>& records);
// Throws ParseError on malformed lines and Error on a target whose scores
// are not normalized.
std::vector<ScoreRecord> read_score_records(std::istream& in);

// Externally produced scores looked up during training and rollouts.
class FrozenScores {
 public:
  FrozenScores() = default;
  explicit FrozenScores(const std::vector<ScoreRecord>& records);
  static FrozenScores load(const std::string& path);

  bool empty() const { return table_.empty(); }

  // Scores of `neighbor_ids` (caller order), renormalized over that subset.
  // Throws if the target or any neighbor has no record at this frame.
  AttentionScores lookup(const std::string& dataset, std::int64_t frame, std::int64_t target_id,
                         const std::vector<std::int64_t>& neighbor_ids) const;

 private:
  using Key = std::tuple<std::string, std::int64_t, std::int64_t>;
  std::map<Key, std::map<std::int64_t, double>> table_;
};

}  // namespace crowdlstm
