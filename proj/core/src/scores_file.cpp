#include "crowdlstm/scores_file.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "crowdlstm/dataset.hpp"

namespace crowdlstm {

void write_score_records(std::ostream& out, const std::vector<ScoreRecord>& records) {
  out << "# dataset frame target_id neighbor_id alpha\n" << std::setprecision(17);
  for (const auto& r : records) {
    out << r.dataset << ' ' << r.frame << ' ' << r.target_id << ' ' << r.neighbor_id << ' '
        << r.alpha << '\n';
  }
}

std::vector<ScoreRecord> read_score_records(std::istream& in) {
  std::vector<ScoreRecord> records;
  std::map<std::tuple<std::string, std::int64_t, std::int64_t>, double> sums;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    ScoreRecord r;
    std::string extra;
    if (!(ls >> r.dataset >> r.frame >> r.target_id >> r.neighbor_id >> r.alpha) || (ls >> extra)) {
      throw ParseError("expected 'dataset frame target_id neighbor_id alpha'", line_no);
    }
    if (!(r.alpha > 0.0) || !std::isfinite(r.alpha)) {
      throw ParseError("alpha must be positive and finite", line_no);
    }
    sums[{r.dataset, r.frame, r.target_id}] += r.alpha;
    records.push_back(r);
  }
  for (const auto& [key, sum] : sums) {
    if (std::abs(sum - 1.0) > kScoreSumTolerance) {
      std::ostringstream os;
      os << std::setprecision(17) << "scores of target " << std::get<2>(key) << " at frame "
         << std::get<1>(key) << " in " << std::get<0>(key) << " sum to " << sum;
      throw Error(os.str());
    }
  }
  return records;
}

FrozenScores::FrozenScores(const std::vector<ScoreRecord>& records) {
  for (const auto& r : records) table_[{r.dataset, r.frame, r.target_id}][r.neighbor_id] = r.alpha;
}

FrozenScores FrozenScores::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scores file " + path);
  return FrozenScores(read_score_records(in));
}

AttentionScores FrozenScores::lookup(const std::string& dataset, std::int64_t frame,
                                     std::int64_t target_id,
                                     const std::vector<std::int64_t>& neighbor_ids) const {
  AttentionScores out;
  out.target_id = target_id;
  if (neighbor_ids.empty()) return out;
  auto it = table_.find({dataset, frame, target_id});
  if (it == table_.end()) {
    throw Error("no frozen scores for target " + std::to_string(target_id) + " at frame " +
                std::to_string(frame) + " in " + dataset);
  }
  double sum = 0.0;
  for (std::int64_t id : neighbor_ids) {
    auto nb = it->second.find(id);
    if (nb == it->second.end()) {
      throw Error("no frozen score for neighbor " + std::to_string(id) + " of target " +
                  std::to_string(target_id) + " at frame " + std::to_string(frame));
    }
    out.neighbor_ids.push_back(id);
    out.weights.push_back(nb->second);
    sum += nb->second;
  }
  for (double& w : out.weights) w /= sum;
  return out;
}

}  // namespace crowdlstm
