#pragma once

#include <span>
#include <string>
#include <vector>

#include "crowdlstm/dataset.hpp"

namespace crowdlstm {

// Mean Euclidean distance over the horizon.
double ade(std::span<const Vec2> predicted, std::span<const Vec2> truth);
// Euclidean distance at the last frame.
double fde(std::span<const Vec2> predicted, std::span<const Vec2> truth);

struct DisplacementStats {
  double ade = 0.0;
  double fde = 0.0;
  std::size_t trajectories = 0;
};

// Running mean of per-trajectory ADE/FDE, added in call order.
class DisplacementAccumulator {
 public:
  void add(std::span<const Vec2> predicted, std::span<const Vec2> truth);
  DisplacementStats stats() const;

 private:
  double ade_sum_ = 0.0;
  double fde_sum_ = 0.0;
  std::size_t count_ = 0;
};

struct DatasetMetrics {
  std::string dataset;
  double ade = 0.0;
  double fde = 0.0;
  std::size_t trajectories = 0;
  // Identifies the test windows, so results on different splits are not
  // compared by accident.
  std::string split_fingerprint;
};

// (base - ours) / base, as a percentage. 0 when base is 0.
double improvement_percent(double base, double ours);

struct ComparisonRow {
  std::string dataset;
  double base_ade = 0.0;
  double ours_ade = 0.0;
  double base_fde = 0.0;
  double ours_fde = 0.0;
};

struct MetricsReport {
  std::vector<ComparisonRow> rows;
  double base_ade_avg = 0.0;
  double ours_ade_avg = 0.0;
  double base_fde_avg = 0.0;
  double ours_fde_avg = 0.0;
  double ade_improvement = 0.0;  // percent
  double fde_improvement = 0.0;  // percent
};

// `base` is the social-only baseline, `ours` the attention model; rows are
// matched by position and must share dataset name and split fingerprint.
MetricsReport compare(const std::vector<DatasetMetrics>& base,
                      const std::vector<DatasetMetrics>& ours);

// Table with one row per dataset plus the average and improvement rows.
std::string format_report(const MetricsReport& report, const std::string& base_name = "Social-LSTM",
                          const std::string& ours_name = "Attention-Social-LSTM");
void write_report_csv(std::ostream& out, const MetricsReport& report);

}  // namespace crowdlstm
