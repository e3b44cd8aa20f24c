#include "crowdlstm/metrics.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

namespace crowdlstm {

namespace {

void check_horizons(std::span<const Vec2> predicted, std::span<const Vec2> truth) {
  if (predicted.size() != truth.size()) {
    throw DimensionError("displacement error: " + std::to_string(predicted.size()) +
                         " predicted vs " + std::to_string(truth.size()) + " true positions");
  }
  if (predicted.empty()) throw DimensionError("displacement error: empty horizon");
}

}  // namespace

double ade(std::span<const Vec2> predicted, std::span<const Vec2> truth) {
  check_horizons(predicted, truth);
  double sum = 0.0;
  for (std::size_t k = 0; k < predicted.size(); ++k) sum += distance(predicted[k], truth[k]);
  return sum / static_cast<double>(predicted.size());
}

double fde(std::span<const Vec2> predicted, std::span<const Vec2> truth) {
  check_horizons(predicted, truth);
  return distance(predicted.back(), truth.back());
}

void DisplacementAccumulator::add(std::span<const Vec2> predicted, std::span<const Vec2> truth) {
  ade_sum_ += ade(predicted, truth);
  fde_sum_ += fde(predicted, truth);
  ++count_;
}

DisplacementStats DisplacementAccumulator::stats() const {
  if (count_ == 0) return {};
  const auto n = static_cast<double>(count_);
  return {ade_sum_ / n, fde_sum_ / n, count_};
}

double improvement_percent(double base, double ours) {
  if (base == 0.0) return 0.0;
  return 100.0 * (base - ours) / base;
}

MetricsReport compare(const std::vector<DatasetMetrics>& base,
                      const std::vector<DatasetMetrics>& ours) {
  if (base.size() != ours.size() || base.empty()) {
    throw ConfigError("compare: both modes need results for the same, non-empty dataset list");
  }
  MetricsReport r;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (base[i].dataset != ours[i].dataset) {
      throw ConfigError("compare: dataset mismatch " + base[i].dataset + " vs " + ours[i].dataset);
    }
    if (base[i].split_fingerprint != ours[i].split_fingerprint) {
      throw ConfigError("compare: " + base[i].dataset +
                        " was evaluated on different test splits in the two modes");
    }
    r.rows.push_back({base[i].dataset, base[i].ade, ours[i].ade, base[i].fde, ours[i].fde});
    r.base_ade_avg += base[i].ade;
    r.ours_ade_avg += ours[i].ade;
    r.base_fde_avg += base[i].fde;
    r.ours_fde_avg += ours[i].fde;
  }
  const auto n = static_cast<double>(base.size());
  r.base_ade_avg /= n;
  r.ours_ade_avg /= n;
  r.base_fde_avg /= n;
  r.ours_fde_avg /= n;
  r.ade_improvement = improvement_percent(r.base_ade_avg, r.ours_ade_avg);
  r.fde_improvement = improvement_percent(r.base_fde_avg, r.ours_fde_avg);
  return r;
}

std::string format_report(const MetricsReport& r, const std::string& base_name,
                          const std::string& ours_name) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  const int w = static_cast<int>(std::max<std::size_t>(ours_name.size(), 12)) + 2;
  auto section = [&](const char* metric, auto base_of, auto ours_of, double base_avg,
                     double ours_avg, double impr) {
    os << std::left << std::setw(6) << metric << std::setw(10) << "Dataset" << std::right
       << std::setw(w) << base_name << std::setw(w) << ours_name << '\n';
    for (const auto& row : r.rows) {
      os << std::left << std::setw(6) << "" << std::setw(10) << row.dataset << std::right
         << std::setw(w) << base_of(row) << std::setw(w) << ours_of(row) << '\n';
    }
    os << std::left << std::setw(6) << "" << std::setw(10) << "Average" << std::right
       << std::setw(w) << base_avg << std::setw(w) << ours_avg << '\n';
    os << std::left << std::setw(6) << "" << std::setw(10) << "Improv." << std::right
       << std::setw(2 * w) << std::setprecision(1) << impr << "%" << std::setprecision(4) << '\n';
  };
  section("ADE", [](const ComparisonRow& x) { return x.base_ade; },
          [](const ComparisonRow& x) { return x.ours_ade; }, r.base_ade_avg, r.ours_ade_avg,
          r.ade_improvement);
  section("FDE", [](const ComparisonRow& x) { return x.base_fde; },
          [](const ComparisonRow& x) { return x.ours_fde; }, r.base_fde_avg, r.ours_fde_avg,
          r.fde_improvement);
  return os.str();
}

void write_report_csv(std::ostream& out, const MetricsReport& r) {
  out << std::setprecision(17);
  out << "dataset,base_ade,ours_ade,base_fde,ours_fde\n";
  for (const auto& row : r.rows) {
    out << row.dataset << ',' << row.base_ade << ',' << row.ours_ade << ',' << row.base_fde << ','
        << row.ours_fde << '\n';
  }
  out << "average," << r.base_ade_avg << ',' << r.ours_ade_avg << ',' << r.base_fde_avg << ','
      << r.ours_fde_avg << '\n';
  out << "improvement_percent," << r.ade_improvement << ",," << r.fde_improvement << ",\n";
}

}  // namespace crowdlstm
