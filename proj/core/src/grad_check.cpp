#include "crowdlstm/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace crowdlstm {

GradCheckResult grad_check(const LossFn& loss_fn, ParamStore& store,
                           const GradCheckOptions& options) {
  store.zero_grad();
  loss_fn(store, true);
  std::vector<Matrix> analytic;
  analytic.reserve(store.size());
  for (const auto& p : store) analytic.push_back(p.grad);
  store.zero_grad();

  auto relative = [&](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), options.denominator_floor});
  };

  Rng rng(options.seed);
  GradCheckResult result;
  for (std::size_t pi = 0; pi < store.size(); ++pi) {
    auto& param = store[pi];
    const std::size_t n = param.value.size();
    std::vector<std::size_t> entries(n);
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (options.max_entries_per_param != 0 && n > options.max_entries_per_param) {
      shuffle(entries, rng);
      entries.resize(options.max_entries_per_param);
      std::sort(entries.begin(), entries.end());
    }

    for (std::size_t k : entries) {
      double& v = param.value.values()[k];
      const double saved = v;
      auto central = [&](double h) {
        v = saved + h;
        const double plus = loss_fn(store, false);
        v = saved - h;
        const double minus = loss_fn(store, false);
        v = saved;
        return (plus - minus) / (2.0 * h);
      };

      const double numeric = central(options.step);
      const double a = analytic[pi].values()[k];
      const double rel = relative(a, numeric);
      ++result.entries_checked;
      if (rel >= options.tolerance && options.skip_nonsmooth &&
          relative(central(0.5 * options.step), numeric) > options.tolerance) {
        ++result.nonsmooth_skipped;
        continue;
      }
      if (!(rel <= result.max_relative_error)) {
        result.max_relative_error = rel;
        result.worst_param = param.name;
        result.worst_index = k;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  store.zero_grad();
  result.passed = result.max_relative_error < options.tolerance;
  return result;
}

}  // namespace crowdlstm
