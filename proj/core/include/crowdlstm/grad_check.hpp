#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "crowdlstm/param_store.hpp"

namespace crowdlstm {

// Evaluates the loss at the store's current values. When `with_grad` is
// true the function must also accumulate analytic gradients into the
// store's grad buffers (the checker zeroes them first).
using LossFn = std::function<double(ParamStore& store, bool with_grad)>;

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Entries checked per parameter tensor; 0 checks every entry.
  std::size_t max_entries_per_param = 0;
  // Relative error is |a - n| / max(|a|, |n|, denominator_floor).
  double denominator_floor = 1e-6;
  // A mismatching entry is re-probed with step / 2. When the two central
  // differences disagree by more than the tolerance, the loss is not smooth
  // over [x - step, x + step] (a relu kink, say), the difference quotient is
  // no reference for the derivative, and the entry is counted as skipped
  // instead of compared.
  bool skip_nonsmooth = true;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
  std::size_t nonsmooth_skipped = 0;
  bool passed = true;
};

// Central differences (f(x + h) - f(x - h)) / 2h against analytic gradients.
// Parameter values are restored exactly afterwards.
GradCheckResult grad_check(const LossFn& loss_fn, ParamStore& store,
                           const GradCheckOptions& options = {});

}  // namespace crowdlstm
