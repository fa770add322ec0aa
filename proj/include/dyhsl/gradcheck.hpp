#pragma once

#include <cstddef>
#include <functional>

#include "dyhsl/tensor.hpp"

namespace dyhsl {

struct ValueAndGrad {
  double value = 0.0;
  Tensor grad;
};

struct GradCheckResult {
  /// max_i |analytic_i - numeric_i| / (|analytic_i| + |numeric_i| + 1e-12)
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/// |analytic - numeric| / (|analytic| + |numeric| + 1e-12)
double relative_error(double analytic, double numeric) noexcept;

/// Coordinate-wise comparison of two gradients of equal shape.
GradCheckResult compare_gradients(const Tensor& analytic, const Tensor& numeric);

/// Compares the analytic gradient returned by `f` at `theta` against central
/// differences with step `step`, coordinate by coordinate.
GradCheckResult finite_difference_check(const std::function<ValueAndGrad(const Tensor&)>& f, const Tensor& theta,
                                        double step);

/// Same check with the analytic gradient already known; `value` evaluates the
/// scalar function only.
GradCheckResult finite_difference_check(const std::function<double(const Tensor&)>& value, const Tensor& theta,
                                        const Tensor& analytic, double step);

}  // namespace dyhsl
