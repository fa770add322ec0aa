#include "dyhsl/gradcheck.hpp"

#include <cmath>

#include "dyhsl/error.hpp"

namespace dyhsl {

GradCheckResult finite_difference_check(const std::function<ValueAndGrad(const Tensor&)>& f, const Tensor& theta,
                                        double step) {
  const ValueAndGrad at = f(theta);
  if (!std::isfinite(at.value)) throw NumericError("finite_difference_check: non-finite value at theta");
  return finite_difference_check([&](const Tensor& x) { return f(x).value; }, theta, at.grad, step);
}

double relative_error(double analytic, double numeric) noexcept {
  return std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-12);
}

GradCheckResult compare_gradients(const Tensor& analytic, const Tensor& numeric) {
  if (analytic.shape() != numeric.shape()) {
    throw DimensionError("compare_gradients: gradient shape " + shape_string(analytic.shape()) +
                         " differs from " + shape_string(numeric.shape()));
  }
  GradCheckResult result;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double err = relative_error(analytic[i], numeric[i]);
    if (i == 0 || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = i;
      result.analytic_at_worst = analytic[i];
      result.numeric_at_worst = numeric[i];
    }
  }
  return result;
}

GradCheckResult finite_difference_check(const std::function<double(const Tensor&)>& value, const Tensor& theta,
                                        const Tensor& analytic, double step) {
  if (analytic.shape() != theta.shape()) {
    throw DimensionError("finite_difference_check: gradient shape " + shape_string(analytic.shape()) +
                         " differs from parameter shape " + shape_string(theta.shape()));
  }
  if (!(step > 0.0)) throw ContractError("finite_difference_check: step must be positive");
  Tensor numeric(theta.shape());
  Tensor probe = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + step;
    const double plus = value(probe);
    probe[i] = theta[i] - step;
    const double minus = value(probe);
    probe[i] = theta[i];
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericError("finite_difference_check: non-finite evaluation at coordinate " + std::to_string(i));
    }
    numeric[i] = (plus - minus) / (2.0 * step);
  }
  return compare_gradients(analytic, numeric);
}

}  // namespace dyhsl
