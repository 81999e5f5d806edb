#include "surgant/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "surgant/errors.hpp"

namespace surgant {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

GradientComparison compare_with_finite_differences(const std::function<double()>& objective, Tensor param,
                                                   std::span<const double> analytic, double step) {
  if (analytic.size() != param.numel()) {
    throw ShapeError("gradient buffer of length " + std::to_string(analytic.size()) + " for parameter " +
                     shape_to_string(param.shape()));
  }
  GradientComparison result;
  auto values = param.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double plus = objective();
    values[i] = saved - step;
    const double minus = objective();
    values[i] = saved;
    const double numeric = (plus - minus) / (2.0 * step);
    result.max_relative_error = std::max(result.max_relative_error, relative_error(analytic[i], numeric));
    result.max_abs_error = std::max(result.max_abs_error, std::abs(analytic[i] - numeric));
    ++result.entries;
  }
  return result;
}

}  // namespace surgant
