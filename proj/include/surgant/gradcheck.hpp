#pragma once

#include <functional>
#include <span>

#include "surgant/tensor.hpp"

namespace surgant {

inline constexpr double kFiniteDifferenceStep = 1e-5;
// Gradients smaller than this are compared on an absolute scale.
inline constexpr double kRelativeErrorFloor = 1e-6;

// |a - n| / max(|a|, |n|, kRelativeErrorFloor)
double relative_error(double analytic, double numeric);

struct GradientComparison {
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t entries = 0;
};

// Central differences of `objective` with respect to every entry of `param`,
// compared against `analytic`. The parameter is restored after each probe.
GradientComparison compare_with_finite_differences(const std::function<double()>& objective, Tensor param,
                                                   std::span<const double> analytic,
                                                   double step = kFiniteDifferenceStep);

}  // namespace surgant
