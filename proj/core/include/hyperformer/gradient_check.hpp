#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace hyperformer {

struct GradientCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-5;
  /// Denominator floor for the relative error, so that gradients that are
  /// both ~0 are compared absolutely.
  double magnitude_floor = 1e-6;
  /// 0 checks every coordinate; otherwise a seeded sample of this many.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

struct CoordinateMismatch {
  std::size_t index;
  double analytic;
  double numeric;
  double relative_error;
};

struct GradientCheckReport {
  std::size_t checked = 0;
  double max_relative_error = 0.0;
  std::vector<CoordinateMismatch> failures;

  bool passed() const noexcept { return failures.empty(); }
};

using ScalarLoss = std::function<double(std::span<const double>)>;

/// Compares `analytic` against central differences (f(x+e) - f(x-e)) / 2e.
/// Relative error is |a - n| / max(|a|, |n|, magnitude_floor).
/// Throws NumericError if the loss is non-finite at any probe.
GradientCheckReport finite_difference_check(const ScalarLoss& loss,
                                            std::span<const double> params,
                                            std::span<const double> analytic,
                                            const GradientCheckOptions& options = {});

}  // namespace hyperformer
