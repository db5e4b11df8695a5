#include "hyperformer/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hyperformer/errors.hpp"
#include "hyperformer/rng.hpp"

namespace hyperformer {

GradientCheckReport finite_difference_check(const ScalarLoss& loss,
                                            std::span<const double> params,
                                            std::span<const double> analytic,
                                            const GradientCheckOptions& options) {
  if (params.size() != analytic.size()) {
    throw DimensionError("finite_difference_check: " + std::to_string(params.size()) +
                         " parameters but " + std::to_string(analytic.size()) + " gradients");
  }
  if (!(options.epsilon > 0.0)) throw PreconditionError("finite_difference_check: epsilon <= 0");

  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coordinates != 0 && options.max_coordinates < coords.size()) {
    Rng rng(options.seed);
    rng.shuffle(coords);
    coords.resize(options.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  auto evaluate = [&](std::span<const double> at) {
    const double value = loss(at);
    if (!std::isfinite(value)) throw NumericError("finite_difference_check: non-finite loss");
    return value;
  };
  evaluate(params);

  std::vector<double> probe(params.begin(), params.end());
  GradientCheckReport report;
  for (std::size_t idx : coords) {
    const double original = probe[idx];
    probe[idx] = original + options.epsilon;
    const double plus = evaluate(probe);
    probe[idx] = original - options.epsilon;
    const double minus = evaluate(probe);
    probe[idx] = original;

    const double numeric = (plus - minus) / (2.0 * options.epsilon);
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), options.magnitude_floor});
    const double rel = std::abs(a - numeric) / denom;
    report.max_relative_error = std::max(report.max_relative_error, rel);
    ++report.checked;
    if (!(rel <= options.tolerance)) report.failures.push_back({idx, a, numeric, rel});
  }
  return report;
}

}  // namespace hyperformer
