#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "hyperformer/gradient_store.hpp"
#include "hyperformer/matrix.hpp"
#include "hyperformer/model.hpp"

namespace hyperformer {

struct AdamConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct Moments {
  Matrix first;
  Matrix second;
};

struct OptimizerState {
  std::map<std::string, Moments> moments;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam. Parameters without a gradient entry are untouched;
/// for row-sparse gradients only the listed rows (and their moments) change.
/// Bias correction uses the global step count.
void adam_step(ModelState& state, const GradientStore& grads, OptimizerState& opt,
               const AdamConfig& config);

}  // namespace hyperformer
