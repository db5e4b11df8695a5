#include "hyperformer/optimizer.hpp"

#include <cmath>
#include <set>

#include "hyperformer/errors.hpp"

namespace hyperformer {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw PreconditionError("adam: learning_rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw PreconditionError("adam: beta1 must lie in (0,1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw PreconditionError("adam: beta2 must lie in (0,1)");
  if (!(epsilon > 0.0)) throw PreconditionError("adam: epsilon must be positive");
}

namespace {

struct StepScalars {
  double lr, b1, b2, eps, correction1, correction2;
};

void update_span(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const StepScalars& k) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = k.b1 * m[i] + (1.0 - k.b1) * g;
    v[i] = k.b2 * v[i] + (1.0 - k.b2) * g * g;
    const double m_hat = m[i] / k.correction1;
    const double v_hat = v[i] / k.correction2;
    param[i] -= k.lr * m_hat / (std::sqrt(v_hat) + k.eps);
  }
}

Moments& moments_for(OptimizerState& opt, const std::string& name, const Matrix& param) {
  auto [it, inserted] = opt.moments.try_emplace(name);
  if (inserted) {
    it->second.first = Matrix(param.rows(), param.cols());
    it->second.second = Matrix(param.rows(), param.cols());
  } else if (!it->second.first.same_shape(param)) {
    throw DimensionError("adam: moments for '" + name + "' have shape " +
                         it->second.first.shape_string() + ", parameter is " +
                         param.shape_string());
  }
  return it->second;
}

}  // namespace

void adam_step(ModelState& state, const GradientStore& grads, OptimizerState& opt,
               const AdamConfig& config) {
  config.validate();
  std::set<std::string> known;
  for (const auto& p : state.parameters()) known.insert(p.name);
  auto check_known = [&](const std::string& name) {
    if (!known.count(name)) throw PreconditionError("adam: gradient for unknown parameter '" + name + "'");
  };
  for (const auto& [name, g] : grads.dense_entries()) check_known(name);
  for (const auto& [name, g] : grads.sparse_entries()) check_known(name);
  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const StepScalars k{config.learning_rate,
                      config.beta1,
                      config.beta2,
                      config.epsilon,
                      1.0 - std::pow(config.beta1, t),
                      1.0 - std::pow(config.beta2, t)};

  for (auto& p : state.parameters()) {
    if (const Matrix* g = grads.dense(p.name)) {
      if (!g->same_shape(*p.value)) {
        throw DimensionError("adam: gradient for '" + p.name + "' has shape " +
                             g->shape_string() + ", parameter is " + p.value->shape_string());
      }
      auto& mo = moments_for(opt, p.name, *p.value);
      update_span(p.value->values(), g->values(), mo.first.values(), mo.second.values(), k);
    }
    if (const auto* rows = grads.sparse(p.name)) {
      auto& mo = moments_for(opt, p.name, *p.value);
      for (const auto& [r, g] : *rows) {
        if (r >= p.value->rows() || g.size() != p.value->cols()) {
          throw DimensionError("adam: sparse gradient row " + std::to_string(r) +
                               " does not fit '" + p.name + "' " + p.value->shape_string());
        }
        update_span(p.value->row(r), g, mo.first.row(r), mo.second.row(r), k);
      }
    }
  }
}

}  // namespace hyperformer
