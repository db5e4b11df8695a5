#include "hyperformer/gradient_store.hpp"

#include <algorithm>

#include "hyperformer/errors.hpp"

namespace hyperformer {

void GradientStore::accumulate(const std::string& id, const Matrix& grad) {
  auto [it, inserted] = dense_.try_emplace(id, grad);
  if (inserted) return;
  if (!it->second.same_shape(grad)) {
    throw DimensionError("gradient for '" + id + "' has shape " + grad.shape_string() +
                         ", expected " + it->second.shape_string());
  }
  add_in_place(it->second, grad);
}

void GradientStore::accumulate_row(const std::string& id, std::size_t row,
                                   std::span<const double> grad) {
  auto& rows = sparse_[id];
  if (!rows.empty() && rows.begin()->second.size() != grad.size()) {
    throw DimensionError("row gradient for '" + id + "' has width " +
                         std::to_string(grad.size()) + ", expected " +
                         std::to_string(rows.begin()->second.size()));
  }
  auto [it, inserted] = rows.try_emplace(row, grad.begin(), grad.end());
  if (!inserted) axpy(1.0, grad, it->second);
}

const Matrix* GradientStore::dense(const std::string& id) const {
  auto it = dense_.find(id);
  return it == dense_.end() ? nullptr : &it->second;
}

const GradientStore::SparseRows* GradientStore::sparse(const std::string& id) const {
  auto it = sparse_.find(id);
  return it == sparse_.end() ? nullptr : &it->second;
}

bool GradientStore::all_zero() const noexcept {
  auto zero = [](double v) { return v == 0.0; };
  for (const auto& [_, m] : dense_) {
    if (!std::all_of(m.values().begin(), m.values().end(), zero)) return false;
  }
  for (const auto& [_, rows] : sparse_) {
    for (const auto& [__, r] : rows) {
      if (!std::all_of(r.begin(), r.end(), zero)) return false;
    }
  }
  return true;
}

}  // namespace hyperformer
