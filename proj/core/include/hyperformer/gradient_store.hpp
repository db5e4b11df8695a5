#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hyperformer/matrix.hpp"

namespace hyperformer {

/// Accumulated gradients for one training step, keyed by parameter name.
///
/// Dense parameters hold a full matrix. Row-sparse parameters (the embedding
/// table) hold only the rows that received a gradient, so rows of features
/// absent from a batch have no entry at all. Not thread-safe.
class GradientStore {
 public:
  using SparseRows = std::map<std::size_t, std::vector<double>>;

  /// Adds `grad` to the entry for `id`. Throws DimensionError if an existing
  /// entry has a different shape.
  void accumulate(const std::string& id, const Matrix& grad);
  void accumulate_row(const std::string& id, std::size_t row, std::span<const double> grad);

  const Matrix* dense(const std::string& id) const;
  const SparseRows* sparse(const std::string& id) const;

  const std::map<std::string, Matrix>& dense_entries() const noexcept { return dense_; }
  const std::map<std::string, SparseRows>& sparse_entries() const noexcept { return sparse_; }

  bool empty() const noexcept { return dense_.empty() && sparse_.empty(); }
  /// True when every stored gradient value is exactly zero.
  bool all_zero() const noexcept;

 private:
  std::map<std::string, Matrix> dense_;
  std::map<std::string, SparseRows> sparse_;
};

}  // namespace hyperformer
