#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hyperformer {

/// Dense row-major matrix of doubles. Row vectors are 1 x n matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  void fill(double value);
  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_string() const;

  /// Elementwise `==`; use `bitwise_equal` when signed zeros and NaN payloads matter.
  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Shapes and bit patterns of every element are identical.
bool bitwise_equal(const Matrix& a, const Matrix& b) noexcept;
bool all_finite(const Matrix& m) noexcept;

/// a * b. Throws DimensionError naming both shapes when a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);
/// transpose(a) * b, without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * transpose(b).
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix relu(const Matrix& m);
/// Upstream gradient masked by `pre > 0`.
Matrix relu_backward(const Matrix& pre_activation, const Matrix& upstream);

/// Adds `row` (1 x cols) to every row of `m`.
void add_row_broadcast(Matrix& m, const Matrix& row);
/// Column sums as a 1 x cols matrix.
Matrix column_sums(const Matrix& m);
void add_in_place(Matrix& target, const Matrix& delta);

double dot(std::span<const double> a, std::span<const double> b);
/// target += scale * source
void axpy(double scale, std::span<const double> source, std::span<double> target);

/// Softmax restricted to `active` indices of `scores`; every other entry of the
/// result is exactly zero. Uses max subtraction.
std::vector<double> masked_softmax(std::span<const double> scores,
                                   std::span<const std::size_t> active);

/// In-place softmax over all entries (max-subtracted). `values` must be non-empty.
void softmax_in_place(std::span<double> values);

/// Concatenates row vectors in order.
std::vector<double> concat_rows(std::span<const std::vector<double>> parts);

}  // namespace hyperformer
