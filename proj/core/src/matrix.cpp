#include "hyperformer/matrix.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>

#include "hyperformer/errors.hpp"

namespace hyperformer {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                         " does not match shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string Matrix::shape_string() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

bool bitwise_equal(const Matrix& a, const Matrix& b) noexcept {
  if (!a.same_shape(b)) return false;
  auto av = a.values();
  auto bv = b.values();
  return av.empty() || std::memcmp(av.data(), bv.data(), av.size_bytes()) == 0;
}

bool all_finite(const Matrix& m) noexcept {
  return std::all_of(m.values().begin(), m.values().end(),
                     [](double v) { return std::isfinite(v); });
}

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                       b.shape_string());
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      axpy(aik, b.row(k), out_row);
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      axpy(aki, b_row, out.row(i));
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

Matrix relu(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Matrix relu_backward(const Matrix& pre_activation, const Matrix& upstream) {
  if (!pre_activation.same_shape(upstream)) shape_error("relu_backward", pre_activation, upstream);
  Matrix out = upstream;
  auto pre = pre_activation.values();
  auto g = out.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(pre[i] > 0.0)) g[i] = 0.0;
  }
  return out;
}

void add_row_broadcast(Matrix& m, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != m.cols()) shape_error("add_row_broadcast", m, row);
  for (std::size_t i = 0; i < m.rows(); ++i) axpy(1.0, row.row(0), m.row(i));
}

Matrix column_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) axpy(1.0, m.row(i), out.row(0));
  return out;
}

void add_in_place(Matrix& target, const Matrix& delta) {
  if (!target.same_shape(delta)) shape_error("add_in_place", target, delta);
  axpy(1.0, delta.values(), target.values());
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: length " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double scale, std::span<const double> source, std::span<double> target) {
  if (source.size() != target.size()) {
    throw DimensionError("axpy: length " + std::to_string(source.size()) + " vs " +
                         std::to_string(target.size()));
  }
  for (std::size_t i = 0; i < source.size(); ++i) target[i] += scale * source[i];
}

void softmax_in_place(std::span<double> values) {
  if (values.empty()) throw PreconditionError("softmax over an empty set");
  const double max = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (double& v : values) {
    v = std::exp(v - max);
    total += v;
  }
  for (double& v : values) v /= total;
}

std::vector<double> masked_softmax(std::span<const double> scores,
                                   std::span<const std::size_t> active) {
  if (active.empty()) throw PreconditionError("masked_softmax: empty active index set");
  std::vector<double> picked;
  picked.reserve(active.size());
  for (std::size_t idx : active) {
    if (idx >= scores.size()) {
      throw DimensionError("masked_softmax: index " + std::to_string(idx) +
                           " out of range for " + std::to_string(scores.size()) + " scores");
    }
    if (!std::isfinite(scores[idx])) throw NumericError("masked_softmax: non-finite score");
    picked.push_back(scores[idx]);
  }
  softmax_in_place(picked);
  std::vector<double> out(scores.size(), 0.0);
  for (std::size_t k = 0; k < active.size(); ++k) out[active[k]] = picked[k];
  return out;
}

std::vector<double> concat_rows(std::span<const std::vector<double>> parts) {
  if (parts.empty()) throw PreconditionError("concat_rows: no parts");
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace hyperformer
