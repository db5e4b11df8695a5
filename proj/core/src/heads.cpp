#include "hyperformer/heads.hpp"

#include <cmath>

#include "hyperformer/errors.hpp"

namespace hyperformer {

std::string_view to_string(HeadKind kind) noexcept {
  switch (kind) {
    case HeadKind::logistic: return "logistic";
    case HeadKind::mlp: return "mlp";
    case HeadKind::crossnet: return "crossnet";
    case HeadKind::two_tower: return "two-tower";
  }
  return "unknown";
}

HeadKind parse_head_kind(std::string_view name) {
  if (name == "logistic") return HeadKind::logistic;
  if (name == "mlp") return HeadKind::mlp;
  if (name == "crossnet") return HeadKind::crossnet;
  if (name == "two-tower" || name == "two_tower") return HeadKind::two_tower;
  throw PreconditionError("unknown head kind '" + std::string(name) + "'");
}

std::vector<std::string> Head::param_names(HeadKind kind) {
  switch (kind) {
    case HeadKind::logistic: return {"w", "b"};
    case HeadKind::mlp: return {"w1", "b1", "w2", "b2", "w3", "b3"};
    case HeadKind::crossnet: return {"cross_w", "cross_b", "out_w", "out_b"};
    case HeadKind::two_tower:
      return {"user_w1", "user_b1", "user_w2", "user_b2",
              "item_w1", "item_b1", "item_w2", "item_b2"};
  }
  return {};
}

Head Head::create(HeadKind kind, std::size_t input_width, std::size_t hidden,
                  std::size_t tower_width, std::size_t user_width) {
  if (input_width == 0) throw PreconditionError("head input width must be positive");
  Head h;
  h.kind = kind;
  h.input_width = input_width;
  switch (kind) {
    case HeadKind::logistic:
      h.params = {Matrix(input_width, 1), Matrix(1, 1)};
      break;
    case HeadKind::mlp:
      if (hidden == 0) throw PreconditionError("mlp head needs a positive hidden width");
      h.params = {Matrix(input_width, hidden), Matrix(1, hidden), Matrix(hidden, hidden),
                  Matrix(1, hidden), Matrix(hidden, 1), Matrix(1, 1)};
      break;
    case HeadKind::crossnet:
      h.params = {Matrix(input_width, input_width), Matrix(1, input_width),
                  Matrix(input_width, 1), Matrix(1, 1)};
      break;
    case HeadKind::two_tower: {
      if (user_width == 0 || user_width >= input_width) {
        throw PreconditionError("two-tower head needs 0 < user width < input width");
      }
      if (hidden == 0 || tower_width == 0) {
        throw PreconditionError("two-tower head needs positive hidden and tower widths");
      }
      h.user_width = user_width;
      const std::size_t item_width = input_width - user_width;
      h.params = {Matrix(user_width, hidden), Matrix(1, hidden), Matrix(hidden, tower_width),
                  Matrix(1, tower_width),     Matrix(item_width, hidden), Matrix(1, hidden),
                  Matrix(hidden, tower_width), Matrix(1, tower_width)};
      break;
    }
  }
  return h;
}

namespace {

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix out = matmul(x, w);
  add_row_broadcast(out, b);
  return out;
}

Matrix columns(const Matrix& m, std::size_t begin, std::size_t end) {
  Matrix out(m.rows(), end - begin);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = m(r, c);
  }
  return out;
}

std::vector<double> column_vector(const Matrix& m) {
  return {m.values().begin(), m.values().end()};
}

Matrix as_column(std::span<const double> v) {
  return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
}

struct TowerStages {
  Matrix pre, hidden, out;
};

TowerStages tower_forward(const Matrix& x, const Matrix& w1, const Matrix& b1, const Matrix& w2,
                          const Matrix& b2) {
  TowerStages s;
  s.pre = affine(x, w1, b1);
  s.hidden = relu(s.pre);
  s.out = affine(s.hidden, w2, b2);
  return s;
}

/// Returns d_input; appends (dw1, db1, dw2, db2) to `grads`.
Matrix tower_backward(const Matrix& x, const Matrix& pre, const Matrix& hidden, const Matrix& w1,
                      const Matrix& w2, const Matrix& d_out, std::vector<Matrix>& grads) {
  const Matrix d_hidden = matmul_nt(d_out, w2);
  const Matrix d_pre = relu_backward(pre, d_hidden);
  grads.push_back(matmul_tn(x, d_pre));
  grads.push_back(column_sums(d_pre));
  grads.push_back(matmul_tn(hidden, d_out));
  grads.push_back(column_sums(d_out));
  return matmul_nt(d_pre, w1);
}

}  // namespace

HeadCache head_forward(const Head& head, const Matrix& embeddings) {
  if (embeddings.cols() != head.input_width) {
    throw DimensionError("head expects width " + std::to_string(head.input_width) +
                         ", got embeddings " + embeddings.shape_string());
  }
  HeadCache c;
  c.input = embeddings;
  const auto& p = head.params;
  switch (head.kind) {
    case HeadKind::logistic:
      c.logits = column_vector(affine(embeddings, p[0], p[1]));
      break;
    case HeadKind::mlp: {
      Matrix a1 = affine(embeddings, p[0], p[1]);
      Matrix r1 = relu(a1);
      Matrix a2 = affine(r1, p[2], p[3]);
      Matrix r2 = relu(a2);
      c.logits = column_vector(affine(r2, p[4], p[5]));
      c.stages = {std::move(a1), std::move(r1), std::move(a2), std::move(r2)};
      break;
    }
    case HeadKind::crossnet: {
      Matrix cross = affine(embeddings, p[0], p[1]);
      Matrix x1 = embeddings;
      for (std::size_t i = 0; i < x1.size(); ++i) {
        x1.values()[i] += embeddings.values()[i] * cross.values()[i];
      }
      c.logits = column_vector(affine(x1, p[2], p[3]));
      c.stages = {std::move(cross), std::move(x1)};
      break;
    }
    case HeadKind::two_tower: {
      Matrix eu = columns(embeddings, 0, head.user_width);
      Matrix ev = columns(embeddings, head.user_width, head.input_width);
      auto u = tower_forward(eu, p[0], p[1], p[2], p[3]);
      auto v = tower_forward(ev, p[4], p[5], p[6], p[7]);
      c.logits.resize(embeddings.rows());
      for (std::size_t r = 0; r < embeddings.rows(); ++r) c.logits[r] = dot(u.out.row(r), v.out.row(r));
      c.stages = {std::move(eu), std::move(u.pre), std::move(u.hidden), std::move(u.out),
                  std::move(ev), std::move(v.pre), std::move(v.hidden), std::move(v.out)};
      break;
    }
  }
  return c;
}

HeadGradients head_backward(const Head& head, const HeadCache& cache,
                            std::span<const double> d_logits) {
  if (d_logits.size() != cache.logits.size()) {
    throw DimensionError("head_backward: " + std::to_string(d_logits.size()) +
                         " upstream gradients for " + std::to_string(cache.logits.size()) +
                         " logits");
  }
  const auto& p = head.params;
  const Matrix dz = as_column(d_logits);
  HeadGradients g;
  switch (head.kind) {
    case HeadKind::logistic:
      g.params = {matmul_tn(cache.input, dz), column_sums(dz)};
      g.input = matmul_nt(dz, p[0]);
      break;
    case HeadKind::mlp: {
      const Matrix& a1 = cache.stages[0];
      const Matrix& r1 = cache.stages[1];
      const Matrix& a2 = cache.stages[2];
      const Matrix& r2 = cache.stages[3];
      const Matrix d_r2 = matmul_nt(dz, p[4]);
      const Matrix d_a2 = relu_backward(a2, d_r2);
      const Matrix d_r1 = matmul_nt(d_a2, p[2]);
      const Matrix d_a1 = relu_backward(a1, d_r1);
      g.params = {matmul_tn(cache.input, d_a1), column_sums(d_a1), matmul_tn(r1, d_a2),
                  column_sums(d_a2),            matmul_tn(r2, dz),  column_sums(dz)};
      g.input = matmul_nt(d_a1, p[0]);
      break;
    }
    case HeadKind::crossnet: {
      const Matrix& cross = cache.stages[0];
      const Matrix& x1 = cache.stages[1];
      const Matrix d_x1 = matmul_nt(dz, p[2]);
      Matrix d_cross = d_x1;
      Matrix d_input = d_x1;
      for (std::size_t i = 0; i < d_x1.size(); ++i) {
        d_cross.values()[i] *= cache.input.values()[i];
        d_input.values()[i] += d_x1.values()[i] * cross.values()[i];
      }
      add_in_place(d_input, matmul_nt(d_cross, p[0]));
      g.params = {matmul_tn(cache.input, d_cross), column_sums(d_cross), matmul_tn(x1, dz),
                  column_sums(dz)};
      g.input = std::move(d_input);
      break;
    }
    case HeadKind::two_tower: {
      const auto& s = cache.stages;
      Matrix d_u(s[3].rows(), s[3].cols());
      Matrix d_v(s[7].rows(), s[7].cols());
      for (std::size_t r = 0; r < d_u.rows(); ++r) {
        axpy(d_logits[r], s[7].row(r), d_u.row(r));
        axpy(d_logits[r], s[3].row(r), d_v.row(r));
      }
      const Matrix d_eu = tower_backward(s[0], s[1], s[2], p[0], p[2], d_u, g.params);
      const Matrix d_ev = tower_backward(s[4], s[5], s[6], p[4], p[6], d_v, g.params);
      g.input = Matrix(cache.input.rows(), cache.input.cols());
      for (std::size_t r = 0; r < g.input.rows(); ++r) {
        auto row = g.input.row(r);
        std::copy(d_eu.row(r).begin(), d_eu.row(r).end(), row.begin());
        std::copy(d_ev.row(r).begin(), d_ev.row(r).end(),
                  row.begin() + static_cast<std::ptrdiff_t>(head.user_width));
      }
      break;
    }
  }
  return g;
}

double predict_head(std::span<const double> embedding, const Head& head) {
  return head_forward(head, Matrix::row_vector(embedding)).logits.front();
}

namespace {

std::vector<double> run_tower(const Head& head, std::size_t offset, std::size_t width,
                              std::span<const double> x) {
  if (head.kind != HeadKind::two_tower) throw PreconditionError("not a two-tower head");
  if (x.size() != width) {
    throw DimensionError("tower expects width " + std::to_string(width) + ", got " +
                         std::to_string(x.size()));
  }
  const auto& p = head.params;
  auto s = tower_forward(Matrix::row_vector(x), p[offset], p[offset + 1], p[offset + 2],
                         p[offset + 3]);
  return {s.out.values().begin(), s.out.values().end()};
}

}  // namespace

std::vector<double> user_tower(const Head& head, std::span<const double> user_embedding) {
  return run_tower(head, 0, head.user_width, user_embedding);
}

std::vector<double> item_tower(const Head& head, std::span<const double> item_embedding) {
  return run_tower(head, 4, head.input_width - head.user_width, item_embedding);
}

double two_tower_score(std::span<const double> user_embedding,
                       std::span<const double> item_embedding, const Head& head) {
  const auto u = user_tower(head, user_embedding);
  const auto v = item_tower(head, item_embedding);
  if (u.size() != v.size()) throw DimensionError("tower output widths differ");
  return dot(u, v);
}

double xavier_limit(std::size_t fan_in, std::size_t fan_out) noexcept {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void xavier_fill(Matrix& m, Rng& rng) {
  const double limit = xavier_limit(m.rows(), m.cols());
  for (double& v : m.values()) v = rng.uniform(-limit, limit);
}

}  // namespace hyperformer
