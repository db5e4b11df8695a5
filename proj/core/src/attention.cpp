#include "hyperformer/attention.hpp"

#include "hyperformer/errors.hpp"

namespace hyperformer {

AttentionCache attention_forward(const Matrix& query_source, const Matrix& kv_source,
                                 std::span<const std::vector<std::size_t>> incidence,
                                 const AttentionParams& params, double score_scale) {
  if (incidence.size() != query_source.rows()) {
    throw DimensionError("attention: " + std::to_string(incidence.size()) +
                         " incidence lists for query source " + query_source.shape_string());
  }
  AttentionCache c;
  c.queries = matmul(query_source, params.query);
  c.keys = matmul(kv_source, params.key);
  c.values = matmul(kv_source, params.value);
  if (c.queries.cols() != c.keys.cols()) {
    throw DimensionError("attention: query projection " + params.query.shape_string() +
                         " and key projection " + params.key.shape_string() + " disagree");
  }

  const std::size_t rows = query_source.rows();
  const std::size_t width = c.values.cols();
  c.weights.resize(rows);
  c.aggregate = Matrix(rows, width);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& targets = incidence[r];
    if (targets.empty()) {
      throw PreconditionError("attention: row " + std::to_string(r) + " has no incident entries");
    }
    auto& w = c.weights[r];
    w.resize(targets.size());
    for (std::size_t k = 0; k < targets.size(); ++k) {
      if (targets[k] >= kv_source.rows()) {
        throw DimensionError("attention: incidence index out of range");
      }
      w[k] = score_scale * dot(c.queries.row(r), c.keys.row(targets[k]));
    }
    softmax_in_place(w);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      axpy(w[k], c.values.row(targets[k]), c.aggregate.row(r));
    }
  }
  c.activated = relu(c.aggregate);

  if (params.ffn) {
    c.ffn_pre = matmul(c.activated, params.ffn->w1);
    add_row_broadcast(c.ffn_pre, params.ffn->b1);
    c.ffn_hidden = relu(c.ffn_pre);
    c.output = matmul(c.ffn_hidden, params.ffn->w2);
    add_row_broadcast(c.output, params.ffn->b2);
  } else {
    c.output = c.activated;
  }
  return c;
}

AttentionGradients attention_backward(const Matrix& d_output, const Matrix& query_source,
                                      const Matrix& kv_source,
                                      std::span<const std::vector<std::size_t>> incidence,
                                      const AttentionParams& params, const AttentionCache& cache,
                                      double score_scale) {
  if (!d_output.same_shape(cache.output)) {
    throw DimensionError("attention_backward: upstream " + d_output.shape_string() +
                         " vs output " + cache.output.shape_string());
  }
  AttentionGradients g;

  Matrix d_activated;
  if (params.ffn) {
    const auto& ffn = *params.ffn;
    FeedForwardParams d_ffn;
    d_ffn.w2 = matmul_tn(cache.ffn_hidden, d_output);
    d_ffn.b2 = column_sums(d_output);
    const Matrix d_pre = relu_backward(cache.ffn_pre, matmul_nt(d_output, ffn.w2));
    d_ffn.w1 = matmul_tn(cache.activated, d_pre);
    d_ffn.b1 = column_sums(d_pre);
    d_activated = matmul_nt(d_pre, ffn.w1);
    g.params.ffn = std::move(d_ffn);
  } else {
    d_activated = d_output;
  }
  const Matrix d_aggregate = relu_backward(cache.aggregate, d_activated);

  Matrix d_queries(cache.queries.rows(), cache.queries.cols());
  Matrix d_keys(cache.keys.rows(), cache.keys.cols());
  Matrix d_values(cache.values.rows(), cache.values.cols());
  std::vector<double> d_weights;
  for (std::size_t r = 0; r < incidence.size(); ++r) {
    const auto& targets = incidence[r];
    const auto& w = cache.weights[r];
    const auto dz = d_aggregate.row(r);
    d_weights.resize(targets.size());
    double weighted = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
      axpy(w[k], dz, d_values.row(targets[k]));
      d_weights[k] = dot(dz, cache.values.row(targets[k]));
      weighted += w[k] * d_weights[k];
    }
    // Softmax Jacobian: ds_k = w_k (dw_k - sum_j w_j dw_j).
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const double d_score = score_scale * w[k] * (d_weights[k] - weighted);
      if (d_score == 0.0) continue;
      axpy(d_score, cache.keys.row(targets[k]), d_queries.row(r));
      axpy(d_score, cache.queries.row(r), d_keys.row(targets[k]));
    }
  }

  g.params.query = matmul_tn(query_source, d_queries);
  g.params.key = matmul_tn(kv_source, d_keys);
  g.params.value = matmul_tn(kv_source, d_values);
  g.query_source = matmul_nt(d_queries, params.query);
  g.kv_source = matmul_nt(d_keys, params.key);
  add_in_place(g.kv_source, matmul_nt(d_values, params.value));
  return g;
}

}  // namespace hyperformer
