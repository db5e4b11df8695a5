#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hyperformer/matrix.hpp"

namespace hyperformer {

/// Position-wise two-layer feed-forward: relu(x W1 + b1) W2 + b2.
struct FeedForwardParams {
  Matrix w1, b1, w2, b2;
};

/// Projections of one single-head incidence attention block.
struct AttentionParams {
  Matrix query;  ///< (query width) x d
  Matrix key;    ///< (key/value width) x d
  Matrix value;  ///< (key/value width) x d
  std::optional<FeedForwardParams> ffn;
};

/// Intermediates of one attention block, kept for the backward pass.
struct AttentionCache {
  Matrix queries;  ///< X_q W_Q
  Matrix keys;     ///< X_kv W_K
  Matrix values;   ///< X_kv W_V
  /// weights[r][k] is the attention of query row r on incidence[r][k].
  std::vector<std::vector<double>> weights;
  Matrix aggregate;  ///< sum_k weights[r][k] * values[incidence[r][k]], before the nonlinearity
  Matrix activated;  ///< relu(aggregate)
  Matrix ffn_pre;    ///< activated W1 + b1 (only with an FFN)
  Matrix ffn_hidden; ///< relu(ffn_pre)
  Matrix output;
};

/// Row r of the output attends over the kv rows listed in incidence[r]:
///   w_r = softmax_k( scale * (x_r W_Q) . (y_k W_K) ),
///   out_r = relu( sum_k w_rk y_k W_V ), followed by the FFN when present.
/// Every incidence list must be non-empty.
AttentionCache attention_forward(const Matrix& query_source, const Matrix& kv_source,
                                 std::span<const std::vector<std::size_t>> incidence,
                                 const AttentionParams& params, double score_scale);

struct AttentionGradients {
  Matrix query_source;
  Matrix kv_source;
  AttentionParams params;
};

AttentionGradients attention_backward(const Matrix& d_output, const Matrix& query_source,
                                      const Matrix& kv_source,
                                      std::span<const std::vector<std::size_t>> incidence,
                                      const AttentionParams& params, const AttentionCache& cache,
                                      double score_scale);

}  // namespace hyperformer
