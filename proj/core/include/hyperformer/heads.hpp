#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hyperformer/matrix.hpp"
#include "hyperformer/rng.hpp"

namespace hyperformer {

enum class HeadKind { logistic, mlp, crossnet, two_tower };

std::string_view to_string(HeadKind kind) noexcept;
/// Accepts "logistic", "mlp", "crossnet", "two-tower". Throws PreconditionError otherwise.
HeadKind parse_head_kind(std::string_view name);

/// Prediction head consuming instance embeddings (one row per instance).
///
/// Parameter layout by kind:
///   logistic   w (in x 1), b (1 x 1)
///   mlp        w1 (in x h), b1, w2 (h x h), b2, w3 (h x 1), b3
///   crossnet   cross_w (in x in), cross_b, out_w (in x 1), out_b
///   two_tower  user_w1 (in_u x h), user_b1, user_w2 (h x t), user_b2,
///              item_w1 (in_v x h), item_b1, item_w2 (h x t), item_b2
/// where the two-tower input splits at `user_width` columns.
struct Head {
  HeadKind kind = HeadKind::logistic;
  std::size_t input_width = 0;
  std::size_t user_width = 0;
  std::vector<Matrix> params;

  static Head create(HeadKind kind, std::size_t input_width, std::size_t hidden,
                     std::size_t tower_width, std::size_t user_width);
  static std::vector<std::string> param_names(HeadKind kind);
};

struct HeadCache {
  Matrix input;
  std::vector<Matrix> stages;
  std::vector<double> logits;
};

/// One logit per row of `embeddings`.
HeadCache head_forward(const Head& head, const Matrix& embeddings);

struct HeadGradients {
  Matrix input;
  std::vector<Matrix> params;
};

HeadGradients head_backward(const Head& head, const HeadCache& cache,
                            std::span<const double> d_logits);

/// Logit for a single instance embedding.
double predict_head(std::span<const double> embedding, const Head& head);

/// Tower outputs for one side of a two-tower head.
std::vector<double> user_tower(const Head& head, std::span<const double> user_embedding);
std::vector<double> item_tower(const Head& head, std::span<const double> item_embedding);

/// dot(user_tower(e_u), item_tower(e_v)).
double two_tower_score(std::span<const double> user_embedding,
                       std::span<const double> item_embedding, const Head& head);

/// Xavier-uniform limit sqrt(6 / (fan_in + fan_out)).
double xavier_limit(std::size_t fan_in, std::size_t fan_out) noexcept;
void xavier_fill(Matrix& m, Rng& rng);

}  // namespace hyperformer
