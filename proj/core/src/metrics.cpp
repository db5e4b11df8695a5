#include "hyperformer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hyperformer/errors.hpp"

namespace hyperformer {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of positive mid-ranks (1-based).
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) ++end;
    const double mid_rank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) {
      if (labels[order[k]] == 1) {
        positive_rank_sum += mid_rank;
        ++positives;
      } else if (labels[order[k]] != 0) {
        throw PreconditionError("auc: label outside {0,1}");
      }
    }
    start = end;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw PreconditionError("AUC undefined: labels contain a single class");
  }
  const double p = static_cast<double>(positives);
  const double n = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double logloss(std::span<const double> probabilities, std::span<const int> labels) {
  if (probabilities.size() != labels.size()) {
    throw DimensionError("logloss: probabilities and labels differ in length");
  }
  if (probabilities.empty()) throw PreconditionError("logloss: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(probabilities[i], kProbabilityClip, 1.0 - kProbabilityClip);
    total -= labels[i] == 1 ? std::log(p) : std::log1p(-p);
  }
  return total / static_cast<double>(probabilities.size());
}

namespace {

void check_ranking_args(const std::unordered_set<ItemId>& relevant, std::size_t k) {
  if (relevant.empty()) throw PreconditionError("ranking metric: empty relevant set");
  if (k == 0) throw PreconditionError("ranking metric: K must be >= 1");
}

}  // namespace

double ndcg_at_k(std::span<const ItemId> ranked, const std::unordered_set<ItemId>& relevant,
                 std::size_t k) {
  check_ranking_args(relevant, k);
  double dcg = 0.0;
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t r = 0; r < depth; ++r) {
    if (relevant.contains(ranked[r])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  double ideal = 0.0;
  const std::size_t hits = std::min(k, relevant.size());
  for (std::size_t r = 0; r < hits; ++r) ideal += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / ideal;
}

double recall_at_k(std::span<const ItemId> ranked, const std::unordered_set<ItemId>& relevant,
                   std::size_t k) {
  check_ranking_args(relevant, k);
  std::size_t hits = 0;
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t r = 0; r < depth; ++r) hits += relevant.contains(ranked[r]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

}  // namespace hyperformer
