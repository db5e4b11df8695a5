#pragma once

#include <cstddef>
#include <span>
#include <unordered_set>
#include <vector>

namespace hyperformer {

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Uses mid-ranks, O(n log n). Throws PreconditionError
/// ("AUC undefined") without both classes.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Mean negative log-likelihood with probabilities clipped to [1e-15, 1 - 1e-15].
double logloss(std::span<const double> probabilities, std::span<const int> labels);

inline constexpr double kProbabilityClip = 1e-15;

using ItemId = std::size_t;

/// Binary-gain DCG over the top K with discount 1/log2(rank + 1), divided by
/// the ideal DCG of min(K, |relevant|) hits.
double ndcg_at_k(std::span<const ItemId> ranked, const std::unordered_set<ItemId>& relevant,
                 std::size_t k);

/// |top-K ∩ relevant| / |relevant|.
double recall_at_k(std::span<const ItemId> ranked, const std::unordered_set<ItemId>& relevant,
                   std::size_t k);

}  // namespace hyperformer
