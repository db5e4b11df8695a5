#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hyperformer/dataset.hpp"
#include "hyperformer/model.hpp"
#include "hyperformer/train.hpp"

namespace hyperformer {

/// Logits for `instances`, scored in consecutive batches of `batch_size`
/// (each batch forms its own hypergraph). Batches run in parallel; the result
/// does not depend on the thread count.
std::vector<double> predict_logits(const ModelState& state,
                                   std::span<const SparseInstance> instances,
                                   std::size_t batch_size);

std::vector<double> predict_probabilities(const ModelState& state,
                                          std::span<const SparseInstance> instances,
                                          std::size_t batch_size);

struct CtrMetrics {
  std::optional<double> auc;  ///< nullopt for single-class splits
  double logloss = 0.0;
  std::size_t count = 0;
};

CtrMetrics evaluate_ctr(const ModelState& state, const Dataset& split, std::size_t batch_size);

struct RetrievalMetrics {
  double ndcg = 0.0;
  double recall = 0.0;
  std::size_t users = 0;
};

/// Full ranking: for each user in `test`, all catalog items are scored in one
/// batch (user side paired with every item); items the user interacted with in
/// `known` splits are removed from the ranking; the user's test items are the
/// relevant set. Metrics are averaged over users.
RetrievalMetrics evaluate_retrieval(const ModelState& state, const ItemCatalog& catalog,
                                    const Dataset& test, std::span<const Dataset* const> known,
                                    std::size_t k);

}  // namespace hyperformer
