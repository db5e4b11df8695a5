#include "hyperformer/scoring.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

#include "hyperformer/errors.hpp"
#include "hyperformer/metrics.hpp"
#include "hyperformer/parallel.hpp"

namespace hyperformer {

std::vector<double> predict_logits(const ModelState& state,
                                   std::span<const SparseInstance> instances,
                                   std::size_t batch_size) {
  if (batch_size == 0) throw PreconditionError("predict_logits: batch_size must be positive");
  std::vector<double> logits(instances.size());
  const std::size_t batches = (instances.size() + batch_size - 1) / batch_size;
  parallel_for(batches, [&](std::size_t b) {
    const std::size_t begin = b * batch_size;
    const std::size_t end = std::min(instances.size(), begin + batch_size);
    const auto fwd = forward_batch(instances.subspan(begin, end - begin), state);
    std::copy(fwd.logits().begin(), fwd.logits().end(),
              logits.begin() + static_cast<std::ptrdiff_t>(begin));
  });
  return logits;
}

std::vector<double> predict_probabilities(const ModelState& state,
                                          std::span<const SparseInstance> instances,
                                          std::size_t batch_size) {
  auto p = predict_logits(state, instances, batch_size);
  for (double& v : p) v = sigmoid(v);
  return p;
}

CtrMetrics evaluate_ctr(const ModelState& state, const Dataset& split, std::size_t batch_size) {
  if (split.instances.empty()) throw PreconditionError("evaluate_ctr: empty split");
  const auto probs = predict_probabilities(state, split.instances, batch_size);
  std::vector<int> labels(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) labels[i] = split.instances[i].label;
  CtrMetrics m;
  m.count = split.size();
  m.logloss = logloss(probs, labels);
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (has_pos && has_neg) m.auc = auc(probs, labels);
  return m;
}

namespace {

using UserKey = std::vector<std::vector<FeatureId>>;

UserKey user_key(const SparseInstance& inst, std::size_t user_fields) {
  return {inst.slots.begin(), inst.slots.begin() + static_cast<std::ptrdiff_t>(user_fields)};
}

}  // namespace

RetrievalMetrics evaluate_retrieval(const ModelState& state, const ItemCatalog& catalog,
                                    const Dataset& test, std::span<const Dataset* const> known,
                                    std::size_t k) {
  if (catalog.items.empty()) throw PreconditionError("evaluate_retrieval: empty catalog");
  const std::size_t uf = catalog.user_fields;

  struct UserCase {
    const SparseInstance* exemplar = nullptr;
    std::unordered_set<ItemId> relevant;
    std::set<ItemId> excluded;
  };
  std::map<UserKey, UserCase> users;
  for (const auto& inst : test.instances) {
    if (inst.label != 1) continue;
    auto item = catalog.find(inst);
    if (!item) throw PreconditionError("evaluate_retrieval: test item missing from catalog");
    auto& u = users[user_key(inst, uf)];
    if (!u.exemplar) u.exemplar = &inst;
    u.relevant.insert(*item);
  }
  for (const Dataset* split : known) {
    if (!split) continue;
    for (const auto& inst : split->instances) {
      auto it = users.find(user_key(inst, uf));
      if (it == users.end()) continue;
      if (auto item = catalog.find(inst)) it->second.excluded.insert(*item);
    }
  }
  if (users.empty()) throw PreconditionError("evaluate_retrieval: no test users");

  std::vector<UserCase*> cases;
  for (auto& [_, u] : users) {
    for (ItemId rel : u.relevant) u.excluded.erase(rel);
    cases.push_back(&u);
  }

  std::vector<double> ndcg(cases.size());
  std::vector<double> recall(cases.size());
  parallel_for(cases.size(), [&](std::size_t c) {
    const auto& u = *cases[c];
    std::vector<SparseInstance> batch;
    batch.reserve(catalog.items.size());
    for (std::size_t item = 0; item < catalog.items.size(); ++item) {
      batch.push_back(pair_instance(*u.exemplar, catalog, item, 0));
    }
    const auto fwd = forward_batch(batch, state);
    const auto& scores = fwd.logits();
    std::vector<ItemId> ranked;
    ranked.reserve(batch.size());
    for (ItemId item = 0; item < batch.size(); ++item) {
      if (!u.excluded.contains(item)) ranked.push_back(item);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](ItemId a, ItemId b) { return scores[a] > scores[b]; });
    ndcg[c] = ndcg_at_k(ranked, u.relevant, k);
    recall[c] = recall_at_k(ranked, u.relevant, k);
  });

  RetrievalMetrics m;
  m.users = cases.size();
  m.ndcg = std::accumulate(ndcg.begin(), ndcg.end(), 0.0) / static_cast<double>(cases.size());
  m.recall = std::accumulate(recall.begin(), recall.end(), 0.0) / static_cast<double>(cases.size());
  return m;
}

}  // namespace hyperformer
