#include "hyperformer/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

#include "hyperformer/errors.hpp"
#include "hyperformer/rng.hpp"

namespace hyperformer {

void TrainConfig::validate() const {
  if (batch_size < 2) throw PreconditionError("train config: batch_size must be >= 2");
  if (epochs == 0) throw PreconditionError("train config: epochs must be >= 1");
  adam.validate();
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LossResult bce_loss(std::span<const double> logits, std::span<const int> labels) {
  if (logits.size() != labels.size()) {
    throw DimensionError("bce_loss: " + std::to_string(logits.size()) + " logits, " +
                         std::to_string(labels.size()) + " labels");
  }
  if (logits.empty()) throw PreconditionError("bce_loss: empty batch");
  LossResult r;
  r.d_logits.resize(logits.size());
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const int y = labels[i];
    if (y != 0 && y != 1) throw PreconditionError("bce_loss: label outside {0,1}");
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    r.d_logits[i] = (sigmoid(z) - y) * inv_n;
  }
  r.loss = total * inv_n;
  return r;
}

std::optional<std::size_t> ItemCatalog::find(const SparseInstance& instance) const {
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (std::equal(items[k].begin(), items[k].end(),
                   instance.slots.begin() + static_cast<std::ptrdiff_t>(user_fields),
                   instance.slots.end())) {
      return k;
    }
  }
  return std::nullopt;
}

ItemCatalog build_item_catalog(const Dataset& dataset, std::size_t user_fields) {
  const Dataset* one[] = {&dataset};
  return build_item_catalog(one, user_fields);
}

ItemCatalog build_item_catalog(std::span<const Dataset* const> datasets,
                               std::size_t user_fields) {
  ItemCatalog catalog;
  catalog.user_fields = user_fields;
  std::map<std::vector<std::vector<FeatureId>>, std::size_t> seen;
  for (const Dataset* dataset : datasets) {
    for (const auto& inst : dataset->instances) {
      if (inst.slots.size() <= user_fields) {
        throw PreconditionError("item catalog: instances need more than user_fields slots");
      }
      std::vector<std::vector<FeatureId>> item(
          inst.slots.begin() + static_cast<std::ptrdiff_t>(user_fields), inst.slots.end());
      if (seen.try_emplace(item, catalog.items.size()).second) {
        catalog.items.push_back(std::move(item));
      }
    }
  }
  return catalog;
}

SparseInstance pair_instance(const SparseInstance& user, const ItemCatalog& catalog,
                             std::size_t item, int label) {
  SparseInstance out;
  out.label = label;
  out.slots.assign(user.slots.begin(),
                   user.slots.begin() + static_cast<std::ptrdiff_t>(catalog.user_fields));
  const auto& side = catalog.items.at(item);
  out.slots.insert(out.slots.end(), side.begin(), side.end());
  return out;
}

double train_step(std::span<const SparseInstance> batch, ModelState& state, OptimizerState& opt,
                  const AdamConfig& adam) {
  const auto forward = forward_batch(batch, state);
  std::vector<int> labels(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = batch[i].label;
  const auto loss = bce_loss(forward.logits(), labels);
  const auto grads = backward(forward, state, loss.d_logits);
  adam_step(state, grads, opt, adam);
  return loss.loss;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed) {
  if (batch_size == 0) throw PreconditionError("make_batches: batch_size must be positive");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    if (end - start < 2 && !batches.empty()) {
      batches.back().insert(batches.back().end(), order.begin() + static_cast<std::ptrdiff_t>(start),
                            order.begin() + static_cast<std::ptrdiff_t>(end));
    } else {
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  return batches;
}

EpochReport train_epoch(const Dataset& train, ModelState& state, OptimizerState& opt,
                        const TrainConfig& config, std::size_t epoch, const ItemCatalog* catalog) {
  config.validate();
  if (train.instances.empty()) throw PreconditionError("train_epoch: empty training split");
  if (catalog && catalog->items.size() < 2) {
    throw PreconditionError("train_epoch: catalog needs at least two items for negatives");
  }

  const std::uint64_t epoch_seed = mix_seed(config.shuffle_seed, epoch);
  const auto batches = make_batches(train.size(), config.batch_size, epoch_seed);
  Rng negatives(mix_seed(epoch_seed, 0x6e6567));

  EpochReport report;
  double weighted = 0.0;
  std::vector<SparseInstance> batch;
  for (const auto& indices : batches) {
    batch.clear();
    for (std::size_t i : indices) {
      const auto& inst = train.instances[i];
      if (!catalog) {
        batch.push_back(inst);
        continue;
      }
      const auto positive = catalog->find(inst);
      batch.push_back(inst);
      batch.back().label = 1;
      for (std::size_t k = 0; k < config.negative_samples; ++k) {
        std::size_t item;
        do {
          item = negatives.uniform_index(catalog->items.size());
        } while (positive && item == *positive);
        batch.push_back(pair_instance(inst, *catalog, item, 0));
      }
    }
    const double loss = train_step(batch, state, opt, config.adam);
    weighted += loss * static_cast<double>(batch.size());
    report.instances += batch.size();
    ++report.batches;
  }
  report.mean_loss = weighted / static_cast<double>(report.instances);
  return report;
}

}  // namespace hyperformer
