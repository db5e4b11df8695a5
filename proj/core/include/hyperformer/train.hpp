#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hyperformer/dataset.hpp"
#include "hyperformer/model.hpp"
#include "hyperformer/optimizer.hpp"

namespace hyperformer {

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  AdamConfig adam;
  std::uint64_t shuffle_seed = 0;
  /// Two-tower mode: uniformly sampled negative items per positive.
  std::size_t negative_samples = 1;

  void validate() const;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> d_logits;
};

/// Mean binary cross-entropy with logits, in the stable form
/// max(z,0) - z*y + log1p(exp(-|z|)); gradient (sigmoid(z) - y) / n.
LossResult bce_loss(std::span<const double> logits, std::span<const int> labels);

double sigmoid(double z) noexcept;

/// Distinct item-side slot tuples for two-tower training and ranking.
struct ItemCatalog {
  std::size_t user_fields = 0;
  std::vector<std::vector<std::vector<FeatureId>>> items;

  /// Catalog index of the item side of `instance`, if present.
  std::optional<std::size_t> find(const SparseInstance& instance) const;
};

/// Items in first-seen order over `dataset`.
ItemCatalog build_item_catalog(const Dataset& dataset, std::size_t user_fields);
/// Items in first-seen order over the datasets, in sequence.
ItemCatalog build_item_catalog(std::span<const Dataset* const> datasets,
                               std::size_t user_fields);

/// Instance with the user side of `user` and the item side of catalog item `item`.
SparseInstance pair_instance(const SparseInstance& user, const ItemCatalog& catalog,
                             std::size_t item, int label);

/// Forward, loss, backward and one Adam update on a fixed batch. Returns the
/// batch loss before the update.
double train_step(std::span<const SparseInstance> batch, ModelState& state, OptimizerState& opt,
                  const AdamConfig& adam);

/// Shuffled, contiguous batches. A trailing batch of one instance is merged
/// into the previous batch.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed);

struct EpochReport {
  double mean_loss = 0.0;  ///< instance-weighted mean of batch losses
  std::size_t batches = 0;
  std::size_t instances = 0;
};

/// One pass over `train`. The shuffle seed for epoch `epoch` is derived from
/// (shuffle_seed, epoch). With a catalog, every instance is treated as a
/// positive and `negative_samples` random items are paired with its user.
EpochReport train_epoch(const Dataset& train, ModelState& state, OptimizerState& opt,
                        const TrainConfig& config, std::size_t epoch,
                        const ItemCatalog* catalog = nullptr);

}  // namespace hyperformer
