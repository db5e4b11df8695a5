#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hyperformer/dataset.hpp"

namespace hyperformer {

enum class SliceMode {
  /// Each instance belongs to the bucket of its rarest feature.
  partition,
  /// Each instance belongs to every bucket any of its features falls in.
  overlapping,
};

struct BucketReport {
  std::uint64_t min_frequency = 0;
  std::uint64_t max_frequency = 0;
  std::size_t count = 0;
  std::optional<double> auc;      ///< nullopt when the slice has a single class
  std::optional<double> logloss;  ///< nullopt when the slice is empty
};

struct SlicedReport {
  std::vector<BucketReport> buckets;
  BucketReport overall;
};

/// Probabilities for a set of instances, in order.
using ScoreFn = std::function<std::vector<double>(std::span<const SparseInstance>)>;

/// Bucket of the instance's rarest feature. Features never seen in training
/// have frequency 0 and count as bucket 0.
std::size_t rarest_bucket(const SparseInstance& instance, const FrequencyBuckets& buckets);

/// Scores the whole test split once with `score`, then reports AUC/LogLoss
/// per frequency bucket and overall.
SlicedReport sliced_eval(const Dataset& test, const FrequencyBuckets& buckets,
                         const ScoreFn& score, SliceMode mode = SliceMode::partition);

/// Tab-separated `bucket minFreq maxFreq count auc logloss` rows with `NA`
/// for undefined values, then an `overall` row.
void write_sliced_report(std::ostream& out, const SlicedReport& report);

}  // namespace hyperformer
