#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperformer/vocabulary.hpp"

namespace hyperformer {

/// One sample: binary label and one non-empty id list per field.
struct SparseInstance {
  int label = 0;
  std::vector<std::vector<FeatureId>> slots;

  bool operator==(const SparseInstance&) const = default;
};

struct Dataset {
  std::shared_ptr<const FeatureVocabulary> vocabulary;
  std::vector<SparseInstance> instances;

  std::size_t size() const noexcept { return instances.size(); }
  bool operator==(const Dataset& other) const;
};

enum class ParseMode {
  build,  ///< vocabulary is built from the file itself
  apply,  ///< an existing vocabulary maps values; unseen values become unknown
};

/// Reads `label,field:value,...` lines. Blank lines and lines starting with
/// '#' are skipped. Throws DataError carrying the 1-based line number.
std::vector<RawRecord> read_records(std::istream& in);
std::vector<RawRecord> read_records(const std::filesystem::path& path);

/// Maps records through `vocabulary`. Unseen values map to their field's
/// unknown id; undeclared fields are an error.
Dataset encode_records(std::span<const RawRecord> records,
                       std::shared_ptr<const FeatureVocabulary> vocabulary);

/// Build mode: schema is `schema` or, when empty, fields in first-seen order.
Dataset parse_dataset(std::istream& in, std::span<const std::string> schema = {});
/// Apply mode.
Dataset parse_dataset(std::istream& in, std::shared_ptr<const FeatureVocabulary> vocabulary);
/// Build mode uses `vocabulary` only for its field schema (may be null).
Dataset parse_dataset(const std::filesystem::path& path,
                      std::shared_ptr<const FeatureVocabulary> vocabulary, ParseMode mode);

/// Writes instances in the text format, fields in schema order.
void write_dataset(std::ostream& out, const Dataset& dataset);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
/// Raw records in the same text format, tokens in record order.
void write_records(std::ostream& out, std::span<const RawRecord> records);

/// Throws DataError if any id is out of range, sits in the wrong field's
/// slot, repeats within a slot, or a slot is empty.
void validate_dataset(const Dataset& dataset);

/// Field names of the records in first-seen order.
std::vector<std::string> discover_schema(std::span<const RawRecord> records);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Seeded permutation of [0, n) cut into three parts by largest remainder,
/// so each part is within one element of its exact share.
SplitIndices split_indices(std::size_t n, const SplitRatios& ratios, std::uint64_t seed);

struct DatasetSplits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

DatasetSplits split_dataset(const Dataset& dataset, const SplitRatios& ratios,
                            std::uint64_t seed);

/// Splits raw records, then encodes all three parts with one vocabulary whose
/// ids cover every value in `records` and whose frequencies are training
/// counts. Values that only occur outside training keep their own id (with
/// frequency 0) instead of collapsing onto the field's unknown id.
DatasetSplits split_records(std::span<const RawRecord> records,
                            std::span<const std::string> schema, const SplitRatios& ratios,
                            std::uint64_t seed);

struct BucketRange {
  std::uint64_t min_frequency = 0;
  std::uint64_t max_frequency = 0;
  std::size_t id_count = 0;
};

/// Features present in a training split, sorted by frequency and cut into
/// near-equal contiguous groups. Bucket 0 holds the rarest features.
struct FrequencyBuckets {
  std::size_t bucket_count = 0;
  std::vector<BucketRange> ranges;
  /// Training frequency per global id (0 for ids absent from training).
  std::vector<std::uint64_t> frequency;
  /// Bucket per global id; nullopt for ids absent from training.
  std::vector<std::optional<std::size_t>> assignment;

  std::optional<std::size_t> bucket_of(FeatureId id) const {
    return id < assignment.size() ? assignment[id] : std::nullopt;
  }
};

/// Ties in frequency are broken by id. Bucket sizes differ by at most one,
/// with the earlier buckets taking the remainder.
FrequencyBuckets compute_frequency_buckets(const Dataset& train, std::size_t bucket_count);

}  // namespace hyperformer
