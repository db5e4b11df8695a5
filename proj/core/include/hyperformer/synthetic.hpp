#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hyperformer/dataset.hpp"

namespace hyperformer {

/// Noisy planted labelling rule: an instance carrying any positive feature is
/// labelled 1 with probability `p_positive`, otherwise with `p_negative`.
struct PlantedRule {
  /// Explicit positive features as (field name, value name), e.g. ("f0", "v3").
  std::vector<std::pair<std::string, std::string>> positive_features;
  /// Every value of every field whose latent group is listed here is positive.
  std::vector<std::size_t> positive_groups;
  double p_positive = 0.9;
  double p_negative = 0.1;
};

/// Generator for CTR-style data with power-law value frequencies.
///
/// Fields are named f0..f{m-1} and values v0..v{k_f-1}; lower value indices
/// are more frequent. Value `vk` belongs to latent group k % groups. Each instance
/// draws a latent group uniformly; each slot samples from that group with
/// probability `coherence` and from the whole field otherwise.
struct SyntheticSpec {
  std::size_t fields = 4;
  /// Cardinality per field; a single entry applies to every field.
  std::vector<std::size_t> values_per_field = {100};
  std::size_t instances = 1000;
  double exponent = 1.5;
  std::size_t groups = 1;
  double coherence = 1.0;
  std::size_t max_values_per_slot = 1;
  PlantedRule rule;
  std::uint64_t seed = 0;

  std::size_t cardinality(std::size_t field) const {
    return values_per_field.size() == 1 ? values_per_field.front() : values_per_field.at(field);
  }
};

/// Throws PreconditionError for non-positive sizes or rule references to
/// undeclared fields, values or groups.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Raw records (before vocabulary construction) for the same generator.
std::vector<RawRecord> generate_synthetic_records(const SyntheticSpec& spec);

/// User/item interactions with planted cluster affinity.
///
/// Users and items are assigned to `clusters` round-robin. Each user draws
/// `interactions_per_user` distinct items; each draw comes from the user's own
/// cluster with probability `affinity`. Fields are `user`, `ucluster`, `item`,
/// `icluster`; the cluster attributes are replaced by a random cluster with
/// probability `attribute_noise`. All instances are positives (label 1).
struct RetrievalSpec {
  std::size_t users = 500;
  std::size_t items = 300;
  std::size_t clusters = 10;
  std::size_t interactions_per_user = 20;
  double affinity = 0.9;
  double attribute_noise = 0.2;
  std::uint64_t seed = 0;
};

/// Number of leading fields that describe the user in retrieval data.
inline constexpr std::size_t kRetrievalUserFields = 2;

std::vector<RawRecord> generate_retrieval_records(const RetrievalSpec& spec);

}  // namespace hyperformer
