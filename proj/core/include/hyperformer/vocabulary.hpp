#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hyperformer {

/// Dense global feature id in [0, N).
using FeatureId = std::size_t;

/// Reserved value token standing for "unseen or missing value" of a field.
inline constexpr std::string_view kUnknownValue = "<unk>";

/// One parsed input line before id assignment.
struct RawRecord {
  int label = 0;
  /// (field, value) tokens in line order; repeated fields form multi-hot slots.
  std::vector<std::pair<std::string, std::string>> tokens;
  std::size_t line = 0;
};

/// Field schema plus the value <-> global id mapping and training frequencies.
///
/// Ids are grouped by field in schema order. Within a field, values take ids
/// in first-seen order and the field's unknown id comes last.
class FeatureVocabulary {
 public:
  /// Builds ids and frequencies from `records`. Records missing a field count
  /// toward that field's unknown id, so per-field frequencies of single-valued
  /// fields sum to the record count.
  static FeatureVocabulary build(std::span<const RawRecord> records,
                                 std::span<const std::string> schema);
  /// Ids from `id_records` (then any extra values of `counted_records`),
  /// frequencies from `counted_records` only. Used to give every value seen
  /// anywhere in the data its own id while keeping training-split counts.
  static FeatureVocabulary build(std::span<const RawRecord> id_records,
                                 std::span<const RawRecord> counted_records,
                                 std::span<const std::string> schema);

  /// Inverse of `write`.
  static FeatureVocabulary read(std::istream& in);
  /// Header `N m`, then `id<TAB>field<TAB>value<TAB>frequency` per id.
  void write(std::ostream& out) const;

  std::size_t size() const noexcept { return id_field_.size(); }
  std::size_t field_count() const noexcept { return fields_.size(); }
  const std::vector<std::string>& fields() const noexcept { return fields_; }
  std::optional<std::size_t> field_index(std::string_view name) const;

  std::size_t field_of(FeatureId id) const { return id_field_.at(id); }
  const std::string& value_of(FeatureId id) const { return id_value_.at(id); }
  std::uint64_t frequency(FeatureId id) const { return frequency_.at(id); }
  const std::vector<std::uint64_t>& frequencies() const noexcept { return frequency_; }
  FeatureId unknown_id(std::size_t field) const { return unknown_.at(field); }
  bool is_unknown(FeatureId id) const { return unknown_.at(field_of(id)) == id; }

  std::optional<FeatureId> lookup(std::size_t field, std::string_view value) const;
  /// Known id, or the field's unknown id for unseen values.
  FeatureId lookup_or_unknown(std::size_t field, std::string_view value) const;

  bool operator==(const FeatureVocabulary& other) const;

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  using ValueMap = std::unordered_map<std::string, FeatureId, StringHash, std::equal_to<>>;

  std::vector<std::string> fields_;
  std::vector<ValueMap> value_to_id_;
  std::vector<std::size_t> id_field_;
  std::vector<std::string> id_value_;
  std::vector<std::uint64_t> frequency_;
  std::vector<FeatureId> unknown_;
};

}  // namespace hyperformer
