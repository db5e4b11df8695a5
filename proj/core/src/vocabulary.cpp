#include "hyperformer/vocabulary.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "hyperformer/errors.hpp"

namespace hyperformer {

FeatureVocabulary FeatureVocabulary::build(std::span<const RawRecord> records,
                                           std::span<const std::string> schema) {
  return build(records, records, schema);
}

FeatureVocabulary FeatureVocabulary::build(std::span<const RawRecord> id_records,
                                           std::span<const RawRecord> counted_records,
                                           std::span<const std::string> schema) {
  if (id_records.empty() || counted_records.empty()) {
    throw PreconditionError("build_vocabulary: empty record set");
  }
  if (schema.empty()) throw PreconditionError("build_vocabulary: empty schema");

  FeatureVocabulary vocab;
  vocab.fields_.assign(schema.begin(), schema.end());
  const std::size_t m = schema.size();
  for (std::size_t f = 0; f < m; ++f) {
    if (vocab.field_index(schema[f]) != f) {
      throw PreconditionError("build_vocabulary: duplicate field '" + schema[f] + "'");
    }
  }

  // Pass 1: per-field values in first-seen order; counts only from the counted set.
  std::vector<std::vector<std::string>> values(m);
  std::vector<ValueMap> local(m);
  std::vector<std::vector<std::uint64_t>> counts(m);
  std::vector<std::uint64_t> unknown_counts(m, 0);
  std::vector<char> present(m);
  auto visit = [&](std::span<const RawRecord> records, bool count) {
    for (const auto& record : records) {
      std::fill(present.begin(), present.end(), 0);
      for (const auto& [field, value] : record.tokens) {
        auto f = vocab.field_index(field);
        if (!f) throw DataError("undeclared field '" + field + "'", record.line);
        present[*f] = 1;
        if (value == kUnknownValue) {
          if (count) ++unknown_counts[*f];
          continue;
        }
        auto [it, inserted] = local[*f].try_emplace(value, values[*f].size());
        if (inserted) {
          values[*f].push_back(value);
          counts[*f].push_back(0);
        }
        if (count) ++counts[*f][it->second];
      }
      if (!count) continue;
      for (std::size_t f = 0; f < m; ++f) {
        if (!present[f]) ++unknown_counts[f];
      }
    }
  };
  visit(id_records, false);
  visit(counted_records, true);

  // Pass 2: dense ids field by field, unknown last within each field.
  vocab.value_to_id_.resize(m);
  vocab.unknown_.resize(m);
  for (std::size_t f = 0; f < m; ++f) {
    for (std::size_t k = 0; k < values[f].size(); ++k) {
      const FeatureId id = vocab.id_field_.size();
      vocab.value_to_id_[f].emplace(values[f][k], id);
      vocab.id_field_.push_back(f);
      vocab.id_value_.push_back(values[f][k]);
      vocab.frequency_.push_back(counts[f][k]);
    }
    vocab.unknown_[f] = vocab.id_field_.size();
    vocab.id_field_.push_back(f);
    vocab.id_value_.emplace_back(kUnknownValue);
    vocab.frequency_.push_back(unknown_counts[f]);
  }
  return vocab;
}

std::optional<std::size_t> FeatureVocabulary::field_index(std::string_view name) const {
  for (std::size_t f = 0; f < fields_.size(); ++f) {
    if (fields_[f] == name) return f;
  }
  return std::nullopt;
}

std::optional<FeatureId> FeatureVocabulary::lookup(std::size_t field,
                                                   std::string_view value) const {
  if (value == kUnknownValue) return unknown_.at(field);
  const auto& map = value_to_id_.at(field);
  auto it = map.find(value);
  if (it == map.end()) return std::nullopt;
  return it->second;
}

FeatureId FeatureVocabulary::lookup_or_unknown(std::size_t field, std::string_view value) const {
  return lookup(field, value).value_or(unknown_.at(field));
}

bool FeatureVocabulary::operator==(const FeatureVocabulary& other) const {
  return fields_ == other.fields_ && id_field_ == other.id_field_ &&
         id_value_ == other.id_value_ && frequency_ == other.frequency_ &&
         unknown_ == other.unknown_;
}

void FeatureVocabulary::write(std::ostream& out) const {
  out << size() << ' ' << field_count() << '\n';
  for (FeatureId id = 0; id < size(); ++id) {
    out << id << '\t' << fields_[id_field_[id]] << '\t' << id_value_[id] << '\t'
        << frequency_[id] << '\n';
  }
}

FeatureVocabulary FeatureVocabulary::read(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw DataError("vocabulary: missing header", line_no);
  std::size_t n = 0;
  std::size_t m = 0;
  {
    std::istringstream header(line);
    if (!(header >> n >> m)) throw DataError("vocabulary: malformed header", line_no);
  }

  FeatureVocabulary vocab;
  vocab.unknown_.assign(m, n);
  for (FeatureId expected = 0; expected < n; ++expected) {
    ++line_no;
    if (!std::getline(in, line)) throw DataError("vocabulary: truncated", line_no);
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 4) throw DataError("vocabulary: expected 4 columns", line_no);
    if (cols[0] != std::to_string(expected)) {
      throw DataError("vocabulary: expected id " + std::to_string(expected), line_no);
    }
    auto f = vocab.field_index(cols[1]);
    if (!f) {
      if (vocab.fields_.size() == m) throw DataError("vocabulary: too many fields", line_no);
      f = vocab.fields_.size();
      vocab.fields_.push_back(cols[1]);
      vocab.value_to_id_.emplace_back();
    } else if (*f + 1 != vocab.fields_.size()) {
      throw DataError("vocabulary: ids of field '" + cols[1] + "' are not contiguous", line_no);
    }
    std::uint64_t freq = 0;
    try {
      std::size_t used = 0;
      freq = std::stoull(cols[3], &used);
      if (used != cols[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError("vocabulary: bad frequency '" + cols[3] + "'", line_no);
    }
    if (cols[2] == kUnknownValue) {
      vocab.unknown_[*f] = expected;
    } else if (!vocab.value_to_id_[*f].emplace(cols[2], expected).second) {
      throw DataError("vocabulary: duplicate value '" + cols[2] + "'", line_no);
    }
    vocab.id_field_.push_back(*f);
    vocab.id_value_.push_back(cols[2]);
    vocab.frequency_.push_back(freq);
  }
  if (vocab.fields_.size() != m) throw DataError("vocabulary: field count mismatch", line_no);
  for (std::size_t f = 0; f < m; ++f) {
    if (vocab.unknown_[f] == n) {
      throw DataError("vocabulary: field '" + vocab.fields_[f] + "' has no unknown id", line_no);
    }
  }
  return vocab;
}

}  // namespace hyperformer
