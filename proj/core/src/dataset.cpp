#include "hyperformer/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "hyperformer/errors.hpp"
#include "hyperformer/rng.hpp"

namespace hyperformer {

bool Dataset::operator==(const Dataset& other) const {
  const bool vocab_equal = vocabulary == other.vocabulary ||
                           (vocabulary && other.vocabulary && *vocabulary == *other.vocabulary);
  return vocab_equal && instances == other.instances;
}

namespace {

RawRecord parse_line(std::string_view line, std::size_t line_no) {
  RawRecord record;
  record.line = line_no;
  std::size_t start = 0;
  bool first = true;
  for (;;) {
    const auto comma = line.find(',', start);
    const auto token = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    if (first) {
      if (token == "0") {
        record.label = 0;
      } else if (token == "1") {
        record.label = 1;
      } else {
        throw DataError("label must be 0 or 1, got '" + std::string(token) + "'", line_no);
      }
      first = false;
    } else {
      const auto colon = token.find(':');
      if (colon == std::string_view::npos || colon == 0 || colon + 1 == token.size() ||
          token.find(':', colon + 1) != std::string_view::npos) {
        throw DataError("malformed token '" + std::string(token) + "', expected field:value",
                        line_no);
      }
      record.tokens.emplace_back(std::string(token.substr(0, colon)),
                                 std::string(token.substr(colon + 1)));
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return record;
}

}  // namespace

std::vector<RawRecord> read_records(std::istream& in) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    records.push_back(parse_line(line, line_no));
  }
  return records;
}

std::vector<RawRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return read_records(in);
}

std::vector<std::string> discover_schema(std::span<const RawRecord> records) {
  std::vector<std::string> schema;
  for (const auto& r : records) {
    for (const auto& [field, _] : r.tokens) {
      if (std::find(schema.begin(), schema.end(), field) == schema.end()) {
        schema.push_back(field);
      }
    }
  }
  return schema;
}

Dataset encode_records(std::span<const RawRecord> records,
                       std::shared_ptr<const FeatureVocabulary> vocabulary) {
  if (!vocabulary) throw PreconditionError("encode_records: null vocabulary");
  const auto& vocab = *vocabulary;
  const std::size_t m = vocab.field_count();
  Dataset out;
  out.instances.reserve(records.size());
  for (const auto& record : records) {
    SparseInstance inst;
    inst.label = record.label;
    inst.slots.resize(m);
    for (const auto& [field, value] : record.tokens) {
      auto f = vocab.field_index(field);
      if (!f) throw DataError("undeclared field '" + field + "'", record.line);
      const FeatureId id = vocab.lookup_or_unknown(*f, value);
      auto& slot = inst.slots[*f];
      if (std::find(slot.begin(), slot.end(), id) == slot.end()) slot.push_back(id);
    }
    for (std::size_t f = 0; f < m; ++f) {
      if (inst.slots[f].empty()) inst.slots[f].push_back(vocab.unknown_id(f));
    }
    out.instances.push_back(std::move(inst));
  }
  out.vocabulary = std::move(vocabulary);
  return out;
}

Dataset parse_dataset(std::istream& in, std::span<const std::string> schema) {
  const auto records = read_records(in);
  if (records.empty()) throw DataError("dataset contains no records");
  std::vector<std::string> fields(schema.begin(), schema.end());
  if (fields.empty()) fields = discover_schema(records);
  auto vocab = std::make_shared<const FeatureVocabulary>(FeatureVocabulary::build(records, fields));
  return encode_records(records, std::move(vocab));
}

Dataset parse_dataset(std::istream& in, std::shared_ptr<const FeatureVocabulary> vocabulary) {
  return encode_records(read_records(in), std::move(vocabulary));
}

Dataset parse_dataset(const std::filesystem::path& path,
                      std::shared_ptr<const FeatureVocabulary> vocabulary, ParseMode mode) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  if (mode == ParseMode::apply) return parse_dataset(in, std::move(vocabulary));
  std::vector<std::string> schema;
  if (vocabulary) schema = vocabulary->fields();
  return parse_dataset(in, schema);
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  const auto& vocab = *dataset.vocabulary;
  for (const auto& inst : dataset.instances) {
    out << inst.label;
    for (std::size_t f = 0; f < inst.slots.size(); ++f) {
      for (FeatureId id : inst.slots[f]) {
        out << ',' << vocab.fields()[f] << ':' << vocab.value_of(id);
      }
    }
    out << '\n';
  }
}

void write_records(std::ostream& out, std::span<const RawRecord> records) {
  for (const auto& record : records) {
    out << record.label;
    for (const auto& [field, value] : record.tokens) out << ',' << field << ':' << value;
    out << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
  write_dataset(out, dataset);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void validate_dataset(const Dataset& dataset) {
  if (!dataset.vocabulary) throw DataError("dataset has no vocabulary");
  const auto& vocab = *dataset.vocabulary;
  for (std::size_t i = 0; i < dataset.instances.size(); ++i) {
    const auto& inst = dataset.instances[i];
    const std::string where = "instance " + std::to_string(i) + ": ";
    if (inst.label != 0 && inst.label != 1) throw DataError(where + "label outside {0,1}");
    if (inst.slots.size() != vocab.field_count()) throw DataError(where + "wrong slot count");
    for (std::size_t f = 0; f < inst.slots.size(); ++f) {
      const auto& slot = inst.slots[f];
      if (slot.empty()) throw DataError(where + "empty slot " + std::to_string(f));
      for (std::size_t k = 0; k < slot.size(); ++k) {
        if (slot[k] >= vocab.size()) throw DataError(where + "feature id out of range");
        if (vocab.field_of(slot[k]) != f) throw DataError(where + "feature id in wrong field");
        if (std::find(slot.begin(), slot.begin() + static_cast<std::ptrdiff_t>(k), slot[k]) !=
            slot.begin() + static_cast<std::ptrdiff_t>(k)) {
          throw DataError(where + "duplicate id within a slot");
        }
      }
    }
  }
}

SplitIndices split_indices(std::size_t n, const SplitRatios& ratios, std::uint64_t seed) {
  const double parts[3] = {ratios.train, ratios.validation, ratios.test};
  for (double r : parts) {
    if (!(r > 0.0)) throw PreconditionError("split ratios must be positive");
  }
  if (std::abs(parts[0] + parts[1] + parts[2] - 1.0) > 1e-9) {
    throw PreconditionError("split ratios must sum to 1");
  }
  if (n == 0) throw PreconditionError("cannot split an empty dataset");

  // Largest remainder apportionment; ties favour the earlier part.
  std::size_t sizes[3];
  double remainders[3];
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = parts[k] * static_cast<double>(n);
    sizes[k] = static_cast<std::size_t>(std::floor(exact));
    remainders[k] = exact - static_cast<double>(sizes[k]);
    assigned += sizes[k];
  }
  while (assigned < n) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (remainders[k] > remainders[best]) best = k;
    }
    ++sizes[best];
    remainders[best] = -1.0;
    ++assigned;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  SplitIndices out;
  auto begin = order.begin();
  out.train.assign(begin, begin + static_cast<std::ptrdiff_t>(sizes[0]));
  begin += static_cast<std::ptrdiff_t>(sizes[0]);
  out.validation.assign(begin, begin + static_cast<std::ptrdiff_t>(sizes[1]));
  begin += static_cast<std::ptrdiff_t>(sizes[1]);
  out.test.assign(begin, order.end());
  return out;
}

DatasetSplits split_dataset(const Dataset& dataset, const SplitRatios& ratios,
                            std::uint64_t seed) {
  const auto idx = split_indices(dataset.size(), ratios, seed);
  auto take = [&](const std::vector<std::size_t>& which) {
    Dataset part;
    part.vocabulary = dataset.vocabulary;
    part.instances.reserve(which.size());
    for (std::size_t i : which) part.instances.push_back(dataset.instances[i]);
    return part;
  };
  return {take(idx.train), take(idx.validation), take(idx.test)};
}

DatasetSplits split_records(std::span<const RawRecord> records,
                            std::span<const std::string> schema, const SplitRatios& ratios,
                            std::uint64_t seed) {
  const auto idx = split_indices(records.size(), ratios, seed);
  auto take = [&](const std::vector<std::size_t>& which) {
    std::vector<RawRecord> part;
    part.reserve(which.size());
    for (std::size_t i : which) part.push_back(records[i]);
    return part;
  };
  const auto train = take(idx.train);
  auto vocab = std::make_shared<const FeatureVocabulary>(
      FeatureVocabulary::build(records, train, schema));
  return {encode_records(train, vocab), encode_records(take(idx.validation), vocab),
          encode_records(take(idx.test), vocab)};
}

FrequencyBuckets compute_frequency_buckets(const Dataset& train, std::size_t bucket_count) {
  if (bucket_count < 2) throw PreconditionError("bucket count must be at least 2");
  const std::size_t n = train.vocabulary ? train.vocabulary->size() : 0;

  FrequencyBuckets out;
  out.bucket_count = bucket_count;
  out.frequency.assign(n, 0);
  for (const auto& inst : train.instances) {
    for (const auto& slot : inst.slots) {
      for (FeatureId id : slot) {
        if (id >= n) throw DataError("feature id out of vocabulary range");
        ++out.frequency[id];
      }
    }
  }

  std::vector<FeatureId> ids;
  for (FeatureId id = 0; id < n; ++id) {
    if (out.frequency[id] > 0) ids.push_back(id);
  }
  if (ids.size() < bucket_count) {
    throw PreconditionError("only " + std::to_string(ids.size()) +
                            " distinct training features for " + std::to_string(bucket_count) +
                            " buckets");
  }
  std::stable_sort(ids.begin(), ids.end(), [&](FeatureId a, FeatureId b) {
    return out.frequency[a] < out.frequency[b];
  });

  out.assignment.assign(n, std::nullopt);
  out.ranges.resize(bucket_count);
  const std::size_t base = ids.size() / bucket_count;
  const std::size_t extra = ids.size() % bucket_count;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < bucket_count; ++b) {
    const std::size_t count = base + (b < extra ? 1 : 0);
    auto& range = out.ranges[b];
    range.id_count = count;
    range.min_frequency = out.frequency[ids[pos]];
    range.max_frequency = out.frequency[ids[pos + count - 1]];
    for (std::size_t k = 0; k < count; ++k) out.assignment[ids[pos + k]] = b;
    pos += count;
  }
  return out;
}

}  // namespace hyperformer
