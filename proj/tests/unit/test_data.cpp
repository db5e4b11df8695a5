#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "hyperformer/dataset.hpp"
#include "hyperformer/errors.hpp"
#include "hyperformer/synthetic.hpp"
#include "hyperformer/vocabulary.hpp"

using namespace hyperformer;

namespace {

RawRecord record(int label, std::vector<std::pair<std::string, std::string>> tokens) {
  RawRecord r;
  r.label = label;
  r.tokens = std::move(tokens);
  return r;
}

std::vector<RawRecord> parse_records(const std::string& text) {
  std::istringstream in(text);
  return read_records(in);
}

Dataset make_dataset(std::size_t n) {
  std::ostringstream text;
  for (std::size_t i = 0; i < n; ++i) text << (i % 2) << ",x:v" << i << '\n';
  std::istringstream in(text.str());
  return parse_dataset(in);
}

}  // namespace

TEST_CASE("vocabulary: hand-counted example") {
  const std::vector<RawRecord> records = {record(1, {{"city", "A"}}), record(0, {{"city", "B"}}),
                                          record(1, {{"city", "A"}})};
  const std::vector<std::string> schema = {"city"};
  const auto vocab = FeatureVocabulary::build(records, schema);
  CHECK(vocab.size() == 3);
  const auto a = vocab.lookup(0, "A");
  const auto b = vocab.lookup(0, "B");
  REQUIRE(a);
  REQUIRE(b);
  CHECK(*a == 0);
  CHECK(*b == 1);
  CHECK(vocab.unknown_id(0) == 2);
  CHECK(vocab.frequency(*a) == 2);
  CHECK(vocab.frequency(*b) == 1);
  CHECK(vocab.frequency(vocab.unknown_id(0)) == 0);
}

TEST_CASE("vocabulary: one value and one unknown per field") {
  const std::vector<RawRecord> records = {record(0, {{"a", "x"}, {"b", "y"}})};
  const std::vector<std::string> schema = {"a", "b"};
  const auto vocab = FeatureVocabulary::build(records, schema);
  CHECK(vocab.size() == 4);
  CHECK(vocab.field_of(0) == 0);
  CHECK(vocab.is_unknown(1));
  CHECK(vocab.field_of(2) == 1);
  CHECK(vocab.is_unknown(3));
}

TEST_CASE("vocabulary: errors") {
  const std::vector<std::string> schema = {"city"};
  CHECK_THROWS_AS(FeatureVocabulary::build(std::span<const RawRecord>{}, schema), PreconditionError);

  std::vector<RawRecord> records = {record(1, {{"city", "A"}, {"age", "3"}})};
  records[0].line = 7;
  try {
    (void)FeatureVocabulary::build(records, schema);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("age") != std::string::npos);
    CHECK(e.line() == 7);
  }
}

TEST_CASE("vocabulary: per-field frequencies of single-valued fields sum to the record count") {
  SyntheticSpec spec;
  spec.fields = 3;
  spec.values_per_field = {30};
  spec.instances = 400;
  spec.seed = 5;
  const auto records = generate_synthetic_records(spec);
  const auto schema = discover_schema(records);
  const auto vocab = FeatureVocabulary::build(records, schema);
  std::vector<std::uint64_t> per_field(vocab.field_count(), 0);
  for (FeatureId id = 0; id < vocab.size(); ++id) per_field[vocab.field_of(id)] += vocab.frequency(id);
  for (auto total : per_field) CHECK(total == 400);
}

TEST_CASE("vocabulary: missing fields count toward the unknown id") {
  const std::vector<RawRecord> records = {record(1, {{"a", "x"}}), record(0, {{"a", "y"}, {"b", "z"}})};
  const std::vector<std::string> schema = {"a", "b"};
  const auto vocab = FeatureVocabulary::build(records, schema);
  CHECK(vocab.frequency(vocab.unknown_id(1)) == 1);
  CHECK(vocab.frequency(*vocab.lookup(1, "z")) == 1);
}

TEST_CASE("vocabulary: ids from all records, frequencies from the counted subset") {
  const std::vector<RawRecord> all = {record(1, {{"c", "A"}}), record(0, {{"c", "B"}}),
                                      record(1, {{"c", "A"}}), record(0, {{"c", "Z"}})};
  const std::vector<RawRecord> counted(all.begin(), all.begin() + 3);
  const std::vector<std::string> schema = {"c"};
  const auto vocab = FeatureVocabulary::build(all, counted, schema);
  CHECK(vocab.size() == 4);
  const auto z = vocab.lookup(0, "Z");
  REQUIRE(z);
  CHECK(vocab.frequency(*z) == 0);
  CHECK(vocab.frequency(*vocab.lookup(0, "A")) == 2);
  CHECK(vocab.unknown_id(0) == 3);
}

TEST_CASE("vocabulary: write/read round trip and malformed files") {
  const std::vector<RawRecord> records = {record(1, {{"a", "x"}, {"b", "y"}}),
                                          record(0, {{"a", "w"}, {"b", "y"}})};
  const std::vector<std::string> schema = {"a", "b"};
  const auto vocab = FeatureVocabulary::build(records, schema);
  std::stringstream buf;
  vocab.write(buf);
  CHECK(buf.str().rfind("5 2\n", 0) == 0);
  CHECK(FeatureVocabulary::read(buf) == vocab);

  std::istringstream truncated("3 1\n0\ta\tx\t1\n");
  CHECK_THROWS_AS(FeatureVocabulary::read(truncated), DataError);
  std::istringstream no_unknown("1 1\n0\ta\tx\t1\n");
  CHECK_THROWS_AS(FeatureVocabulary::read(no_unknown), DataError);
}

TEST_CASE("parse_dataset: known values, unseen values, comments") {
  std::istringstream train("# header comment\n1,city:A,age:30\n\n0,city:B,age:40\n");
  const auto built = parse_dataset(train);
  REQUIRE(built.size() == 2);
  const auto& vocab = *built.vocabulary;
  const auto& first = built.instances[0];
  CHECK(first.label == 1);
  CHECK(first.slots == std::vector<std::vector<FeatureId>>{{*vocab.lookup(0, "A")}, {*vocab.lookup(1, "30")}});

  std::istringstream test("1,city:Z,age:30\n");
  const auto applied = parse_dataset(test, built.vocabulary);
  REQUIRE(applied.size() == 1);
  CHECK(applied.instances[0].slots[0] == std::vector<FeatureId>{vocab.unknown_id(0)});
}

TEST_CASE("parse_dataset: multi-hot slots, missing fields, duplicates") {
  std::istringstream in("1,genre:a,genre:b,genre:a,year:1990\n0,genre:c\n");
  const auto ds = parse_dataset(in);
  const auto& vocab = *ds.vocabulary;
  CHECK(ds.instances[0].slots[0].size() == 2);
  CHECK(ds.instances[1].slots[1] == std::vector<FeatureId>{vocab.unknown_id(1)});
  validate_dataset(ds);
}

TEST_CASE("parse_dataset: malformed lines report their line number") {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      (void)parse_records(text);
    } catch (const DataError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("1,a:x\n2,a:y\n") == 2);
  CHECK(line_of("1,a:x\n\n1,a\n") == 3);
  CHECK(line_of("1,a:x:y\n") == 1);
  CHECK(line_of("x,a:y\n") == 1);
  CHECK(line_of("1,a:x\r\n0,a:y\r\n") == 0);
}

TEST_CASE("parse -> serialize -> parse is the identity") {
  const std::string text = "1,city:A,age:30\n0,city:B,age:30,age:40\n1,city:A,age:50\n";
  std::istringstream first_in(text);
  const auto first = parse_dataset(first_in);
  std::ostringstream out;
  write_dataset(out, first);
  std::istringstream second_in(out.str());
  const auto second = parse_dataset(second_in, first.vocabulary);
  CHECK(second == first);
  std::istringstream third_in(out.str());
  const auto rebuilt = parse_dataset(third_in);
  CHECK(rebuilt.instances == first.instances);
}

TEST_CASE("parse_dataset from a file in build and apply mode") {
  const auto dir = std::filesystem::temp_directory_path() / "hyperformer_test_data";
  std::filesystem::create_directories(dir);
  const auto path = dir / "d.txt";
  {
    std::ofstream out(path);
    out << "1,u:1,i:9\n0,u:2,i:9\n";
  }
  const auto built = parse_dataset(path, nullptr, ParseMode::build);
  const auto applied = parse_dataset(path, built.vocabulary, ParseMode::apply);
  CHECK(applied == built);
  CHECK_THROWS_AS(parse_dataset(dir / "missing.txt", nullptr, ParseMode::build), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("split: sizes follow the ratios") {
  const auto ten = make_dataset(10);
  const auto a = split_dataset(ten, {0.8, 0.1, 0.1}, 3);
  CHECK(a.train.size() == 8);
  CHECK(a.validation.size() == 1);
  CHECK(a.test.size() == 1);
  const auto b = split_dataset(ten, {0.7, 0.1, 0.2}, 3);
  CHECK(b.train.size() == 7);
  CHECK(b.validation.size() == 1);
  CHECK(b.test.size() == 2);
}

TEST_CASE("split: deterministic exact partition") {
  for (std::size_t n : {1u, 2u, 3u, 17u, 100u, 1001u}) {
    const auto x = split_indices(n, {0.8, 0.1, 0.1}, 42);
    const auto y = split_indices(n, {0.8, 0.1, 0.1}, 42);
    CHECK(x.train == y.train);
    CHECK(x.validation == y.validation);
    CHECK(x.test == y.test);
    std::vector<std::size_t> all;
    for (const auto* part : {&x.train, &x.validation, &x.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(n);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(all == expected);
    CHECK(std::abs(static_cast<double>(x.train.size()) - 0.8 * static_cast<double>(n)) < 1.0);
    CHECK(std::abs(static_cast<double>(x.test.size()) - 0.1 * static_cast<double>(n)) < 1.0);
  }
  CHECK(split_indices(100, {0.8, 0.1, 0.1}, 1).train != split_indices(100, {0.8, 0.1, 0.1}, 2).train);
}

TEST_CASE("split: errors") {
  CHECK_THROWS_AS(split_indices(0, {0.8, 0.1, 0.1}, 1), PreconditionError);
  CHECK_THROWS_AS(split_indices(10, {0.8, 0.1, 0.2}, 1), PreconditionError);
  CHECK_THROWS_AS(split_indices(10, {1.0, 0.0, 0.0}, 1), PreconditionError);
}

TEST_CASE("split_records: shared vocabulary with training frequencies") {
  SyntheticSpec spec;
  spec.fields = 2;
  spec.values_per_field = {200, 5};
  spec.instances = 300;
  spec.seed = 9;
  const auto records = generate_synthetic_records(spec);
  const auto schema = discover_schema(records);
  const auto splits = split_records(records, schema, {}, 4);
  CHECK(splits.train.vocabulary == splits.test.vocabulary);
  const auto& vocab = *splits.train.vocabulary;

  std::vector<std::uint64_t> counts(vocab.size(), 0);
  for (const auto& inst : splits.train.instances)
    for (const auto& slot : inst.slots)
      for (FeatureId id : slot) ++counts[id];
  CHECK(counts == vocab.frequencies());

  // Every test value has its own id; none collapse onto the unknown id.
  for (const auto& inst : splits.test.instances)
    for (const auto& slot : inst.slots)
      for (FeatureId id : slot) CHECK_FALSE(vocab.is_unknown(id));
}

TEST_CASE("frequency buckets: sort oracle, ties, errors") {
  // Frequencies a:1, b:5, c:9, d:10.
  std::ostringstream text;
  const std::pair<const char*, int> counts[] = {{"a", 1}, {"b", 5}, {"c", 9}, {"d", 10}};
  for (const auto& [value, count] : counts)
    for (int i = 0; i < count; ++i) text << "1,f:" << value << '\n';
  std::istringstream in(text.str());
  const auto train = parse_dataset(in);
  const auto& vocab = *train.vocabulary;
  const auto buckets = compute_frequency_buckets(train, 2);
  CHECK(buckets.bucket_of(*vocab.lookup(0, "a")) == 0u);
  CHECK(buckets.bucket_of(*vocab.lookup(0, "b")) == 0u);
  CHECK(buckets.bucket_of(*vocab.lookup(0, "c")) == 1u);
  CHECK(buckets.bucket_of(*vocab.lookup(0, "d")) == 1u);
  CHECK_FALSE(buckets.bucket_of(vocab.unknown_id(0)).has_value());
  CHECK(buckets.ranges[0].min_frequency == 1);
  CHECK(buckets.ranges[0].max_frequency == 5);
  CHECK(buckets.ranges[1].id_count == 2);

  std::istringstream flat_in("1,f:p\n1,f:q\n1,f:r\n");
  const auto flat = parse_dataset(flat_in);
  const auto by_id = compute_frequency_buckets(flat, 3);
  for (FeatureId id = 0; id < 3; ++id) CHECK(by_id.bucket_of(id) == id);

  CHECK_THROWS_AS(compute_frequency_buckets(train, 1), PreconditionError);
  CHECK_THROWS_AS(compute_frequency_buckets(train, 5), PreconditionError);
}

TEST_CASE("frequency buckets: monotone with near-equal sizes") {
  SyntheticSpec spec;
  spec.fields = 3;
  spec.values_per_field = {80, 40, 7};
  spec.instances = 1500;
  spec.seed = 2;
  const auto ds = generate_synthetic(spec);
  for (std::size_t count : {2u, 3u, 5u, 7u}) {
    const auto buckets = compute_frequency_buckets(ds, count);
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& r : buckets.ranges) {
      lo = std::min(lo, r.id_count);
      hi = std::max(hi, r.id_count);
    }
    CHECK(hi - lo <= 1);
    for (FeatureId a = 0; a < ds.vocabulary->size(); ++a) {
      for (FeatureId b = 0; b < ds.vocabulary->size(); ++b) {
        const auto ba = buckets.bucket_of(a), bb = buckets.bucket_of(b);
        if (ba && bb && buckets.frequency[a] < buckets.frequency[b]) CHECK(*ba <= *bb);
      }
    }
  }
}

TEST_CASE("synthetic: noiseless rule determines labels") {
  SyntheticSpec spec;
  spec.fields = 3;
  spec.values_per_field = {20};
  spec.instances = 500;
  spec.rule.positive_features = {{"f0", "v1"}, {"f2", "v0"}};
  spec.rule.p_positive = 1.0;
  spec.rule.p_negative = 0.0;
  spec.seed = 17;
  const auto ds = generate_synthetic(spec);
  const auto& vocab = *ds.vocabulary;
  const FeatureId p1 = *vocab.lookup(0, "v1");
  const FeatureId p2 = *vocab.lookup(2, "v0");
  std::size_t positives = 0;
  for (const auto& inst : ds.instances) {
    const bool carries = inst.slots[0][0] == p1 || inst.slots[2][0] == p2;
    CHECK(inst.label == (carries ? 1 : 0));
    positives += inst.label;
  }
  CHECK(positives > 0);
  CHECK(positives < ds.size());
}

TEST_CASE("synthetic: deterministic given the seed") {
  SyntheticSpec spec;
  spec.instances = 200;
  spec.groups = 3;
  spec.coherence = 0.7;
  spec.max_values_per_slot = 2;
  spec.rule.positive_groups = {0};
  spec.seed = 8;
  CHECK(generate_synthetic_records(spec).size() == 200);
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a == b);
  spec.seed = 9;
  CHECK_FALSE(generate_synthetic(spec) == a);
}

TEST_CASE("synthetic: power-law tail matches the empirical histogram") {
  SyntheticSpec spec;
  spec.fields = 1;
  spec.values_per_field = {1000};
  spec.instances = 40000;
  spec.exponent = 1.5;
  spec.seed = 1;
  const auto records = generate_synthetic_records(spec);
  std::vector<double> hist(1000, 0.0);
  for (const auto& r : records) hist[std::stoul(r.tokens[0].second.substr(1))] += 1.0;

  // Expected mass of ranks 500..999 under weights (rank + 1)^-1.5.
  double total = 0.0, tail = 0.0;
  for (int r = 0; r < 1000; ++r) {
    const double w = std::pow(r + 1.0, -1.5);
    total += w;
    if (r >= 500) tail += w;
  }
  const double expected_tail = tail / total;
  const double observed_tail =
      std::accumulate(hist.begin() + 500, hist.end(), 0.0) / static_cast<double>(records.size());
  // Binomial standard error is ~0.0007 here.
  CHECK(std::abs(observed_tail - expected_tail) < 0.004);

  std::vector<double> sorted = hist;
  std::sort(sorted.begin(), sorted.end());
  const double rarest_half = std::accumulate(sorted.begin(), sorted.begin() + 500, 0.0) /
                             static_cast<double>(records.size());
  CHECK(rarest_half < 0.1);
  CHECK(rarest_half <= observed_tail);
}

TEST_CASE("synthetic: invalid rule references") {
  SyntheticSpec spec;
  spec.rule.positive_features = {{"nope", "v1"}};
  CHECK_THROWS_AS(generate_synthetic(spec), PreconditionError);
  spec.rule.positive_features = {{"f0", "v100000"}};
  CHECK_THROWS_AS(generate_synthetic(spec), PreconditionError);
  spec.rule.positive_features.clear();
  spec.rule.positive_groups = {3};
  CHECK_THROWS_AS(generate_synthetic(spec), PreconditionError);
}

TEST_CASE("retrieval generator: schema, labels, distinct items per user") {
  RetrievalSpec spec;
  spec.users = 40;
  spec.items = 60;
  spec.clusters = 4;
  spec.interactions_per_user = 5;
  spec.seed = 3;
  const auto records = generate_retrieval_records(spec);
  CHECK(records.size() == 200);
  CHECK(discover_schema(records) == std::vector<std::string>{"user", "ucluster", "item", "icluster"});
  std::map<std::string, std::set<std::string>> items_of;
  for (const auto& r : records) {
    CHECK(r.label == 1);
    CHECK(items_of[r.tokens[0].second].insert(r.tokens[2].second).second);
  }
  CHECK(items_of.size() == 40);
}
