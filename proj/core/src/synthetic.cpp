#include "hyperformer/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "hyperformer/errors.hpp"
#include "hyperformer/rng.hpp"

namespace hyperformer {
namespace {

/// Cumulative power-law table over ranks 0..n-1 with weight (rank+1)^-s.
class PowerLawSampler {
 public:
  PowerLawSampler(std::size_t n, double exponent) : cdf_(n) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      total += std::pow(static_cast<double>(r + 1), -exponent);
      cdf_[r] = total;
    }
    for (double& c : cdf_) c /= total;
  }

  std::size_t sample(Rng& rng) const {
    const double u = rng.uniform01();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

void check_spec(const SyntheticSpec& spec) {
  if (spec.fields == 0 || spec.instances == 0 || spec.groups == 0 ||
      spec.max_values_per_slot == 0) {
    throw PreconditionError("synthetic spec sizes must be positive");
  }
  if (spec.values_per_field.size() != 1 && spec.values_per_field.size() != spec.fields) {
    throw PreconditionError("synthetic spec: values_per_field needs 1 or `fields` entries");
  }
  for (std::size_t f = 0; f < spec.fields; ++f) {
    if (spec.cardinality(f) < spec.groups) {
      throw PreconditionError("synthetic spec: field f" + std::to_string(f) +
                              " has fewer values than groups");
    }
  }
  if (!(spec.exponent >= 0.0)) throw PreconditionError("synthetic spec: negative exponent");
  auto is_prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!is_prob(spec.coherence) || !is_prob(spec.rule.p_positive) ||
      !is_prob(spec.rule.p_negative)) {
    throw PreconditionError("synthetic spec: probabilities must lie in [0,1]");
  }
  for (const auto& [field, value] : spec.rule.positive_features) {
    const bool field_ok = field.size() > 1 && field[0] == 'f' &&
                          field.find_first_not_of("0123456789", 1) == std::string::npos &&
                          std::stoull(field.substr(1)) < spec.fields;
    if (!field_ok) throw PreconditionError("planted rule references unknown field '" + field + "'");
    const bool value_ok = value.size() > 1 && value[0] == 'v' &&
                          value.find_first_not_of("0123456789", 1) == std::string::npos &&
                          std::stoull(value.substr(1)) < spec.cardinality(std::stoull(field.substr(1)));
    if (!value_ok) {
      throw PreconditionError("planted rule references unknown value '" + field + ":" + value +
                              "'");
    }
  }
  for (std::size_t g : spec.rule.positive_groups) {
    if (g >= spec.groups) {
      throw PreconditionError("planted rule references unknown group " + std::to_string(g));
    }
  }
}

}  // namespace

std::vector<RawRecord> generate_synthetic_records(const SyntheticSpec& spec) {
  check_spec(spec);
  const std::size_t m = spec.fields;
  const std::size_t g_count = spec.groups;

  // positive[f][v]
  std::vector<std::vector<char>> positive(m);
  for (std::size_t f = 0; f < m; ++f) positive[f].assign(spec.cardinality(f), 0);
  for (const auto& [field, value] : spec.rule.positive_features) {
    positive[std::stoull(field.substr(1))][std::stoull(value.substr(1))] = 1;
  }
  for (std::size_t g : spec.rule.positive_groups) {
    for (std::size_t f = 0; f < m; ++f) {
      for (std::size_t v = g; v < positive[f].size(); v += g_count) positive[f][v] = 1;
    }
  }

  // Per field: a global sampler and one sampler per group over its values.
  std::vector<PowerLawSampler> global;
  std::vector<std::vector<PowerLawSampler>> within(m);
  for (std::size_t f = 0; f < m; ++f) {
    const std::size_t k = spec.cardinality(f);
    global.emplace_back(k, spec.exponent);
    for (std::size_t g = 0; g < g_count; ++g) {
      within[f].emplace_back((k - g + g_count - 1) / g_count, spec.exponent);
    }
  }

  Rng rng(spec.seed);
  std::vector<RawRecord> records;
  records.reserve(spec.instances);
  for (std::size_t i = 0; i < spec.instances; ++i) {
    RawRecord rec;
    rec.line = i + 1;
    const std::size_t group = rng.uniform_index(g_count);
    bool carries_positive = false;
    for (std::size_t f = 0; f < m; ++f) {
      const std::size_t count = 1 + rng.uniform_index(spec.max_values_per_slot);
      for (std::size_t c = 0; c < count; ++c) {
        std::size_t v;
        if (rng.bernoulli(spec.coherence)) {
          v = group + g_count * within[f][group].sample(rng);
        } else {
          v = global[f].sample(rng);
        }
        carries_positive = carries_positive || positive[f][v];
        rec.tokens.emplace_back("f" + std::to_string(f), "v" + std::to_string(v));
      }
    }
    const double p = carries_positive ? spec.rule.p_positive : spec.rule.p_negative;
    rec.label = rng.bernoulli(p) ? 1 : 0;
    records.push_back(std::move(rec));
  }
  return records;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  const auto records = generate_synthetic_records(spec);
  std::vector<std::string> schema;
  for (std::size_t f = 0; f < spec.fields; ++f) schema.push_back("f" + std::to_string(f));
  auto vocab = std::make_shared<const FeatureVocabulary>(FeatureVocabulary::build(records, schema));
  return encode_records(records, std::move(vocab));
}

std::vector<RawRecord> generate_retrieval_records(const RetrievalSpec& spec) {
  if (spec.users == 0 || spec.items == 0 || spec.clusters == 0 ||
      spec.interactions_per_user == 0) {
    throw PreconditionError("retrieval spec sizes must be positive");
  }
  if (spec.clusters > spec.items) throw PreconditionError("retrieval spec: more clusters than items");
  if (spec.interactions_per_user > spec.items) {
    throw PreconditionError("retrieval spec: more interactions per user than items");
  }

  std::vector<std::vector<std::size_t>> cluster_items(spec.clusters);
  for (std::size_t it = 0; it < spec.items; ++it) cluster_items[it % spec.clusters].push_back(it);
  if (spec.affinity >= 1.0 && spec.interactions_per_user > spec.items / spec.clusters) {
    throw PreconditionError("retrieval spec: clusters too small for affinity 1");
  }

  Rng rng(spec.seed);
  auto noisy_cluster = [&](std::size_t c) {
    return rng.bernoulli(spec.attribute_noise) ? rng.uniform_index(spec.clusters) : c;
  };
  std::vector<std::size_t> item_attr(spec.items);
  for (std::size_t it = 0; it < spec.items; ++it) item_attr[it] = noisy_cluster(it % spec.clusters);

  std::vector<RawRecord> records;
  records.reserve(spec.users * spec.interactions_per_user);
  std::vector<char> taken(spec.items);
  for (std::size_t u = 0; u < spec.users; ++u) {
    const std::size_t cluster = u % spec.clusters;
    const std::size_t user_attr = noisy_cluster(cluster);
    std::fill(taken.begin(), taken.end(), 0);
    std::size_t drawn = 0;
    while (drawn < spec.interactions_per_user) {
      std::size_t item;
      const auto& own = cluster_items[cluster];
      if (rng.bernoulli(spec.affinity)) {
        item = own[rng.uniform_index(own.size())];
      } else {
        item = rng.uniform_index(spec.items);
      }
      // Redraw on repeats; the global branch guarantees termination.
      if (taken[item]) continue;
      taken[item] = 1;
      ++drawn;
      RawRecord rec;
      rec.label = 1;
      rec.line = records.size() + 1;
      rec.tokens = {{"user", "u" + std::to_string(u)},
                    {"ucluster", "c" + std::to_string(user_attr)},
                    {"item", "i" + std::to_string(item)},
                    {"icluster", "c" + std::to_string(item_attr[item])}};
      records.push_back(std::move(rec));
    }
  }
  return records;
}

}  // namespace hyperformer
