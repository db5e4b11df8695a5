#include "hyperformer/sliced_eval.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <set>

#include "hyperformer/errors.hpp"
#include "hyperformer/metrics.hpp"

namespace hyperformer {

std::size_t rarest_bucket(const SparseInstance& instance, const FrequencyBuckets& buckets) {
  std::size_t best = buckets.bucket_count;
  for (const auto& slot : instance.slots) {
    for (FeatureId id : slot) {
      const auto b = buckets.bucket_of(id);
      best = std::min(best, b.value_or(0));
    }
  }
  if (best == buckets.bucket_count) throw PreconditionError("rarest_bucket: instance has no features");
  return best;
}

namespace {

BucketReport summarize(std::span<const double> probs, std::span<const int> labels) {
  BucketReport r;
  r.count = probs.size();
  if (probs.empty()) return r;
  r.logloss = logloss(probs, labels);
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (has_pos && has_neg) r.auc = auc(probs, labels);
  return r;
}

}  // namespace

SlicedReport sliced_eval(const Dataset& test, const FrequencyBuckets& buckets,
                         const ScoreFn& score, SliceMode mode) {
  if (test.instances.empty()) throw PreconditionError("sliced_eval: empty test split");
  const auto probs = score(test.instances);
  if (probs.size() != test.size()) {
    throw DimensionError("sliced_eval: scorer returned " + std::to_string(probs.size()) +
                         " values for " + std::to_string(test.size()) + " instances");
  }

  std::vector<std::vector<double>> bucket_probs(buckets.bucket_count);
  std::vector<std::vector<int>> bucket_labels(buckets.bucket_count);
  std::vector<int> labels(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& inst = test.instances[i];
    labels[i] = inst.label;
    std::set<std::size_t> member;
    if (mode == SliceMode::partition) {
      member.insert(rarest_bucket(inst, buckets));
    } else {
      for (const auto& slot : inst.slots) {
        for (FeatureId id : slot) member.insert(buckets.bucket_of(id).value_or(0));
      }
    }
    for (std::size_t b : member) {
      bucket_probs[b].push_back(probs[i]);
      bucket_labels[b].push_back(inst.label);
    }
  }

  SlicedReport report;
  for (std::size_t b = 0; b < buckets.bucket_count; ++b) {
    auto r = summarize(bucket_probs[b], bucket_labels[b]);
    r.min_frequency = buckets.ranges[b].min_frequency;
    r.max_frequency = buckets.ranges[b].max_frequency;
    report.buckets.push_back(r);
  }
  report.overall = summarize(probs, labels);
  report.overall.min_frequency = buckets.ranges.front().min_frequency;
  report.overall.max_frequency = buckets.ranges.back().max_frequency;
  return report;
}

namespace {

void write_row(std::ostream& out, const std::string& name, const BucketReport& r) {
  auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("NA");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return std::string(buf);
  };
  out << name << '\t' << r.min_frequency << '\t' << r.max_frequency << '\t' << r.count << '\t'
      << fmt(r.auc) << '\t' << fmt(r.logloss) << '\n';
}

}  // namespace

void write_sliced_report(std::ostream& out, const SlicedReport& report) {
  for (std::size_t b = 0; b < report.buckets.size(); ++b) {
    write_row(out, std::to_string(b), report.buckets[b]);
  }
  write_row(out, "overall", report.overall);
}

}  // namespace hyperformer
