#include <benchmark/benchmark.h>

#include <algorithm>

#include "hyperformer/hypergraph.hpp"
#include "hyperformer/metrics.hpp"
#include "hyperformer/synthetic.hpp"
#include "hyperformer/train.hpp"

using namespace hyperformer;

namespace {

// Encoded planted-rule batch of `n` instances over 4 power-law fields.
std::vector<SparseInstance> sample_batch(std::size_t n, std::size_t& vocabulary_size) {
  SyntheticSpec spec;
  spec.instances = n;
  spec.values_per_field = {500, 50, 20, 10};
  spec.groups = 4;
  spec.coherence = 0.8;
  spec.rule.positive_groups = {0, 1};
  spec.seed = 5;
  const auto records = generate_synthetic_records(spec);
  const auto data = encode_records(records, std::make_shared<const FeatureVocabulary>(
                                                FeatureVocabulary::build(records, discover_schema(records))));
  vocabulary_size = data.vocabulary->size();
  return data.instances;
}

ModelState sample_model(std::size_t vocabulary_size, std::size_t layers) {
  ModelConfig cfg;
  cfg.d = 16;
  cfg.layers = layers;
  cfg.fields = 4;
  return init_model(cfg, vocabulary_size, 1);
}

void BM_BuildHypergraph(benchmark::State& state) {
  std::size_t n_vocab = 0;
  const auto batch = sample_batch(static_cast<std::size_t>(state.range(0)), n_vocab);
  for (auto _ : state) benchmark::DoNotOptimize(build_batch_hypergraph(batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildHypergraph)->Arg(64)->Arg(256)->Arg(1024);

void BM_Forward(benchmark::State& state) {
  std::size_t n_vocab = 0;
  const auto batch = sample_batch(static_cast<std::size_t>(state.range(0)), n_vocab);
  const auto model = sample_model(n_vocab, static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(forward_batch(batch, model));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Args({64, 1})->Args({64, 2})->Args({256, 2});

void BM_ForwardBackward(benchmark::State& state) {
  std::size_t n_vocab = 0;
  const auto batch = sample_batch(static_cast<std::size_t>(state.range(0)), n_vocab);
  const auto model = sample_model(n_vocab, 2);
  std::vector<int> labels;
  for (const auto& x : batch) labels.push_back(x.label);
  for (auto _ : state) {
    const auto fwd = forward_batch(batch, model);
    const auto loss = bce_loss(fwd.logits(), labels);
    benchmark::DoNotOptimize(backward(fwd, model, loss.d_logits));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(256);

void BM_TrainStep(benchmark::State& state) {
  std::size_t n_vocab = 0;
  const auto batch = sample_batch(64, n_vocab);
  auto model = sample_model(n_vocab, 2);
  OptimizerState opt;
  const AdamConfig adam;
  for (auto _ : state) benchmark::DoNotOptimize(train_step(batch, model, opt, adam));
}
BENCHMARK(BM_TrainStep);

void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.uniform(0.0, 1.0);
    labels[i] = rng.bernoulli(0.3) ? 1 : 0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc(scores, labels));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Auc)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
