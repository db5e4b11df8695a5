#include "hyperformer_cli/commands.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

#include "hyperformer/checkpoint.hpp"
#include "hyperformer/scoring.hpp"
#include "hyperformer/sliced_eval.hpp"
#include "hyperformer/synthetic.hpp"

namespace hyperformer::cli {

namespace {

std::ofstream open_output(const std::filesystem::path& path, const char* what) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PreconditionError(std::string("cannot write ") + what + " '" + path.string() + "'");
  return out;
}

void require_path(const std::filesystem::path& path, const char* key) {
  if (path.empty()) throw ConfigError(key, "required by this command");
}

std::string describe(const ModelConfig& m, std::size_t n) {
  std::ostringstream s;
  s << "N=" << n << " d=" << m.d << " layers=" << m.layers << " fields=" << m.fields
    << " head=" << to_string(m.head) << " scale_scores=" << m.scale_scores
    << " use_ffn=" << m.use_ffn;
  if (m.head == HeadKind::mlp || m.head == HeadKind::two_tower) s << " hidden=" << m.hidden;
  if (m.head == HeadKind::two_tower) {
    s << " tower_width=" << m.tower_width << " user_fields=" << m.user_fields;
  }
  return s.str();
}

std::string format_optional(const std::optional<double>& value) {
  return value ? format_metric(*value) : "NA";
}

ItemCatalog catalog_of(const PreparedRun& run) {
  const Dataset* all[] = {&run.splits.train, &run.splits.validation, &run.splits.test};
  return build_item_catalog(all, run.model.user_fields);
}

RetrievalMetrics retrieval_metrics(const ModelState& state, const ItemCatalog& catalog,
                                   const PreparedRun& run, bool test, std::size_t k) {
  if (test) {
    const Dataset* known[] = {&run.splits.train, &run.splits.validation};
    return evaluate_retrieval(state, catalog, run.splits.test, known, k);
  }
  const Dataset* known[] = {&run.splits.train};
  return evaluate_retrieval(state, catalog, run.splits.validation, known, k);
}

ModelState load_matching_checkpoint(const RunConfig& config, const PreparedRun& run) {
  require_path(config.checkpoint, "checkpoint");
  ModelState state = load_checkpoint(config.checkpoint, run.model.message_passing);
  const std::size_t n = run.splits.train.vocabulary->size();
  const auto& c = state.config;
  const auto& m = run.model;
  bool same = state.vocabulary_size() == n && c.d == m.d && c.layers == m.layers &&
              c.fields == m.fields && c.head == m.head && c.scale_scores == m.scale_scores &&
              c.use_ffn == m.use_ffn;
  if (same && (m.head == HeadKind::mlp || m.head == HeadKind::two_tower)) same = c.hidden == m.hidden;
  if (same && m.head == HeadKind::two_tower) {
    same = c.tower_width == m.tower_width && c.user_fields == m.user_fields;
  }
  if (!same) {
    throw PreconditionError("checkpoint '" + config.checkpoint.string() + "' has " +
                            describe(c, state.vocabulary_size()) + " but config gives " +
                            describe(m, n));
  }
  if (!config.vocabulary.empty() && std::filesystem::exists(config.vocabulary)) {
    std::ifstream in(config.vocabulary);
    if (FeatureVocabulary::read(in) != *run.splits.train.vocabulary) {
      throw PreconditionError("vocabulary '" + config.vocabulary.string() +
                              "' differs from the one derived from data and seed");
    }
  }
  return state;
}

void write_report(const RunConfig& config, const PreparedRun& run, const ModelState& state,
                  std::size_t bucket_count, std::ostream& out) {
  const auto buckets = compute_frequency_buckets(run.splits.train, bucket_count);
  const std::size_t batch = config.train.batch_size;
  const auto report = sliced_eval(
      run.splits.test, buckets,
      [&](std::span<const SparseInstance> xs) { return predict_probabilities(state, xs, batch); },
      config.slice_mode);
  if (config.report.empty()) {
    write_sliced_report(out, report);
    return;
  }
  auto file = open_output(config.report, "report");
  write_sliced_report(file, report);
  out << "sliced report: " << config.report.string() << '\n';
}

}  // namespace

std::string format_metric(double value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

PreparedRun prepare_run(const RunConfig& config) {
  config.validate();
  require_path(config.data, "data");
  if (!std::filesystem::exists(config.data)) {
    throw ConfigError("data", "no such file '" + config.data.string() + "'");
  }
  const auto records = read_records(config.data);
  if (records.empty()) throw DataError("dataset '" + config.data.string() + "' has no records");

  PreparedRun run;
  run.schema = discover_schema(records);
  run.model = config.model;
  run.model.fields = run.schema.size();
  run.model.validate();
  run.splits = split_records(records, run.schema, config.split, config.seed);
  return run;
}

void cmd_synth(const RunConfig& config, std::ostream& out) {
  config.validate();
  require_path(config.data, "data");

  std::vector<RawRecord> records;
  std::ostringstream provenance;
  provenance << "# hyperformer synth\nmode = " << to_string(config.mode)
             << "\nseed = " << config.seed << '\n';
  if (config.mode == RunMode::ctr) {
    SyntheticSpec spec = config.synth;
    spec.seed = config.seed;
    records = generate_synthetic_records(spec);
    provenance << "synth.instances = " << spec.instances << "\nsynth.fields = " << spec.fields
               << "\nsynth.values_per_field = ";
    for (std::size_t i = 0; i < spec.values_per_field.size(); ++i) {
      provenance << (i ? "," : "") << spec.values_per_field[i];
    }
    provenance << "\nsynth.exponent = " << format_metric(spec.exponent)
               << "\nsynth.groups = " << spec.groups
               << "\nsynth.coherence = " << format_metric(spec.coherence)
               << "\nsynth.max_values_per_slot = " << spec.max_values_per_slot
               << '\n';
    // Empty lists are omitted so the sidecar parses back as a config file.
    if (!spec.rule.positive_groups.empty()) {
      provenance << "synth.positive_groups = ";
      for (std::size_t i = 0; i < spec.rule.positive_groups.size(); ++i) {
        provenance << (i ? "," : "") << spec.rule.positive_groups[i];
      }
      provenance << '\n';
    }
    if (!spec.rule.positive_features.empty()) {
      provenance << "synth.positive_features = ";
      for (std::size_t i = 0; i < spec.rule.positive_features.size(); ++i) {
        const auto& [field, value] = spec.rule.positive_features[i];
        provenance << (i ? "," : "") << field << ':' << value;
      }
      provenance << '\n';
    }
    provenance << "synth.p_positive = " << format_metric(spec.rule.p_positive)
               << "\nsynth.p_negative = " << format_metric(spec.rule.p_negative) << '\n';
  } else {
    RetrievalSpec spec = config.retrieval_synth;
    spec.seed = config.seed;
    records = generate_retrieval_records(spec);
    provenance << "synth.users = " << spec.users << "\nsynth.items = " << spec.items
               << "\nsynth.clusters = " << spec.clusters
               << "\nsynth.interactions_per_user = " << spec.interactions_per_user
               << "\nsynth.affinity = " << format_metric(spec.affinity)
               << "\nsynth.attribute_noise = " << format_metric(spec.attribute_noise) << '\n';
  }

  {
    auto file = open_output(config.data, "dataset");
    write_records(file, records);
    if (!file) throw PreconditionError("write failed for '" + config.data.string() + "'");
  }
  auto sidecar_path = config.data;
  sidecar_path += ".provenance";
  auto sidecar = open_output(sidecar_path, "provenance");
  sidecar << provenance.str();
  out << "wrote " << records.size() << " records to " << config.data.string() << '\n';
}

void cmd_train(const RunConfig& config, std::ostream& out) {
  const PreparedRun run = prepare_run(config);
  require_path(config.checkpoint, "checkpoint");
  const auto& vocab = *run.splits.train.vocabulary;
  const bool ctr = config.mode == RunMode::ctr;

  std::optional<ItemCatalog> catalog;
  if (!ctr) catalog = catalog_of(run);

  ModelState state = init_model(run.model, vocab.size(), config.seed);
  OptimizerState opt;
  TrainConfig train = config.train;
  train.shuffle_seed = config.seed;

  std::ofstream log_file;
  if (!config.log.empty()) log_file = open_output(config.log, "log");
  const std::string header =
      ctr ? "epoch\tmeanTrainLoss\tvalAUC\tvalLogLoss\twallTimeSeconds"
          : "epoch\tmeanTrainLoss\tvalNDCG@" + std::to_string(config.top_k) + "\tvalRecall@" +
                std::to_string(config.top_k) + "\twallTimeSeconds";
  if (log_file.is_open()) log_file << header << '\n';
  out << header << '\n';

  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    const auto report = train_epoch(run.splits.train, state, opt, train, epoch,
                                     catalog ? &*catalog : nullptr);
    std::string a, b;
    if (ctr) {
      const auto m = evaluate_ctr(state, run.splits.validation, train.batch_size);
      a = format_optional(m.auc);
      b = format_metric(m.logloss);
    } else {
      const auto m = retrieval_metrics(state, *catalog, run, false, config.top_k);
      a = format_metric(m.ndcg);
      b = format_metric(m.recall);
    }
    const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
    std::ostringstream line;
    line << epoch + 1 << '\t' << format_metric(report.mean_loss) << '\t' << a << '\t' << b
         << '\t' << format_metric(wall.count());
    if (log_file.is_open()) log_file << line.str() << '\n' << std::flush;
    out << line.str() << '\n';
  }

  save_checkpoint(config.checkpoint, state);
  if (!config.vocabulary.empty()) {
    auto file = open_output(config.vocabulary, "vocabulary");
    vocab.write(file);
  }
  out << "checkpoint: " << config.checkpoint.string() << '\n';
}

void cmd_eval(const RunConfig& config, std::ostream& out) {
  const PreparedRun run = prepare_run(config);
  const ModelState state = load_matching_checkpoint(config, run);

  if (config.mode == RunMode::ctr) {
    out << "split\tAUC\tLogLoss\tcount\n";
    const std::pair<const char*, const Dataset*> parts[] = {
        {"validation", &run.splits.validation}, {"test", &run.splits.test}};
    for (const auto& [name, split] : parts) {
      const auto m = evaluate_ctr(state, *split, config.train.batch_size);
      out << name << '\t' << format_optional(m.auc) << '\t' << format_metric(m.logloss) << '\t'
          << m.count << '\n';
    }
    if (config.buckets > 0) write_report(config, run, state, config.buckets, out);
    return;
  }

  const auto catalog = catalog_of(run);
  const std::string k = std::to_string(config.top_k);
  out << "split\tNDCG@" << k << "\tRecall@" << k << "\tusers\n";
  for (bool test : {false, true}) {
    const auto m = retrieval_metrics(state, catalog, run, test, config.top_k);
    out << (test ? "test" : "validation") << '\t' << format_metric(m.ndcg) << '\t'
        << format_metric(m.recall) << '\t' << m.users << '\n';
  }
}

void cmd_slice(const RunConfig& config, std::ostream& out) {
  if (config.mode != RunMode::ctr) {
    throw ConfigError("mode", "sliced reports need ctr mode");
  }
  const PreparedRun run = prepare_run(config);
  const ModelState state = load_matching_checkpoint(config, run);
  write_report(config, run, state, config.buckets > 0 ? config.buckets : 5, out);
}

}  // namespace hyperformer::cli
