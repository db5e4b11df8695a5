#include "hyperformer_cli/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <set>

namespace hyperformer::cli {

RunMode parse_run_mode(std::string_view text) {
  if (text == "ctr") return RunMode::ctr;
  if (text == "retrieval") return RunMode::retrieval;
  throw ConfigError("mode", "expected ctr or retrieval, got '" + std::string(text) + "'");
}

std::string to_string(RunMode mode) { return mode == RunMode::ctr ? "ctr" : "retrieval"; }

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = text.find(',', start);
    auto item = trim(std::string_view(text).substr(start, comma - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_integer(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
  }
  return value;
}

double parse_real(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used == text.size() && std::isfinite(value)) return value;
  } catch (const std::exception&) {
  }
  throw ConfigError(key, "expected a finite number, got '" + text + "'");
}

bool parse_flag(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value,
                                  const std::filesystem::path& base)>;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return (p.is_absolute() || base.empty() ? p : base / p).lexically_normal();
}

const std::map<std::string, Setter, std::less<>>& setters() {
  using P = std::filesystem::path;
  static const std::map<std::string, Setter, std::less<>> table = {
      {"mode", [](RunConfig& c, auto&, auto& v, auto&) { c.mode = parse_run_mode(v); }},
      {"seed", [](RunConfig& c, auto& k, auto& v, auto&) { c.seed = parse_integer<std::uint64_t>(k, v); }},
      {"data", [](RunConfig& c, auto&, auto& v, const P& b) { c.data = resolve(b, v); }},
      {"checkpoint", [](RunConfig& c, auto&, auto& v, const P& b) { c.checkpoint = resolve(b, v); }},
      {"vocabulary", [](RunConfig& c, auto&, auto& v, const P& b) { c.vocabulary = resolve(b, v); }},
      {"log", [](RunConfig& c, auto&, auto& v, const P& b) { c.log = resolve(b, v); }},
      {"report", [](RunConfig& c, auto&, auto& v, const P& b) { c.report = resolve(b, v); }},

      {"split.train", [](RunConfig& c, auto& k, auto& v, auto&) { c.split.train = parse_real(k, v); }},
      {"split.validation", [](RunConfig& c, auto& k, auto& v, auto&) { c.split.validation = parse_real(k, v); }},
      {"split.test", [](RunConfig& c, auto& k, auto& v, auto&) { c.split.test = parse_real(k, v); }},

      {"d", [](RunConfig& c, auto& k, auto& v, auto&) { c.model.d = parse_integer<std::size_t>(k, v); }},
      {"layers", [](RunConfig& c, auto& k, auto& v, auto&) { c.model.layers = parse_integer<std::size_t>(k, v); }},
      {"scale_scores", [](RunConfig& c, auto& k, auto& v, auto&) { c.model.scale_scores = parse_flag(k, v); }},
      {"use_ffn", [](RunConfig& c, auto& k, auto& v, auto&) { c.model.use_ffn = parse_flag(k, v); }},
      {"message_passing", [](RunConfig& c, auto& k, auto& v, auto&) { c.model.message_passing = parse_flag(k, v); }},
      {"head", [](RunConfig& c, auto& k, auto& v, auto&) {
         try {
           c.model.head = parse_head_kind(v);
         } catch (const Error& e) {
           throw ConfigError(k, e.what());
         }
       }},
      {"hidden", [](RunConfig& c, auto& k, auto& v, auto&) { c.model.hidden = parse_integer<std::size_t>(k, v); }},
      {"tower_width", [](RunConfig& c, auto& k, auto& v, auto&) { c.model.tower_width = parse_integer<std::size_t>(k, v); }},
      {"user_fields", [](RunConfig& c, auto& k, auto& v, auto&) { c.model.user_fields = parse_integer<std::size_t>(k, v); }},

      {"batch_size", [](RunConfig& c, auto& k, auto& v, auto&) { c.train.batch_size = parse_integer<std::size_t>(k, v); }},
      {"epochs", [](RunConfig& c, auto& k, auto& v, auto&) { c.train.epochs = parse_integer<std::size_t>(k, v); }},
      {"learning_rate", [](RunConfig& c, auto& k, auto& v, auto&) { c.train.adam.learning_rate = parse_real(k, v); }},
      {"beta1", [](RunConfig& c, auto& k, auto& v, auto&) { c.train.adam.beta1 = parse_real(k, v); }},
      {"beta2", [](RunConfig& c, auto& k, auto& v, auto&) { c.train.adam.beta2 = parse_real(k, v); }},
      {"epsilon", [](RunConfig& c, auto& k, auto& v, auto&) { c.train.adam.epsilon = parse_real(k, v); }},
      {"negative_samples", [](RunConfig& c, auto& k, auto& v, auto&) { c.train.negative_samples = parse_integer<std::size_t>(k, v); }},

      {"buckets", [](RunConfig& c, auto& k, auto& v, auto&) { c.buckets = parse_integer<std::size_t>(k, v); }},
      {"slice_mode", [](RunConfig& c, auto& k, auto& v, auto&) {
         if (v == "partition") c.slice_mode = SliceMode::partition;
         else if (v == "overlapping") c.slice_mode = SliceMode::overlapping;
         else throw ConfigError(k, "expected partition or overlapping, got '" + v + "'");
       }},
      {"top_k", [](RunConfig& c, auto& k, auto& v, auto&) { c.top_k = parse_integer<std::size_t>(k, v); }},

      {"synth.instances", [](RunConfig& c, auto& k, auto& v, auto&) { c.synth.instances = parse_integer<std::size_t>(k, v); }},
      {"synth.fields", [](RunConfig& c, auto& k, auto& v, auto&) { c.synth.fields = parse_integer<std::size_t>(k, v); }},
      {"synth.values_per_field", [](RunConfig& c, auto& k, auto& v, auto&) {
         c.synth.values_per_field.clear();
         for (const auto& item : split_list(v)) c.synth.values_per_field.push_back(parse_integer<std::size_t>(k, item));
       }},
      {"synth.exponent", [](RunConfig& c, auto& k, auto& v, auto&) { c.synth.exponent = parse_real(k, v); }},
      {"synth.groups", [](RunConfig& c, auto& k, auto& v, auto&) { c.synth.groups = parse_integer<std::size_t>(k, v); }},
      {"synth.coherence", [](RunConfig& c, auto& k, auto& v, auto&) { c.synth.coherence = parse_real(k, v); }},
      {"synth.max_values_per_slot", [](RunConfig& c, auto& k, auto& v, auto&) { c.synth.max_values_per_slot = parse_integer<std::size_t>(k, v); }},
      {"synth.positive_groups", [](RunConfig& c, auto& k, auto& v, auto&) {
         c.synth.rule.positive_groups.clear();
         for (const auto& item : split_list(v)) c.synth.rule.positive_groups.push_back(parse_integer<std::size_t>(k, item));
       }},
      {"synth.positive_features", [](RunConfig& c, auto& k, auto& v, auto&) {
         c.synth.rule.positive_features.clear();
         for (const auto& item : split_list(v)) {
           const auto colon = item.find(':');
           if (colon == std::string::npos) throw ConfigError(k, "expected field:value, got '" + item + "'");
           c.synth.rule.positive_features.emplace_back(item.substr(0, colon), item.substr(colon + 1));
         }
       }},
      {"synth.p_positive", [](RunConfig& c, auto& k, auto& v, auto&) { c.synth.rule.p_positive = parse_real(k, v); }},
      {"synth.p_negative", [](RunConfig& c, auto& k, auto& v, auto&) { c.synth.rule.p_negative = parse_real(k, v); }},
      {"synth.users", [](RunConfig& c, auto& k, auto& v, auto&) { c.retrieval_synth.users = parse_integer<std::size_t>(k, v); }},
      {"synth.items", [](RunConfig& c, auto& k, auto& v, auto&) { c.retrieval_synth.items = parse_integer<std::size_t>(k, v); }},
      {"synth.clusters", [](RunConfig& c, auto& k, auto& v, auto&) { c.retrieval_synth.clusters = parse_integer<std::size_t>(k, v); }},
      {"synth.interactions_per_user", [](RunConfig& c, auto& k, auto& v, auto&) { c.retrieval_synth.interactions_per_user = parse_integer<std::size_t>(k, v); }},
      {"synth.affinity", [](RunConfig& c, auto& k, auto& v, auto&) { c.retrieval_synth.affinity = parse_real(k, v); }},
      {"synth.attribute_noise", [](RunConfig& c, auto& k, auto& v, auto&) { c.retrieval_synth.attribute_noise = parse_real(k, v); }},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  const double ratios[] = {split.train, split.validation, split.test};
  const char* names[] = {"split.train", "split.validation", "split.test"};
  for (int i = 0; i < 3; ++i) {
    if (!(ratios[i] > 0.0)) throw ConfigError(names[i], "must be positive");
  }
  if (std::abs(split.train + split.validation + split.test - 1.0) > 1e-9) {
    throw ConfigError("split.train", "split ratios must sum to 1");
  }

  if (model.d == 0) throw ConfigError("d", "must be >= 1");
  if (model.layers == 0) throw ConfigError("layers", "must be >= 1");
  if (model.hidden == 0) throw ConfigError("hidden", "must be >= 1");
  if (model.tower_width == 0) throw ConfigError("tower_width", "must be >= 1");
  if (model.head == HeadKind::two_tower && model.user_fields == 0) {
    throw ConfigError("user_fields", "two-tower head needs user_fields >= 1");
  }
  if ((mode == RunMode::retrieval) != (model.head == HeadKind::two_tower)) {
    throw ConfigError("head", "retrieval mode requires the two-tower head and vice versa");
  }

  if (train.batch_size < 2) throw ConfigError("batch_size", "must be >= 2");
  if (train.epochs == 0) throw ConfigError("epochs", "must be >= 1");
  if (!(train.adam.learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
  if (!(train.adam.beta1 > 0.0 && train.adam.beta1 < 1.0)) throw ConfigError("beta1", "must lie in (0,1)");
  if (!(train.adam.beta2 > 0.0 && train.adam.beta2 < 1.0)) throw ConfigError("beta2", "must lie in (0,1)");
  if (!(train.adam.epsilon > 0.0)) throw ConfigError("epsilon", "must be positive");
  if (mode == RunMode::retrieval && train.negative_samples == 0) {
    throw ConfigError("negative_samples", "must be >= 1");
  }

  if (buckets == 1) throw ConfigError("buckets", "must be 0 (off) or >= 2");
  if (top_k == 0) throw ConfigError("top_k", "must be >= 1");
  if (synth.instances == 0) throw ConfigError("synth.instances", "must be >= 1");
  if (synth.fields == 0) throw ConfigError("synth.fields", "must be >= 1");
  if (!(synth.rule.p_positive >= 0.0 && synth.rule.p_positive <= 1.0)) {
    throw ConfigError("synth.p_positive", "must lie in [0,1]");
  }
  if (!(synth.rule.p_negative >= 0.0 && synth.rule.p_negative <= 1.0)) {
    throw ConfigError("synth.p_negative", "must lie in [0,1]");
  }
  const auto cardinalities = synth.values_per_field.size();
  if (cardinalities != 1 && cardinalities != synth.fields) {
    throw ConfigError("synth.values_per_field", "needs one entry or one per field");
  }
}

RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir) {
  RunConfig config;
  std::set<std::string, std::less<>> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("config: expected key = value", line_no);
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(key, "unknown key");
    if (!seen.insert(key).second) throw ConfigError(key, "set twice");
    if (value.empty()) throw ConfigError(key, "empty value");
    it->second(config, key, value, base_dir);
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot read config '" + path.string() + "'");
  return parse_run_config(in, path.parent_path());
}

void apply_overrides(RunConfig& config, const Overrides& overrides) {
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.checkpoint) config.checkpoint = *overrides.checkpoint;
  if (overrides.buckets) config.buckets = *overrides.buckets;
  if (overrides.mode) config.mode = *overrides.mode;
  if (overrides.no_hyperformer) config.model.message_passing = false;
}

}  // namespace hyperformer::cli
