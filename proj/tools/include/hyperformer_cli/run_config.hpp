#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "hyperformer/dataset.hpp"
#include "hyperformer/errors.hpp"
#include "hyperformer/model.hpp"
#include "hyperformer/sliced_eval.hpp"
#include "hyperformer/synthetic.hpp"
#include "hyperformer/train.hpp"

namespace hyperformer::cli {

enum class RunMode { ctr, retrieval };

RunMode parse_run_mode(std::string_view text);
std::string to_string(RunMode mode);

/// Bad or missing configuration entry; `field()` is the config key.
class ConfigError : public PreconditionError {
 public:
  ConfigError(std::string field, const std::string& what)
      : PreconditionError("config field '" + field + "': " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Everything one command needs. Relative paths are resolved against the
/// directory of the config file.
struct RunConfig {
  RunMode mode = RunMode::ctr;
  /// Drives synthesis, the split, initialization and shuffling.
  std::uint64_t seed = 0;

  std::filesystem::path data;
  std::filesystem::path checkpoint;
  std::filesystem::path vocabulary;
  std::filesystem::path log;
  std::filesystem::path report;  ///< sliced report; stdout when empty

  SplitRatios split;
  ModelConfig model;
  TrainConfig train;

  std::size_t buckets = 0;  ///< 0 disables the sliced report in `eval`
  SliceMode slice_mode = SliceMode::partition;
  std::size_t top_k = 10;

  SyntheticSpec synth;
  RetrievalSpec retrieval_synth;

  /// Throws ConfigError naming the first invalid field. Model fields that
  /// depend on the data schema are checked once the data is read.
  void validate() const;
};

/// Flat `key = value` lines; `#` starts a comment. Unknown keys are errors.
RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Command-line flags layered over the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::size_t> buckets;
  std::optional<RunMode> mode;
  bool no_hyperformer = false;
};

void apply_overrides(RunConfig& config, const Overrides& overrides);

}  // namespace hyperformer::cli
