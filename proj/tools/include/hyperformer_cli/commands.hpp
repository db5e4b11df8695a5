#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hyperformer/dataset.hpp"
#include "hyperformer/model.hpp"
#include "hyperformer_cli/run_config.hpp"

namespace hyperformer::cli {

/// Data as every command sees it: records split by the run seed, one shared
/// vocabulary, and the model config completed with the schema's field count.
struct PreparedRun {
  std::vector<std::string> schema;
  DatasetSplits splits;
  ModelConfig model;
};

PreparedRun prepare_run(const RunConfig& config);

/// Shortest text that reads back to the same double.
std::string format_metric(double value);

/// Writes the dataset plus a `<data>.provenance` sidecar.
void cmd_synth(const RunConfig& config, std::ostream& out);
/// Trains from scratch; writes checkpoint, vocabulary and the epoch log.
void cmd_train(const RunConfig& config, std::ostream& out);
/// Validation and test metrics for the checkpoint; in ctr mode with
/// `buckets` set, also the sliced report.
void cmd_eval(const RunConfig& config, std::ostream& out);
/// Sliced report only (ctr mode); 5 buckets unless configured.
void cmd_slice(const RunConfig& config, std::ostream& out);

/// Full command line. Returns the process exit status; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hyperformer::cli
