#include <ostream>

#include <CLI11.hpp>

#include "hyperformer_cli/commands.hpp"

namespace hyperformer::cli {

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"hyperformer: in-batch feature hypergraph embeddings for sparse categorical data"};
  app.require_subcommand(1);

  std::string config_path;
  std::string checkpoint;
  std::string mode;
  std::uint64_t seed = 0;
  std::size_t buckets = 0;
  bool no_hyperformer = false;

  struct Command {
    const char* name;
    const char* help;
    void (*run)(const RunConfig&, std::ostream&);
  };
  const Command commands[] = {
      {"synth", "Generate a synthetic dataset", cmd_synth},
      {"train", "Train a model and write a checkpoint", cmd_train},
      {"eval", "Evaluate a checkpoint on the validation and test splits", cmd_eval},
      {"slice", "Write the frequency-sliced test report", cmd_slice},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "key = value run configuration")->required();
    sub->add_option("--checkpoint", checkpoint, "checkpoint path (overrides config)");
    sub->add_option("--seed", seed, "run seed (overrides config)");
    sub->add_flag("--no-hyperformer", no_hyperformer,
                  "skip message passing; instance embeddings come straight from the table");
    sub->add_option("--buckets", buckets, "frequency buckets for the sliced report");
    sub->add_option("--mode", mode, "ctr or retrieval")
        ->check(CLI::IsMember({"ctr", "retrieval"}));
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    RunConfig config = load_run_config(config_path);
    Overrides overrides;
    overrides.no_hyperformer = no_hyperformer;
    for (auto* sub : subs) {
      if (!sub->parsed()) continue;
      if (sub->count("--seed")) overrides.seed = seed;
      if (sub->count("--checkpoint")) overrides.checkpoint = checkpoint;
      if (sub->count("--buckets")) overrides.buckets = buckets;
      if (sub->count("--mode")) overrides.mode = parse_run_mode(mode);
    }
    apply_overrides(config, overrides);
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) commands[i].run(config, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace hyperformer::cli
