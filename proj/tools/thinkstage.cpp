#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "thinkstage/experiment.hpp"
#include "thinkstage/rollout.hpp"

namespace {

enum Exit { kOk = 0, kConfigError = 1, kRuntimeFault = 2 };

struct Options {
  std::string config;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> seeds;
  std::vector<std::string> overrides;
  int workers = 0;
  bool print_config = false;
  bool dry_run = false;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("-c,--config", o.config, "Run config (JSON), or an artifact that embeds one");
  cmd->add_option("--seed", o.seed, "Override the run seed");
  cmd->add_option("--seeds", o.seeds, "Override dynamics.seeds");
  cmd->add_option("--set", o.overrides, "Override an existing config field: dotted.key=value");
  cmd->add_option("-j,--workers", o.workers, "OpenMP worker count (does not affect results)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--print-config", o.print_config, "Echo the resolved config to stderr before running");
  cmd->add_flag("--dry-run", o.dry_run, "Echo the resolved config to stdout and exit");
}

int execute(const Options& o) {
  using namespace thinkstage;
  RunConfig cfg;
  try {
    Json doc = o.config.empty() ? Json::object() : load_config_document(o.config);
    if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
    if (!o.mode.empty()) doc["mode"] = o.mode;
    if (o.seed) doc["seed"] = *o.seed;
    if (o.seeds) doc["dynamics"]["seeds"] = *o.seeds;
    for (const auto& s : o.overrides) apply_override(doc, s);
    cfg = parse_config(doc);
  } catch (const ConfigError& e) {
    std::cerr << e.to_json().dump(2) << '\n';
    return kConfigError;
  }

  if (o.dry_run) {
    std::cout << to_json(cfg).dump(2) << '\n';
    return kOk;
  }
  if (o.print_config) std::cerr << to_json(cfg).dump(2) << '\n';
  if (o.workers > 0) set_worker_count(o.workers);

  try {
    const RunOutcome out = run(cfg);
    const bool training = cfg.mode == RunMode::kZero || cfg.mode == RunMode::kPtst;
    if (training && cfg.metrics_out.empty())
      std::cout << out.metrics_jsonl;
    else if (cfg.summary_out.empty())
      std::cout << out.summary_csv;
  } catch (const ConfigError& e) {
    std::cerr << e.to_json().dump(2) << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "thinkstage: " << e.what() << '\n';
    return kRuntimeFault;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Staged GRPO training on a tabular policy, plus the reasoning-data pipeline"};
  app.require_subcommand(1);
  Options opts;

  auto* run = app.add_subcommand("run", "Run any mode");
  run->add_option("-m,--mode", opts.mode, "zero | ptst | pipeline | stats | dynamics")
      ->check(CLI::IsMember({"zero", "ptst", "pipeline", "stats", "dynamics"}));
  add_common(run, opts);

  auto* train = app.add_subcommand("train", "GRPO training (zero or staged)");
  train->add_option("-m,--mode", opts.mode, "zero | ptst")->required()->check(CLI::IsMember({"zero", "ptst"}));
  add_common(train, opts);

  for (const char* fixed : {"pipeline", "stats", "dynamics"}) {
    const std::string name = fixed;
    const std::string help = name == "pipeline" ? "Build a reasoning dataset from a VQA corpus"
                             : name == "stats"  ? "Count reflection markers in a dataset"
                                                : "Paired staged vs fixed-length runs over several seeds";
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, opts);
    cmd->callback([&opts, name] { opts.mode = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }
  return execute(opts);
}
