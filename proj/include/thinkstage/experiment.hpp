#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "thinkstage/cot/backend.hpp"
#include "thinkstage/cot/markers.hpp"
#include "thinkstage/cot/pipeline.hpp"
#include "thinkstage/env.hpp"
#include "thinkstage/grpo.hpp"
#include "thinkstage/policy.hpp"
#include "thinkstage/ptst.hpp"
#include "thinkstage/reward.hpp"
#include "thinkstage/schedule.hpp"

namespace thinkstage {

using Json = nlohmann::ordered_json;

enum class RunMode { kZero, kPtst, kPipeline, kStats, kDynamics };

std::string to_string(RunMode mode);
std::optional<RunMode> parse_run_mode(const std::string& name);

enum class InitKind { kUniform, kColdStart, kCheckpoint };

/// Instruction prepended to every question in zero mode.
extern const std::string kSystemPrompt;

struct BackendSpec {
  std::string kind = "replay";  // replay | remote
  std::string name;             // replay only; reported as the backend id
  cot::EndpointConfig endpoint;  // remote only
};

struct RunConfig {
  RunMode mode = RunMode::kPtst;
  std::uint64_t seed = 0;
  Schedule schedule;
  RewardSpec reward;
  std::string system_prompt;  // empty: none
  EnvSpec env;
  std::size_t num_questions = 8;
  std::size_t num_fillers = 4;
  GrpoHyperParams grpo;
  std::size_t batch_size = 8;

  InitKind init = InitKind::kColdStart;
  ColdStartShape cold_start{0.998, 40.0};
  std::string init_checkpoint;

  std::size_t eval_per_question = 256;
  std::size_t eval_max_len = 256;

  std::size_t dynamics_seeds = 5;
  Schedule long_arm;

  BackendSpec mllm;
  BackendSpec reasoner;
  std::size_t max_in_flight = 4;

  std::vector<std::string> markers;

  // Inputs take part in the config digest; outputs do not.
  std::string dataset_in;
  std::string fixtures;
  std::string rules;

  std::string metrics_out;
  std::string checkpoint_out;
  std::string dataset_out;
  std::string summary_out;
};

/// Mode defaults at desk scale (divisor 64).
RunConfig default_config(RunMode mode);

/// Full canonical JSON, including the outputs table.
Json to_json(const RunConfig& cfg);

/// Canonical JSON without the outputs table; this is what artifacts embed.
Json provenance_config(const RunConfig& cfg);

/// sha256 of provenance_config(cfg).dump().
std::string config_digest(const RunConfig& cfg);

struct ConfigIssue {
  std::string field;
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  ConfigError(std::string field, std::string message);
  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }
  Json to_json() const;

 private:
  std::vector<ConfigIssue> issues_;
};

/// Overlays `doc` on the defaults of its mode (or `mode_override`), then
/// validates. Unknown fields, type mismatches and invalid values are all
/// collected and thrown together as ConfigError.
RunConfig parse_config(const Json& doc, std::optional<RunMode> mode_override = std::nullopt);

/// Every semantic problem of `cfg`, including missing input files.
std::vector<ConfigIssue> validate(const RunConfig& cfg);

/// Reads a config file. Artifacts are accepted too: a metrics log's first
/// line or a dataset manifest carries the config that produced it.
Json load_config_document(const std::filesystem::path& path);

/// Sets `dotted.key` in `doc` to `value` (parsed as JSON, else taken as a
/// string). The key must already exist in `doc` or in the mode defaults.
void apply_override(Json& doc, const std::string& assignment);

/// {config_digest, seed, tool_version, config}
Json provenance(const RunConfig& cfg);

struct TrainResult {
  std::vector<StepMetrics> log;
  TabularPolicy policy;
  EvalResult initial;
  EvalResult final;
};

/// One training run of zero or ptst shape. Replica i uses seed + i and an
/// env seed shifted by i.
TrainResult run_training(const RunConfig& cfg, const Schedule& schedule, std::size_t replica = 0,
                         const MetricsSink& sink = {});

struct DynamicsRow {
  std::uint64_t seed = 0;
  double ptst_accuracy = 0.0;
  double long_accuracy = 0.0;
  double ptst_len_before = 0.0;  // mean_len over the last 5 steps of stage 1
  double ptst_len_after = 0.0;   // mean_len over the first 5 steps of stage 2
  double ptst_think_len = 0.0;
  double long_think_len = 0.0;
};

std::vector<DynamicsRow> run_dynamics(const RunConfig& cfg);

/// Total sampled-token budget: sum of steps * group_size * max_len.
std::size_t token_budget(const Schedule& schedule);

struct RunOutcome {
  std::vector<StepMetrics> metrics;
  std::optional<TrainResult> training;
  std::vector<DynamicsRow> dynamics;
  std::optional<cot::Manifest> manifest;
  cot::MarkerCounts markers;
  std::string metrics_jsonl;  // header line plus one line per step
  std::string summary_csv;
};

/// Executes the configured mode and writes every artifact whose output path
/// is set.
RunOutcome run(const RunConfig& cfg);

}  // namespace thinkstage
