#include "thinkstage/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "thinkstage/checkpoint.hpp"
#include "thinkstage/cot/pipeline.hpp"
#include "thinkstage/cot/rules.hpp"
#include "thinkstage/digest.hpp"

namespace thinkstage {

const std::string kSystemPrompt =
    "A conversation between User and Assistant. The user asks a question, and the Assistant solves it. The "
    "assistant first thinks about the reasoning process in the mind and then provides the user with the answer. "
    "The reasoning process and answer are enclosed within <think> </think> and <answer> </answer> tags, "
    "respectively, i.e., <think> reasoning process here </think> <answer> answer here </answer>.";

namespace {

constexpr std::size_t kBoundaryWindow = 5;

const char* const kModeNames[] = {"zero", "ptst", "pipeline", "stats", "dynamics"};

std::string init_name(InitKind k) {
  switch (k) {
    case InitKind::kUniform: return "uniform";
    case InitKind::kColdStart: return "cold_start";
    case InitKind::kCheckpoint: return "checkpoint";
  }
  return "uniform";
}

std::optional<InitKind> parse_init(const std::string& s) {
  if (s == "uniform") return InitKind::kUniform;
  if (s == "cold_start") return InitKind::kColdStart;
  if (s == "checkpoint") return InitKind::kCheckpoint;
  return std::nullopt;
}

Json schedule_json(const Schedule& s) {
  Json out = Json::array();
  for (const auto& st : s.stages)
    out.push_back({{"max_len", st.max_len}, {"group_size", st.group_size}, {"steps", st.steps}});
  return out;
}

Json backend_json(const BackendSpec& b) {
  const auto& e = b.endpoint;
  return {{"kind", b.kind},
          {"name", b.name},
          {"base_url", e.base_url},
          {"path", e.path},
          {"model", e.model},
          {"auth_env", e.auth_env},
          {"temperature", e.temperature},
          {"timeout_seconds", e.timeout_seconds},
          {"max_retries", e.max_retries},
          {"vision", e.vision}};
}

std::string type_name(const Json& j) {
  if (j.is_number_unsigned()) return "non-negative integer";
  if (j.is_number_integer()) return "integer";
  if (j.is_number()) return "number";
  return j.type_name();
}

bool compatible(const Json& def, const Json& in) {
  if (def.is_number_unsigned()) return in.is_number_unsigned();
  if (def.is_number_integer()) return in.is_number_integer();
  if (def.is_number_float()) return in.is_number();
  return def.type() == in.type();
}

void merge(Json& base, const Json& in, const std::string& prefix, std::vector<ConfigIssue>& issues) {
  for (const auto& [key, value] : in.items()) {
    const std::string field = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) {
      issues.push_back({field, "unknown field"});
      continue;
    }
    Json& slot = base[key];
    if (!compatible(slot, value)) {
      issues.push_back({field, "expected " + type_name(slot) + ", got " + type_name(value)});
      continue;
    }
    if (slot.is_object())
      merge(slot, value, field, issues);
    else
      slot = value;
  }
}

Schedule decode_schedule(const Json& arr, const std::string& field, std::vector<ConfigIssue>& issues) {
  Schedule s;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = field + "[" + std::to_string(i) + "]";
    const Json& e = arr[i];
    if (!e.is_object()) {
      issues.push_back({where, "expected object {max_len, group_size, steps}"});
      continue;
    }
    StageConfig st;
    st.index = i + 1;
    bool ok = true;
    for (const auto& [k, v] : e.items())
      if (k != "max_len" && k != "group_size" && k != "steps") {
        issues.push_back({where + "." + k, "unknown field"});
        ok = false;
      }
    auto take = [&](const char* k, std::size_t& out) {
      if (!e.contains(k)) {
        issues.push_back({where + "." + k, "required"});
        ok = false;
      } else if (!e[k].is_number_unsigned()) {
        issues.push_back({where + "." + k, "expected non-negative integer"});
        ok = false;
      } else {
        out = e[k].get<std::size_t>();
      }
    };
    take("max_len", st.max_len);
    take("group_size", st.group_size);
    take("steps", st.steps);
    if (ok) s.stages.push_back(st);
  }
  return s;
}

BackendSpec decode_backend(const Json& j) {
  BackendSpec b;
  b.kind = j["kind"].get<std::string>();
  b.name = j["name"].get<std::string>();
  auto& e = b.endpoint;
  e.base_url = j["base_url"].get<std::string>();
  e.path = j["path"].get<std::string>();
  e.model = j["model"].get<std::string>();
  e.auth_env = j["auth_env"].get<std::string>();
  e.temperature = j["temperature"].get<double>();
  e.timeout_seconds = j["timeout_seconds"].get<int>();
  e.max_retries = j["max_retries"].get<int>();
  e.vision = j["vision"].get<bool>();
  return b;
}

RunConfig decode(const Json& j, RunMode mode, std::vector<ConfigIssue>& issues) {
  RunConfig c = default_config(mode);
  c.seed = j["seed"].get<std::uint64_t>();
  c.schedule = decode_schedule(j["schedule"], "schedule", issues);

  const Json& rw = j["reward"];
  const auto rmode = rw["mode"].get<std::string>();
  if (rmode == "zero")
    c.reward.mode = RewardMode::kZeroComposite;
  else if (rmode == "hfrrf")
    c.reward.mode = RewardMode::kHfrrf;
  else
    issues.push_back({"reward.mode", "expected \"zero\" or \"hfrrf\""});
  c.reward.format_weight = rw["format_weight"].get<double>();
  c.reward.result_weight = rw["result_weight"].get<double>();
  c.system_prompt = j["system_prompt"].get<std::string>();

  const Json& env = j["env"];
  try {
    c.env.kind = parse_env_kind(env["name"].get<std::string>());
  } catch (const std::invalid_argument& e) {
    issues.push_back({"env.name", e.what()});
  }
  c.env.num_keys = env["keys"].get<std::size_t>();
  c.env.digit_lo = env["digit_lo"].get<int>();
  c.env.digit_hi = env["digit_hi"].get<int>();
  c.env.seed = env["seed"].get<std::uint64_t>();
  c.num_questions = env["questions"].get<std::size_t>();
  c.num_fillers = env["fillers"].get<std::size_t>();
  const Json& p = env["profile"];
  c.env.profile.band_lo = p["band_lo"].get<std::size_t>();
  c.env.profile.band_hi = p["band_hi"].get<std::size_t>();
  c.env.profile.p_short = p["p_short"].get<double>();
  c.env.profile.p_long = p["p_long"].get<double>();
  c.env.profile.ramp_end = p["ramp_end"].get<std::size_t>();

  const Json& g = j["grpo"];
  c.grpo.clip_epsilon = g["clip_epsilon"].get<double>();
  c.grpo.kl_beta = g["kl_beta"].get<double>();
  c.grpo.inner_updates = g["inner_updates"].get<std::size_t>();
  c.grpo.learning_rate = g["learning_rate"].get<double>();
  c.grpo.ratio_log_clamp = g["ratio_log_clamp"].get<double>();
  c.batch_size = g["batch_size"].get<std::size_t>();

  const Json& in = j["init"];
  if (auto k = parse_init(in["kind"].get<std::string>()))
    c.init = *k;
  else
    issues.push_back({"init.kind", "expected \"uniform\", \"cold_start\" or \"checkpoint\""});
  c.cold_start.format_prob = in["format_prob"].get<double>();
  c.cold_start.mean_think = in["mean_think"].get<double>();
  c.init_checkpoint = in["checkpoint"].get<std::string>();

  c.eval_per_question = j["eval"]["per_question"].get<std::size_t>();
  c.eval_max_len = j["eval"]["max_len"].get<std::size_t>();

  c.dynamics_seeds = j["dynamics"]["seeds"].get<std::size_t>();
  c.long_arm = decode_schedule(j["dynamics"]["long_arm"], "dynamics.long_arm", issues);

  const Json& pl = j["pipeline"];
  c.max_in_flight = pl["max_in_flight"].get<std::size_t>();
  c.mllm = decode_backend(pl["mllm"]);
  c.reasoner = decode_backend(pl["reasoner"]);

  c.markers.clear();
  const Json& mk = j["stats"]["markers"];
  for (std::size_t i = 0; i < mk.size(); ++i) {
    if (mk[i].is_string())
      c.markers.push_back(mk[i].get<std::string>());
    else
      issues.push_back({"stats.markers[" + std::to_string(i) + "]", "expected string"});
  }

  c.dataset_in = j["inputs"]["dataset"].get<std::string>();
  c.fixtures = j["inputs"]["fixtures"].get<std::string>();
  c.rules = j["inputs"]["rules"].get<std::string>();
  c.metrics_out = j["outputs"]["metrics"].get<std::string>();
  c.checkpoint_out = j["outputs"]["checkpoint"].get<std::string>();
  c.dataset_out = j["outputs"]["dataset"].get<std::string>();
  c.summary_out = j["outputs"]["summary"].get<std::string>();
  return c;
}

template <typename F>
void check(std::vector<ConfigIssue>& issues, const std::string& field, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    issues.push_back({field, e.what()});
  }
}

void require_file(std::vector<ConfigIssue>& issues, const std::string& field, const std::string& path) {
  if (path.empty())
    issues.push_back({field, "required for this mode"});
  else if (!std::filesystem::is_regular_file(path))
    issues.push_back({field, "no such file: " + path});
}

void require_dir(std::vector<ConfigIssue>& issues, const std::string& field, const std::string& path) {
  if (path.empty())
    issues.push_back({field, "required for this mode"});
  else if (!std::filesystem::is_directory(path))
    issues.push_back({field, "no such directory: " + path});
}

bool is_training(RunMode m) { return m == RunMode::kZero || m == RunMode::kPtst || m == RunMode::kDynamics; }

void write_text(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::string csv_header(const RunConfig& cfg) {
  return "# config_digest=" + config_digest(cfg) + ",seed=" + std::to_string(cfg.seed) +
         ",tool_version=" + std::string(kToolVersion) + "\n";
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

TabularPolicy initial_policy(const RunConfig& cfg, const Vocabulary& vocab, std::size_t keys) {
  switch (cfg.init) {
    case InitKind::kUniform: return TabularPolicy(keys, vocab.size(), vocab.eos());
    case InitKind::kColdStart: return make_cold_start_policy(vocab, keys, cfg.cold_start);
    case InitKind::kCheckpoint: {
      auto p = load_checkpoint(cfg.init_checkpoint);
      if (p.num_keys() != keys || p.num_tokens() != vocab.size() || p.eos() != vocab.eos())
        throw std::runtime_error("checkpoint " + cfg.init_checkpoint + " does not match the env and vocabulary");
      return p;
    }
  }
  throw std::logic_error("unhandled init kind");
}

std::shared_ptr<const cot::GenBackend> make_backend(const BackendSpec& b, const std::string& fixtures) {
  if (b.kind == "replay") return std::make_shared<cot::ReplayBackend>(fixtures, b.name);
  auto remote = std::make_shared<cot::RemoteBackend>(b.endpoint);
  if (fixtures.empty()) return remote;
  return std::make_shared<cot::RecordingBackend>(remote, fixtures);
}

std::vector<std::string> read_think_texts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::string> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    const auto j = Json::parse(line);
    if (j.contains("think_text"))
      out.push_back(j["think_text"].get<std::string>());
    else if (j.contains("text"))
      out.push_back(j["text"].get<std::string>());
    else
      throw std::runtime_error(path + ":" + std::to_string(n) + ": record has neither think_text nor text");
  }
  return out;
}

}  // namespace

std::string to_string(RunMode mode) { return kModeNames[static_cast<int>(mode)]; }

std::optional<RunMode> parse_run_mode(const std::string& name) {
  for (int i = 0; i < 5; ++i)
    if (name == kModeNames[i]) return static_cast<RunMode>(i);
  return std::nullopt;
}

RunConfig default_config(RunMode mode) {
  RunConfig c;
  c.mode = mode;
  c.grpo.learning_rate = 0.5;
  c.long_arm = Schedule{{{1, 256, 4, 200}}};
  c.mllm.name = "replay-mllm";
  c.reasoner.name = "replay-reasoner";
  c.markers = cot::kDefaultMarkers;
  if (mode == RunMode::kZero) {
    c.schedule = Schedule{{{1, 64, 16, 300}}};
    c.reward = {RewardMode::kZeroComposite, 0.5, 0.5};
    c.system_prompt = kSystemPrompt;
    c.env.kind = EnvKind::kArith;
    c.num_questions = 256;
    c.init = InitKind::kUniform;
    c.eval_per_question = 16;
    c.eval_max_len = 64;
  } else {
    c.schedule = default_schedule(64);
    c.reward = {RewardMode::kHfrrf, 0.5, 0.5};
    c.env.kind = EnvKind::kOracle;
    c.num_questions = c.env.num_keys;
  }
  return c;
}

namespace {

Json canonical(const RunConfig& c) {
  const auto& p = c.env.profile;
  Json j;
  j["mode"] = to_string(c.mode);
  j["seed"] = c.seed;
  j["schedule"] = schedule_json(c.schedule);
  j["reward"] = {{"mode", c.reward.mode == RewardMode::kHfrrf ? "hfrrf" : "zero"},
                 {"format_weight", c.reward.format_weight},
                 {"result_weight", c.reward.result_weight}};
  j["system_prompt"] = c.system_prompt;
  j["env"] = {{"name", to_string(c.env.kind)},
              {"keys", c.env.num_keys},
              {"digit_lo", c.env.digit_lo},
              {"digit_hi", c.env.digit_hi},
              {"seed", c.env.seed},
              {"questions", c.num_questions},
              {"fillers", c.num_fillers},
              {"profile",
               {{"band_lo", p.band_lo},
                {"band_hi", p.band_hi},
                {"p_short", p.p_short},
                {"p_long", p.p_long},
                {"ramp_end", p.ramp_end}}}};
  j["grpo"] = {{"clip_epsilon", c.grpo.clip_epsilon},
               {"kl_beta", c.grpo.kl_beta},
               {"inner_updates", c.grpo.inner_updates},
               {"learning_rate", c.grpo.learning_rate},
               {"ratio_log_clamp", c.grpo.ratio_log_clamp},
               {"batch_size", c.batch_size}};
  j["init"] = {{"kind", init_name(c.init)},
               {"format_prob", c.cold_start.format_prob},
               {"mean_think", c.cold_start.mean_think},
               {"checkpoint", c.init_checkpoint}};
  j["eval"] = {{"per_question", c.eval_per_question}, {"max_len", c.eval_max_len}};
  j["dynamics"] = {{"seeds", c.dynamics_seeds}, {"long_arm", schedule_json(c.long_arm)}};
  j["pipeline"] = {
      {"max_in_flight", c.max_in_flight}, {"mllm", backend_json(c.mllm)}, {"reasoner", backend_json(c.reasoner)}};
  j["stats"] = {{"markers", c.markers}};
  j["inputs"] = {{"dataset", c.dataset_in}, {"fixtures", c.fixtures}, {"rules", c.rules}};
  return j;
}

}  // namespace

Json to_json(const RunConfig& c) {
  Json j = canonical(c);
  j["outputs"] = {{"metrics", c.metrics_out},
                  {"checkpoint", c.checkpoint_out},
                  {"dataset", c.dataset_out},
                  {"summary", c.summary_out}};
  return j;
}

// Concurrency does not change results, so it stays out of the digest.
Json provenance_config(const RunConfig& c) {
  Json j = canonical(c);
  j["pipeline"].erase("max_in_flight");
  return j;
}


std::string config_digest(const RunConfig& cfg) { return sha256_hex(provenance_config(cfg).dump()); }

Json provenance(const RunConfig& cfg) {
  return {{"config_digest", config_digest(cfg)},
          {"seed", cfg.seed},
          {"tool_version", kToolVersion},
          {"config", provenance_config(cfg)}};
}

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::runtime_error("invalid configuration"), issues_(std::move(issues)) {}

ConfigError::ConfigError(std::string field, std::string message)
    : ConfigError(std::vector<ConfigIssue>{{std::move(field), std::move(message)}}) {}

Json ConfigError::to_json() const {
  Json errors = Json::array();
  for (const auto& i : issues_) errors.push_back({{"field", i.field}, {"message", i.message}});
  return {{"errors", errors}};
}

RunConfig parse_config(const Json& doc, std::optional<RunMode> mode_override) {
  std::vector<ConfigIssue> issues;
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");

  std::optional<RunMode> mode = mode_override;
  if (!mode) {
    if (!doc.contains("mode"))
      issues.push_back({"mode", "required"});
    else if (!doc["mode"].is_string() || !(mode = parse_run_mode(doc["mode"].get<std::string>())))
      issues.push_back({"mode", "expected one of zero, ptst, pipeline, stats, dynamics"});
  }
  const RunMode m = mode.value_or(RunMode::kPtst);

  Json merged = to_json(default_config(m));
  Json overlay = doc;
  overlay.erase("mode");
  merge(merged, overlay, "", issues);
  merged["mode"] = to_string(m);

  RunConfig cfg = decode(merged, m, issues);
  for (auto& i : validate(cfg)) issues.push_back(std::move(i));
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

std::vector<ConfigIssue> validate(const RunConfig& c) {
  std::vector<ConfigIssue> issues;
  if (is_training(c.mode)) {
    check(issues, "schedule", [&] { validate(c.schedule); });
    check(issues, "reward", [&] { validate(c.reward); });
    check(issues, "env", [&] { validate(c.env); });
    check(issues, "grpo", [&] { validate(c.grpo); });
    if (c.num_questions == 0) issues.push_back({"env.questions", "must be positive"});
    if (c.num_fillers < 1 || c.num_fillers > 8) issues.push_back({"env.fillers", "must be in [1, 8]"});
    if (c.batch_size == 0) issues.push_back({"grpo.batch_size", "must be positive"});
    if (c.init == InitKind::kColdStart) {
      if (!(c.cold_start.format_prob > 0.0 && c.cold_start.format_prob < 1.0))
        issues.push_back({"init.format_prob", "must be in (0,1)"});
      if (!(c.cold_start.mean_think >= 0.0)) issues.push_back({"init.mean_think", "must be >= 0"});
    }
    if (c.init == InitKind::kCheckpoint) require_file(issues, "init.checkpoint", c.init_checkpoint);
    if (c.eval_per_question == 0) issues.push_back({"eval.per_question", "must be positive"});
    if (c.eval_max_len < 8) issues.push_back({"eval.max_len", "must be >= 8"});
  }
  if (c.mode == RunMode::kDynamics) {
    if (c.dynamics_seeds == 0) issues.push_back({"dynamics.seeds", "must be positive"});
    check(issues, "dynamics.long_arm", [&] { validate(c.long_arm); });
    if (c.schedule.stages.size() < 2 || c.schedule.stages[0].steps < kBoundaryWindow ||
        c.schedule.stages[1].steps < kBoundaryWindow)
      issues.push_back({"schedule", "dynamics needs two stages of at least 5 steps each"});
    else if (!c.long_arm.stages.empty() && token_budget(c.schedule) != token_budget(c.long_arm))
      issues.push_back({"dynamics.long_arm", "token budget " + std::to_string(token_budget(c.long_arm)) +
                                                 " differs from the schedule's " +
                                                 std::to_string(token_budget(c.schedule))});
  }
  if (c.mode == RunMode::kPipeline) {
    require_file(issues, "inputs.dataset", c.dataset_in);
    if (c.dataset_out.empty()) issues.push_back({"outputs.dataset", "required for this mode"});
    if (c.max_in_flight == 0) issues.push_back({"pipeline.max_in_flight", "must be positive"});
    bool needs_fixtures = false;
    for (const auto& [field, b] : {std::pair{"pipeline.mllm", &c.mllm}, std::pair{"pipeline.reasoner", &c.reasoner}}) {
      if (b->kind == "replay") {
        needs_fixtures = true;
      } else if (b->kind == "remote") {
        if (b->endpoint.base_url.empty()) issues.push_back({std::string(field) + ".base_url", "required"});
        if (b->endpoint.model.empty()) issues.push_back({std::string(field) + ".model", "required"});
      } else {
        issues.push_back({std::string(field) + ".kind", "expected \"replay\" or \"remote\""});
      }
    }
    if (needs_fixtures) require_dir(issues, "inputs.fixtures", c.fixtures);
    if (!c.rules.empty()) require_file(issues, "inputs.rules", c.rules);
  }
  if (c.mode == RunMode::kStats) {
    require_file(issues, "inputs.dataset", c.dataset_in);
    if (c.markers.empty()) issues.push_back({"stats.markers", "must not be empty"});
  }
  return issues;
}

Json load_config_document(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), "cannot read config file");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  Json doc = Json::parse(text, nullptr, false);
  if (doc.is_discarded()) {
    const std::string first = text.substr(0, text.find('\n'));
    doc = Json::parse(first, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(path.string(), "not valid JSON");
  }
  if (doc.is_object() && doc.contains("_meta") && doc["_meta"].contains("config")) return doc["_meta"]["config"];
  if (doc.is_object() && doc.contains("meta") && doc.contains("kept") && doc["meta"].contains("config"))
    return doc["meta"]["config"];
  return doc;
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(assignment, "override must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  std::optional<RunMode> mode;
  if (doc.contains("mode") && doc["mode"].is_string()) mode = parse_run_mode(doc["mode"].get<std::string>());
  const Json defaults = to_json(default_config(mode.value_or(RunMode::kPtst)));

  std::vector<std::string> parts;
  for (std::size_t start = 0;;) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  const Json* probe = &defaults;
  for (const auto& part : parts) {
    if (!probe->is_object() || !probe->contains(part)) throw ConfigError(key, "unknown field");
    probe = &(*probe)[part];
  }

  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  Json* slot = &doc;
  for (const auto& part : parts) {
    if (!slot->is_object() && !slot->is_null()) throw ConfigError(key, "parent is not an object");
    slot = &(*slot)[part];
  }
  *slot = std::move(value);
}

std::size_t token_budget(const Schedule& schedule) {
  std::size_t total = 0;
  for (const auto& s : schedule.stages) total += s.steps * s.group_size * s.max_len;
  return total;
}

TrainResult run_training(const RunConfig& cfg, const Schedule& schedule, std::size_t replica,
                         const MetricsSink& sink) {
  const std::uint64_t seed = cfg.seed + replica;
  EnvSpec env = cfg.env;
  env.seed += replica;
  const Vocabulary vocab(cfg.num_fillers);
  const Scorer scorer{vocab, env, cfg.reward, seed};

  auto pool = gen_questions(env, seed, cfg.num_questions);
  if (!cfg.system_prompt.empty())
    for (auto& q : pool) q.prompt_text = cfg.system_prompt + "\n" + q.prompt_text;
  const QuestionSource source(pool, cfg.batch_size, seed);

  TabularPolicy init = initial_policy(cfg, vocab, env.key_cardinality());
  const EvalResult before = evaluate(init, scorer, pool, cfg.eval_per_question, cfg.eval_max_len, seed);
  Trainer trainer(std::move(init), scorer, cfg.grpo, seed);
  auto log = run_ptst(trainer, schedule, source, sink);
  const EvalResult after = evaluate(trainer.policy(), scorer, pool, cfg.eval_per_question, cfg.eval_max_len, seed);
  return {std::move(log), trainer.policy(), before, after};
}

std::vector<DynamicsRow> run_dynamics(const RunConfig& cfg) {
  std::vector<DynamicsRow> rows;
  const std::size_t boundary = cfg.schedule.stages.at(0).steps;
  for (std::size_t i = 0; i < cfg.dynamics_seeds; ++i) {
    const auto ptst = run_training(cfg, cfg.schedule, i);
    const auto fixed = run_training(cfg, cfg.long_arm, i);
    DynamicsRow r;
    r.seed = cfg.seed + i;
    r.ptst_accuracy = ptst.final.accuracy;
    r.long_accuracy = fixed.final.accuracy;
    for (std::size_t k = 0; k < kBoundaryWindow; ++k) {
      r.ptst_len_before += ptst.log[boundary - kBoundaryWindow + k].mean_len / kBoundaryWindow;
      r.ptst_len_after += ptst.log[boundary + k].mean_len / kBoundaryWindow;
    }
    r.ptst_think_len = ptst.final.mean_think_len;
    r.long_think_len = fixed.final.mean_think_len;
    rows.push_back(r);
  }
  return rows;
}

RunOutcome run(const RunConfig& cfg) {
  if (auto issues = validate(cfg); !issues.empty()) throw ConfigError(std::move(issues));
  RunOutcome out;
  switch (cfg.mode) {
    case RunMode::kZero:
    case RunMode::kPtst: {
      std::ostringstream metrics;
      metrics << Json{{"_meta", provenance(cfg)}}.dump() << '\n';
      auto result = run_training(cfg, cfg.schedule, 0, [&](const StepMetrics& m) {
        metrics << to_json_line(m) << '\n';
      });
      out.metrics_jsonl = metrics.str();
      out.metrics = result.log;
      out.summary_csv = csv_header(cfg) +
                        "seed,initial_format_rate,final_format_rate,initial_accuracy,final_accuracy,"
                        "final_mean_len,final_mean_think_len\n" +
                        std::to_string(cfg.seed) + "," + fmt(result.initial.format_rate) + "," +
                        fmt(result.final.format_rate) + "," + fmt(result.initial.accuracy) + "," +
                        fmt(result.final.accuracy) + "," + fmt(result.final.mean_len) + "," +
                        fmt(result.final.mean_think_len) + "\n";
      if (!cfg.metrics_out.empty()) write_text(cfg.metrics_out, out.metrics_jsonl);
      if (!cfg.checkpoint_out.empty())
        save_checkpoint(cfg.checkpoint_out, result.policy,
                        {cfg.seed, config_digest(cfg), std::string(kToolVersion)});
      out.training = std::move(result);
      break;
    }
    case RunMode::kDynamics: {
      out.dynamics = run_dynamics(cfg);
      std::string csv = csv_header(cfg) +
                        "seed,ptst_accuracy,long_accuracy,ptst_len_before,ptst_len_after,ptst_think_len,"
                        "long_think_len\n";
      DynamicsRow mean;
      const double n = static_cast<double>(out.dynamics.size());
      for (const auto& r : out.dynamics) {
        csv += std::to_string(r.seed) + "," + fmt(r.ptst_accuracy) + "," + fmt(r.long_accuracy) + "," +
               fmt(r.ptst_len_before) + "," + fmt(r.ptst_len_after) + "," + fmt(r.ptst_think_len) + "," +
               fmt(r.long_think_len) + "\n";
        mean.ptst_accuracy += r.ptst_accuracy / n;
        mean.long_accuracy += r.long_accuracy / n;
        mean.ptst_len_before += r.ptst_len_before / n;
        mean.ptst_len_after += r.ptst_len_after / n;
        mean.ptst_think_len += r.ptst_think_len / n;
        mean.long_think_len += r.long_think_len / n;
      }
      csv += "mean," + fmt(mean.ptst_accuracy) + "," + fmt(mean.long_accuracy) + "," + fmt(mean.ptst_len_before) +
             "," + fmt(mean.ptst_len_after) + "," + fmt(mean.ptst_think_len) + "," + fmt(mean.long_think_len) + "\n";
      out.summary_csv = std::move(csv);
      break;
    }
    case RunMode::kPipeline: {
      const auto samples = cot::read_corpus(cfg.dataset_in);
      const auto rules = cfg.rules.empty() ? cot::default_rules() : cot::load_rules(cfg.rules);
      const auto mllm = make_backend(cfg.mllm, cfg.fixtures);
      const auto reasoner = make_backend(cfg.reasoner, cfg.fixtures);
      const auto records = cot::run_pipeline(samples, *mllm, *reasoner, rules, cfg.max_in_flight);
      out.manifest = cot::assemble_dataset(records, cfg.dataset_out, provenance(cfg));
      std::string csv = csv_header(cfg) + "kept,dropped";
      for (auto r : cot::kAllDropReasons) csv += "," + cot::to_string(r);
      csv += "\n" + std::to_string(out.manifest->kept) + "," + std::to_string(out.manifest->dropped);
      for (auto r : cot::kAllDropReasons) csv += "," + std::to_string(out.manifest->dropped_by_reason[cot::to_string(r)]);
      out.summary_csv = csv + "\n";
      break;
    }
    case RunMode::kStats: {
      const auto corpus = read_think_texts(cfg.dataset_in);
      out.markers = cot::marker_stats(corpus, cfg.markers);
      std::string csv = csv_header(cfg) + "marker,count\n";
      for (const auto& [m, n] : out.markers) csv += m + "," + std::to_string(n) + "\n";
      out.summary_csv = std::move(csv);
      break;
    }
  }
  if (!cfg.summary_out.empty()) write_text(cfg.summary_out, out.summary_csv);
  return out;
}

}  // namespace thinkstage
