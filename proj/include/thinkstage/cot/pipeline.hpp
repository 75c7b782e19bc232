#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "thinkstage/cot/backend.hpp"
#include "thinkstage/cot/rules.hpp"

namespace thinkstage::cot {

struct VqaSample {
  std::string image_ref;
  std::string question;
  std::string ground_truth;
  std::string source_tag;
};

/// Reads one VqaSample per line ({image_ref, question, ground_truth,
/// source_tag}); blank lines are skipped. Throws on empty question or
/// ground truth.
std::vector<VqaSample> read_corpus(const std::filesystem::path& path);

enum class DropReason { kBackendError, kFormatViolation, kAnswerMismatch, kTooLong, kInconsistency, kBannedPhrase };

inline constexpr DropReason kAllDropReasons[] = {DropReason::kBackendError,   DropReason::kFormatViolation,
                                                 DropReason::kAnswerMismatch, DropReason::kTooLong,
                                                 DropReason::kInconsistency,  DropReason::kBannedPhrase};

std::string to_string(DropReason r);

struct PipelineMeta {
  std::string pseudo_cot;
  std::string description;
  std::string mllm_backend;
  std::string reasoner_backend;
  std::string pseudo_cot_at;
  std::string description_at;
  std::string reasoning_at;
};

struct CotRecord {
  std::string image_ref;
  std::string question;
  std::string think_text;
  std::string answer_text;
  std::string ground_truth;
  std::string source_tag;
  PipelineMeta meta;
  bool kept = false;
  std::optional<DropReason> drop_reason;
  std::string drop_detail;
};

/// Fixed field order: image_ref, question, think_text, answer_text,
/// ground_truth, pipeline_meta, kept, drop_reason.
nlohmann::ordered_json to_json(const CotRecord& r);

// Prompt templates. {question}, {answer}, {thinking process} and
// {description} are the slots.
extern const std::string kPseudoCotTemplate;
extern const std::string kDescriptionTemplate;
extern const std::string kReasoningTemplate;

std::string render_pseudo_cot_prompt(const VqaSample& s);
std::string render_description_prompt(const VqaSample& s, const std::string& pseudo_cot);
std::string render_reasoning_prompt(const std::string& description, const std::string& question);

std::string gen_pseudo_cot(const GenBackend& backend, const VqaSample& s);
std::string gen_description(const GenBackend& backend, const VqaSample& s, const std::string& pseudo_cot);
std::string gen_reasoning(const GenBackend& backend, const std::string& description, const std::string& question);

/// Parses the reasoning and applies the filters in order: tag format, answer
/// match, think length, trailing-claim consistency, banned phrases. Kept
/// records get the rewrite rules applied to their think text.
CotRecord filter_record(const std::string& reasoning, const VqaSample& s, const RuleTable& rules);

/// Runs the three generation calls and the filters for one sample. Backend failures become a
/// dropped record with reason backend_error.
CotRecord process_sample(const VqaSample& s, const GenBackend& mllm, const GenBackend& reasoner,
                         const RuleTable& rules);

/// Processes all samples with at most `max_in_flight` concurrent workers;
/// output order equals input order.
std::vector<CotRecord> run_pipeline(std::span<const VqaSample> samples, const GenBackend& mllm,
                                    const GenBackend& reasoner, const RuleTable& rules, std::size_t max_in_flight = 4);

struct Manifest {
  std::size_t kept = 0;
  std::size_t dropped = 0;
  std::map<std::string, std::size_t> dropped_by_reason;
};

std::filesystem::path manifest_path(const std::filesystem::path& dataset_path);

/// Writes kept records as JSON lines to `out_path` and the manifest (with
/// `provenance` embedded under "meta") to manifest_path(out_path).
Manifest assemble_dataset(std::span<const CotRecord> records, const std::filesystem::path& out_path,
                          const nlohmann::ordered_json& provenance = nlohmann::ordered_json::object());

}  // namespace thinkstage::cot
