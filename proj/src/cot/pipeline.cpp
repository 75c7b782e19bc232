#include "thinkstage/cot/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>
#include <variant>

#include "thinkstage/reward.hpp"

namespace thinkstage::cot {

const std::string kPseudoCotTemplate =
    "Given a image, a question:{question} and its answer:{answer}, describe the image content relevant to the "
    "question and then reason step by step to reach the answer.";

const std::string kDescriptionTemplate =
    "Given a image, a question:{question} and a thinking process:{thinking process}, provide a detailed "
    "description containing all the necessary details of the image to answer the question correctly.";

const std::string kReasoningTemplate = "{description}\n\n{question}";

namespace {

std::string fill(std::string tmpl, const std::string& slot, const std::string& value) {
  const std::string key = "{" + slot + "}";
  std::size_t pos = 0;
  while ((pos = tmpl.find(key, pos)) != std::string::npos) {
    tmpl.replace(pos, key.size(), value);
    pos += value.size();
  }
  return tmpl;
}

}  // namespace

std::string render_pseudo_cot_prompt(const VqaSample& s) {
  return fill(fill(kPseudoCotTemplate, "question", s.question), "answer", s.ground_truth);
}

std::string render_description_prompt(const VqaSample& s, const std::string& pseudo_cot) {
  return fill(fill(kDescriptionTemplate, "question", s.question), "thinking process", pseudo_cot);
}

std::string render_reasoning_prompt(const std::string& description, const std::string& question) {
  return fill(fill(kReasoningTemplate, "description", description), "question", question);
}

std::string to_string(DropReason r) {
  switch (r) {
    case DropReason::kBackendError: return "backend_error";
    case DropReason::kFormatViolation: return "format_violation";
    case DropReason::kAnswerMismatch: return "answer_mismatch";
    case DropReason::kTooLong: return "too_long";
    case DropReason::kInconsistency: return "inconsistency";
    case DropReason::kBannedPhrase: return "banned_phrase";
  }
  return "unknown";
}

std::vector<VqaSample> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read corpus " + path.string());
  std::vector<VqaSample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    VqaSample s{j.value("image_ref", ""), j.value("question", ""), j.value("ground_truth", ""),
                j.value("source_tag", "")};
    if (s.question.empty() || s.ground_truth.empty())
      throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": question and ground_truth are required");
    out.push_back(std::move(s));
  }
  return out;
}

nlohmann::ordered_json to_json(const CotRecord& r) {
  nlohmann::ordered_json meta;
  meta["pseudo_cot"] = r.meta.pseudo_cot;
  meta["description"] = r.meta.description;
  meta["backend_ids"] = {{"mllm", r.meta.mllm_backend}, {"reasoner", r.meta.reasoner_backend}};
  meta["timestamps"] = {{"pseudo_cot", r.meta.pseudo_cot_at},
                        {"description", r.meta.description_at},
                        {"reasoning", r.meta.reasoning_at}};
  meta["source_tag"] = r.source_tag;

  nlohmann::ordered_json j;
  j["image_ref"] = r.image_ref;
  j["question"] = r.question;
  j["think_text"] = r.think_text;
  j["answer_text"] = r.answer_text;
  j["ground_truth"] = r.ground_truth;
  j["pipeline_meta"] = meta;
  j["kept"] = r.kept;
  j["drop_reason"] = r.drop_reason ? nlohmann::ordered_json(to_string(*r.drop_reason)) : nlohmann::ordered_json();
  return j;
}

std::string gen_pseudo_cot(const GenBackend& backend, const VqaSample& s) {
  return backend.generate({GenRole::kPseudoCot, render_pseudo_cot_prompt(s), s.image_ref}).text;
}

std::string gen_description(const GenBackend& backend, const VqaSample& s, const std::string& pseudo_cot) {
  return backend.generate({GenRole::kDescription, render_description_prompt(s, pseudo_cot), s.image_ref}).text;
}

std::string gen_reasoning(const GenBackend& backend, const std::string& description, const std::string& question) {
  if (trim(description).empty()) throw BackendError("empty description");
  return backend.generate({GenRole::kReasoning, render_reasoning_prompt(description, question), ""}).text;
}

namespace {

std::size_t word_count(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    const bool sp = is_space(c);
    if (!sp && !in_word) ++n;
    in_word = !sp;
  }
  return n;
}

bool contains_ci(std::string_view hay, std::string_view needle) {
  return to_lower_ascii(hay).find(to_lower_ascii(needle)) != std::string::npos;
}

// The claim agrees when it matches as a whole or by its first word.
bool claim_agrees(const std::string& claim, std::string_view answer, const AnswerMatchRule& rule) {
  if (match_answer(claim, answer, rule).matched) return true;
  std::string_view first = claim;
  first = first.substr(0, static_cast<std::size_t>(std::find_if(first.begin(), first.end(), is_space) - first.begin()));
  while (!first.empty() && std::string_view(".,;:!?").find(first.back()) != std::string_view::npos)
    first.remove_suffix(1);
  return !first.empty() && match_answer(first, answer, rule).matched;
}

CotRecord base_record(const VqaSample& s) {
  CotRecord r;
  r.image_ref = s.image_ref;
  r.question = s.question;
  r.ground_truth = s.ground_truth;
  r.source_tag = s.source_tag;
  return r;
}

void drop(CotRecord& r, DropReason reason, std::string detail = {}) {
  r.kept = false;
  r.drop_reason = reason;
  r.drop_detail = std::move(detail);
}

}  // namespace

CotRecord filter_record(const std::string& reasoning, const VqaSample& s, const RuleTable& rules) {
  CotRecord r = base_record(s);
  const auto parsed = parse_tagged(reasoning);
  if (const auto* v = std::get_if<FormatViolation>(&parsed)) {
    drop(r, DropReason::kFormatViolation, std::string(describe(v->rule)));
    return r;
  }
  const auto& t = std::get<TaggedOutput>(parsed);
  r.think_text = std::string(trim(t.think_text));
  r.answer_text = std::string(trim(t.answer_text));

  const auto& f = rules.filters;
  if (!match_answer(r.answer_text, s.ground_truth, f.match).matched) {
    drop(r, DropReason::kAnswerMismatch);
    return r;
  }
  if (f.max_think_words && word_count(r.think_text) > *f.max_think_words) {
    drop(r, DropReason::kTooLong);
    return r;
  }
  if (const auto claim = trailing_claim(r.think_text, f.claim_phrases);
      claim && !claim_agrees(*claim, r.answer_text, f.match)) {
    drop(r, DropReason::kInconsistency, *claim);
    return r;
  }
  for (const auto& phrase : f.banned_phrases) {
    if (contains_ci(r.think_text, phrase) || contains_ci(r.answer_text, phrase)) {
      drop(r, DropReason::kBannedPhrase, phrase);
      return r;
    }
  }
  r.kept = true;
  r.think_text = apply_rewrites(r.think_text, rules.rewrites);
  return r;
}

CotRecord process_sample(const VqaSample& s, const GenBackend& mllm, const GenBackend& reasoner,
                         const RuleTable& rules) {
  PipelineMeta meta;
  meta.mllm_backend = mllm.id();
  meta.reasoner_backend = reasoner.id();
  try {
    const auto pseudo = mllm.generate({GenRole::kPseudoCot, render_pseudo_cot_prompt(s), s.image_ref});
    meta.pseudo_cot = pseudo.text;
    meta.pseudo_cot_at = pseudo.timestamp;
    const auto desc = mllm.generate({GenRole::kDescription, render_description_prompt(s, pseudo.text), s.image_ref});
    meta.description = desc.text;
    meta.description_at = desc.timestamp;
    if (trim(desc.text).empty()) throw BackendError("empty description");
    const auto reasoning =
        reasoner.generate({GenRole::kReasoning, render_reasoning_prompt(desc.text, s.question), ""});
    meta.reasoning_at = reasoning.timestamp;
    CotRecord r = filter_record(reasoning.text, s, rules);
    r.meta = std::move(meta);
    return r;
  } catch (const BackendError& e) {
    CotRecord r = base_record(s);
    r.meta = std::move(meta);
    drop(r, DropReason::kBackendError, e.what());
    return r;
  }
}

std::vector<CotRecord> run_pipeline(std::span<const VqaSample> samples, const GenBackend& mllm,
                                    const GenBackend& reasoner, const RuleTable& rules, std::size_t max_in_flight) {
  std::vector<CotRecord> out(samples.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) out[i] = process_sample(samples[i], mllm, reasoner, rules);
  };
  const std::size_t n = std::min(std::max<std::size_t>(max_in_flight, 1), samples.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
  }
  return out;
}

std::filesystem::path manifest_path(const std::filesystem::path& dataset_path) {
  auto p = dataset_path;
  p += ".manifest.json";
  return p;
}

Manifest assemble_dataset(std::span<const CotRecord> records, const std::filesystem::path& out_path,
                          const nlohmann::ordered_json& provenance) {
  Manifest m;
  for (auto reason : kAllDropReasons) m.dropped_by_reason[to_string(reason)] = 0;

  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset " + out_path.string());
  for (const auto& r : records) {
    if (r.kept) {
      ++m.kept;
      out << to_json(r).dump() << '\n';
    } else {
      ++m.dropped;
      ++m.dropped_by_reason[to_string(r.drop_reason.value_or(DropReason::kBackendError))];
    }
  }
  out.close();
  if (!out) throw std::runtime_error("failed writing dataset " + out_path.string());

  nlohmann::ordered_json j;
  j["kept"] = m.kept;
  j["dropped"] = m.dropped;
  nlohmann::ordered_json reasons;
  for (auto reason : kAllDropReasons) reasons[to_string(reason)] = m.dropped_by_reason[to_string(reason)];
  j["dropped_by_reason"] = reasons;
  j["meta"] = provenance;
  const auto mpath = manifest_path(out_path);
  std::ofstream mo(mpath, std::ios::binary | std::ios::trunc);
  if (!mo) throw std::runtime_error("cannot write manifest " + mpath.string());
  mo << j.dump(2) << '\n';
  return m;
}

}  // namespace thinkstage::cot
