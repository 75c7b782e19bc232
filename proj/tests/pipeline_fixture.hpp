#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "thinkstage/cot/pipeline.hpp"

namespace testsupport {

inline thinkstage::cot::VqaSample vqa(const std::string& id, const std::string& q, const std::string& gt) {
  return {"img/" + id + ".png", q, gt, "fixture"};
}

// Writes the three fixtures one sample needs; an empty `reasoning` leaves the
// last one out.
inline void record_sample(const std::filesystem::path& dir, const thinkstage::cot::VqaSample& s,
                          const std::string& reasoning, const std::string& pseudo = "The figure shows a triangle.",
                          const std::string& desc = "A triangle.") {
  using namespace thinkstage::cot;
  write_fixture(dir, {GenRole::kPseudoCot, render_pseudo_cot_prompt(s), s.image_ref}, pseudo, "2024-01-01T00:00:00Z");
  write_fixture(dir, {GenRole::kDescription, render_description_prompt(s, pseudo), s.image_ref}, desc,
                "2024-01-01T00:00:01Z");
  if (!reasoning.empty())
    write_fixture(dir, {GenRole::kReasoning, render_reasoning_prompt(desc, s.question), ""}, reasoning,
                  "2024-01-01T00:00:02Z");
}

// Five candidates: three well-formed answer-matching reasonings, one wrong
// answer, one untagged output.
inline std::vector<thinkstage::cot::VqaSample> five_candidates(const std::filesystem::path& fixtures) {
  std::vector<thinkstage::cot::VqaSample> s{vqa("a", "What is 2+3?", "5"), vqa("b", "Angle sum of a triangle?", "180"),
                                            vqa("c", "Colour of the sky?", "blue"), vqa("d", "How many sides?", "4"),
                                            vqa("e", "What is 6*7?", "42")};
  record_sample(fixtures, s[0], "<think>Adding 2 and 3 gives 5.</think><answer>5</answer>");
  record_sample(fixtures, s[1], "<think>Wait, the description says two angles are 60.</think>\n<answer>180</answer>");
  record_sample(fixtures, s[2], "<think>Looking up.</think><answer>Blue</answer>");
  record_sample(fixtures, s[3], "<think>Count them.</think><answer>3</answer>");
  record_sample(fixtures, s[4], "The answer is 42");
  return s;
}

inline void write_corpus(const std::filesystem::path& path, const std::vector<thinkstage::cot::VqaSample>& samples) {
  std::string text;
  for (const auto& s : samples)
    text += nlohmann::ordered_json{{"image_ref", s.image_ref},
                                   {"question", s.question},
                                   {"ground_truth", s.ground_truth},
                                   {"source_tag", s.source_tag}}
                .dump() +
            "\n";
  std::filesystem::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

}  // namespace testsupport
