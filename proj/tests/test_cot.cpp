#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "pipeline_fixture.hpp"
#include "support.hpp"
#include "thinkstage/cot/markers.hpp"
#include "thinkstage/cot/pipeline.hpp"
#include "thinkstage/cot/rules.hpp"
#include "thinkstage/digest.hpp"

using namespace thinkstage;
using namespace thinkstage::cot;
using testsupport::TempDir;

namespace {

using testsupport::five_candidates;

VqaSample sample(const std::string& id, const std::string& q, const std::string& gt) {
  return testsupport::vqa(id, q, gt);
}

void record(const std::filesystem::path& dir, const VqaSample& s, const std::string& reasoning,
            const std::string& pseudo = "The figure shows a triangle.", const std::string& desc = "A triangle.") {
  testsupport::record_sample(dir, s, reasoning, pseudo, desc);
}

}  // namespace

TEST(Templates, DescriptionPromptCarriesTheTemplateText) {
  const auto s = sample("x", "Which shape is shaded?", "B");
  const auto p = render_description_prompt(s, "It is B because...");
  EXPECT_NE(p.find("provide a detailed description containing all the necessary details"), std::string::npos);
  EXPECT_NE(p.find("Which shape is shaded?"), std::string::npos);
  EXPECT_NE(p.find("It is B because..."), std::string::npos);
  EXPECT_EQ(p.find('{'), std::string::npos);
}

TEST(Templates, SlotsAreFilledVerbatim) {
  const auto s = sample("x", "Q {with} braces?", "7");
  const auto p = render_pseudo_cot_prompt(s);
  EXPECT_NE(p.find("Q {with} braces?"), std::string::npos);
  EXPECT_NE(p.find("answer:7"), std::string::npos);
  EXPECT_EQ(render_reasoning_prompt("D", "Q"), "D\n\nQ");
}

TEST(Rewrites, DefaultRuleExample) {
  const auto out = apply_rewrites("so the description says two angles are equal", default_rules().rewrites);
  EXPECT_EQ(out, "so the image shows two angles are equal");
}

TEST(Rewrites, EmptyRuleListIsIdentity) {
  EXPECT_EQ(apply_rewrites("anything at all", {}), "anything at all");
}

TEST(Rewrites, ReplacementIsNotRescanned) {
  const std::vector<RewriteRule> r{{"ab", "abab"}};
  EXPECT_EQ(apply_rewrites("xabx", r), "xababx");
  const std::vector<RewriteRule> r2{{"aa", "b"}};
  EXPECT_EQ(apply_rewrites("aaa", r2), "ba");
}

TEST(Rewrites, DefaultTableRulesCommute) {
  const auto base = default_rules().rewrites;
  const std::string text =
      "The description says x. the description states y, and the description mentions z; The description "
      "mentions w while The description states v and the description says u.";
  const auto expected = apply_rewrites(text, base);
  auto perm = base;
  std::sort(perm.begin(), perm.end(), [](const auto& a, const auto& b) { return a.pattern < b.pattern; });
  int checked = 0;
  do {
    EXPECT_EQ(apply_rewrites(text, perm), expected);
    ++checked;
  } while (std::next_permutation(perm.begin(), perm.end(),
                                 [](const auto& a, const auto& b) { return a.pattern < b.pattern; }) &&
           checked < 720);
  EXPECT_EQ(checked, 720);
}

TEST(RuleFile, ParsesAndRoundTrips) {
  const auto t = parse_rules(R"(# test
[rewrites]
the caption says => the image shows
[filters]
answer_match = casefold
max_think_words = off
trailing_claim = so the result is
banned_phrase = off
banned_phrase = I cannot
)");
  ASSERT_EQ(t.rewrites.size(), 1u);
  EXPECT_EQ(t.rewrites[0].pattern, "the caption says");
  EXPECT_EQ(t.rewrites[0].replacement, "the image shows");
  EXPECT_EQ(t.filters.match.normalization, Normalization::kCaseFoldTrimmed);
  EXPECT_FALSE(t.filters.max_think_words);
  EXPECT_EQ(t.filters.claim_phrases, (std::vector<std::string>{"so the result is"}));
  EXPECT_EQ(t.filters.banned_phrases, (std::vector<std::string>{"I cannot"}));

  const auto again = parse_rules(render_rules(t));
  EXPECT_EQ(render_rules(again), render_rules(t));
  EXPECT_EQ(render_rules(parse_rules(render_rules(default_rules()))), render_rules(default_rules()));
}

TEST(RuleFile, ErrorsNameTheLine) {
  try {
    parse_rules("[rewrites]\nno arrow here\n");
    FAIL();
  } catch (const RuleFileError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_rules("[filters]\nanswer_match = fuzzy\n"), RuleFileError);
  EXPECT_THROW(parse_rules("[filters]\nunknown = 1\n"), RuleFileError);
  EXPECT_THROW(parse_rules("stray line\n"), RuleFileError);
}

TEST(TrailingClaim, TakesTheLastClaim) {
  const std::vector<std::string> phrases{"the answer is"};
  EXPECT_EQ(trailing_claim("first the answer is 3. Then The Answer Is 5.", phrases), "5");
  EXPECT_EQ(trailing_claim("the answer is 7\nmore text", phrases), "7");
  EXPECT_FALSE(trailing_claim("no claim", phrases));
}

TEST(Filter, KeptRecord) {
  const auto s = sample("a", "2+3?", "5");
  const auto r = filter_record("<think>2 plus 3 is 5</think><answer>5</answer>", s, default_rules());
  EXPECT_TRUE(r.kept);
  EXPECT_FALSE(r.drop_reason);
  EXPECT_EQ(r.think_text, "2 plus 3 is 5");
  EXPECT_EQ(r.answer_text, "5");
}

TEST(Filter, DropReasons) {
  const auto s = sample("a", "2+3?", "5");
  const auto rules = default_rules();
  auto reason = [&](const std::string& text) { return filter_record(text, s, rules).drop_reason; };
  EXPECT_EQ(reason("<think>x</think><answer>6</answer>"), DropReason::kAnswerMismatch);
  EXPECT_EQ(reason("<answer>5</answer>"), DropReason::kFormatViolation);
  EXPECT_EQ(reason("<think>so the answer is 6.</think><answer>5</answer>"), DropReason::kInconsistency);
  EXPECT_EQ(reason("<think>As an AI I think</think><answer>5</answer>"), DropReason::kBannedPhrase);
  EXPECT_EQ(reason("<think>the answer is 5.</think><answer>5</answer>"), std::nullopt);
  EXPECT_EQ(reason("<think>The final answer is 5 (five)</think><answer>5</answer>"), std::nullopt);

  RuleTable tight = rules;
  tight.filters.max_think_words = 3;
  EXPECT_EQ(filter_record("<think>one two three four</think><answer>5</answer>", s, tight).drop_reason,
            DropReason::kTooLong);
  EXPECT_TRUE(filter_record("<think>one two three</think><answer>5</answer>", s, tight).kept);
}

TEST(Filter, RewritesApplyToKeptThinkText) {
  const auto s = sample("a", "q", "5");
  const auto r = filter_record("<think>the description says 5</think><answer>5</answer>", s, default_rules());
  EXPECT_EQ(r.think_text, "the image shows 5");
}

TEST(Markers, Examples) {
  EXPECT_EQ(count_marker("Wait, wait.", "Wait"), 2u);
  EXPECT_EQ(count_marker("checked", "Check"), 0u);
  EXPECT_EQ(count_marker("Check: re-check, CHECK_x", "check"), 2u);
  EXPECT_EQ(count_marker("Hmm\xC3\xA9Hmm", "Hmm"), 2u);
  const auto zero = marker_stats(std::vector<std::string>{});
  ASSERT_EQ(zero.size(), 5u);
  for (const auto& [m, n] : zero) EXPECT_EQ(n, 0u);
  EXPECT_EQ(zero[0].first, "Wait");
  EXPECT_EQ(zero[4].first, "Check");
}

TEST(Markers, AdditiveOverSplits) {
  const std::vector<std::string> corpus{"Wait. Hmm, let me check.", "Alternatively, wait!", "No mistake here.",
                                        "hmm hmm HMM", "Checking... check"};
  const auto whole = marker_stats(corpus);
  for (std::size_t cut = 0; cut <= corpus.size(); ++cut) {
    const std::vector<std::string> a(corpus.begin(), corpus.begin() + cut), b(corpus.begin() + cut, corpus.end());
    const auto ca = marker_stats(a), cb = marker_stats(b);
    for (std::size_t i = 0; i < whole.size(); ++i) EXPECT_EQ(whole[i].second, ca[i].second + cb[i].second);
  }
}

TEST(Markers, ReflectiveReasoningOutscoresStepLists) {
  const std::vector<std::string> reflective{
      "First compute the area. Wait, the base is 4, not 3. Hmm, so the area is 6. Let me check: 4*3/2 = 6.",
      "Alternatively, use the angle sum. Wait, that gives 70. Check again: 180 - 110 = 70.",
      "I made a mistake in the sign. Hmm. Wait, yes, it is negative."};
  const std::vector<std::string> step_list{"Step 1: compute the area. Step 2: divide by 2. Step 3: report 6.",
                                           "Step 1: add the angles. Step 2: subtract from 180.",
                                           "Step 1: read the graph. Step 2: the value is 3."};
  auto total = [](const MarkerCounts& c) {
    std::size_t n = 0;
    for (const auto& [m, k] : c) n += k;
    return n;
  };
  EXPECT_GT(total(marker_stats(reflective)), total(marker_stats(step_list)));
}

TEST(Replay, ReturnsTheFixtureByteExact) {
  TempDir dir;
  const GenRequest req{GenRole::kDescription, "describe \"this\"\n", "img/1.png"};
  const std::string response = "line one\nline \"two\" \xE2\x9C\x93";
  write_fixture(dir.path(), req, response, "2024-05-05T00:00:00Z");
  const ReplayBackend backend(dir.path());
  const auto a = backend.generate(req);
  EXPECT_EQ(a.text, response);
  EXPECT_EQ(a.timestamp, "2024-05-05T00:00:00Z");
  EXPECT_EQ(backend.generate(req).text, a.text);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / (request_key(req) + ".json")));
}

TEST(Replay, KeyIsTheHashOfTheCanonicalPayload) {
  const GenRequest req{GenRole::kPseudoCot, "p", "i"};
  EXPECT_EQ(request_payload(req), R"({"image_ref":"i","prompt":"p","role":"pseudo_cot"})");
  EXPECT_EQ(request_key(req), sha256_hex(request_payload(req)));
  EXPECT_NE(request_key(req), request_key({GenRole::kReasoning, "p", "i"}));
}

TEST(Replay, MissingFixtureThrowsBackendError) {
  TempDir dir;
  const ReplayBackend backend(dir.path());
  EXPECT_THROW(backend.generate({GenRole::kReasoning, "nothing", ""}), BackendError);
}

TEST(Stages, GenerationHelpersUseReplay) {
  TempDir dir;
  const auto s = sample("a", "2+3?", "5");
  record(dir.path(), s, "<think>5</think><answer>5</answer>", "pseudo", "desc");
  const ReplayBackend b(dir.path());
  EXPECT_EQ(gen_pseudo_cot(b, s), "pseudo");
  EXPECT_EQ(gen_description(b, s, "pseudo"), "desc");
  EXPECT_EQ(gen_reasoning(b, "desc", s.question), "<think>5</think><answer>5</answer>");
  EXPECT_THROW(gen_description(b, s, "other pseudo"), BackendError);
  EXPECT_THROW(gen_reasoning(b, "   ", s.question), BackendError);
}

TEST(Pipeline, MissingFixtureBecomesBackendErrorDrop) {
  TempDir dir;
  const auto s = sample("a", "2+3?", "5");
  record(dir.path(), s, "");
  const ReplayBackend b(dir.path());
  const auto r = process_sample(s, b, b, default_rules());
  EXPECT_FALSE(r.kept);
  EXPECT_EQ(r.drop_reason, DropReason::kBackendError);
  EXPECT_EQ(r.meta.pseudo_cot, "The figure shows a triangle.");
}

TEST(Pipeline, FiveCandidatesKeepThree) {
  TempDir dir;
  const auto samples = five_candidates(dir / "fx");
  const ReplayBackend b(dir / "fx");
  const auto records = run_pipeline(samples, b, b, default_rules(), 3);
  ASSERT_EQ(records.size(), 5u);
  EXPECT_TRUE(records[0].kept);
  EXPECT_TRUE(records[1].kept);
  EXPECT_EQ(records[1].think_text, "Wait, the image shows two angles are 60.");
  EXPECT_TRUE(records[2].kept);
  EXPECT_EQ(records[3].drop_reason, DropReason::kAnswerMismatch);
  EXPECT_EQ(records[4].drop_reason, DropReason::kFormatViolation);

  const auto m = assemble_dataset(records, dir / "out" / "data.jsonl", {{"seed", 1}});
  EXPECT_EQ(m.kept, 3u);
  EXPECT_EQ(m.dropped, 2u);
  const auto manifest = nlohmann::ordered_json::parse(testsupport::slurp(manifest_path(dir / "out" / "data.jsonl")));
  EXPECT_EQ(manifest["kept"], 3);
  EXPECT_EQ(manifest["dropped"], 2);
  EXPECT_EQ(manifest["dropped_by_reason"]["answer_mismatch"], 1);
  EXPECT_EQ(manifest["dropped_by_reason"]["format_violation"], 1);
  EXPECT_EQ(manifest["dropped_by_reason"]["backend_error"], 0);
  EXPECT_EQ(manifest["meta"]["seed"], 1);

  // Every kept line re-parses to an answer matching its ground truth.
  std::istringstream lines(testsupport::slurp(dir / "out" / "data.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::ordered_json::parse(line);
    EXPECT_TRUE(match_answer(j["answer_text"].get<std::string>(), j["ground_truth"].get<std::string>(),
                             default_rules().filters.match)
                    .matched);
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    EXPECT_EQ(keys, (std::vector<std::string>{"image_ref", "question", "think_text", "answer_text", "ground_truth",
                                              "pipeline_meta", "kept", "drop_reason"}));
    ++n;
  }
  EXPECT_EQ(n, 3);
}

TEST(Pipeline, RerunsAreByteIdenticalAtAnyParallelism) {
  TempDir dir;
  const auto samples = five_candidates(dir / "fx");
  const ReplayBackend b(dir / "fx");
  std::string first;
  for (std::size_t workers : {1, 2, 5, 16}) {
    const auto out = dir / ("run" + std::to_string(workers) + ".jsonl");
    assemble_dataset(run_pipeline(samples, b, b, default_rules(), workers), out);
    const auto digest = sha256_hex(testsupport::slurp(out)) + sha256_hex(testsupport::slurp(manifest_path(out)));
    if (first.empty()) first = digest;
    EXPECT_EQ(digest, first) << workers;
  }
}

TEST(Pipeline, EmptyInputGivesEmptyDatasetAndZeroManifest) {
  TempDir dir;
  const ReplayBackend b(dir.path());
  const auto records = run_pipeline(std::vector<VqaSample>{}, b, b, default_rules());
  const auto m = assemble_dataset(records, dir / "empty.jsonl");
  EXPECT_EQ(m.kept, 0u);
  EXPECT_EQ(m.dropped, 0u);
  EXPECT_EQ(testsupport::slurp(dir / "empty.jsonl"), "");
  const auto manifest = nlohmann::ordered_json::parse(testsupport::slurp(manifest_path(dir / "empty.jsonl")));
  for (const auto& [k, v] : manifest["dropped_by_reason"].items()) EXPECT_EQ(v, 0) << k;
}

TEST(Pipeline, ReadCorpus) {
  TempDir dir;
  testsupport::spit(dir / "c.jsonl",
                    R"({"image_ref":"a.png","question":"q1","ground_truth":"1","source_tag":"s"})"
                    "\n\n"
                    R"({"question":"q2","ground_truth":"2"})"
                    "\n");
  const auto c = read_corpus(dir / "c.jsonl");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].source_tag, "s");
  EXPECT_EQ(c[1].image_ref, "");
  testsupport::spit(dir / "bad.jsonl", R"({"question":"q"})");
  EXPECT_THROW(read_corpus(dir / "bad.jsonl"), std::runtime_error);
}

namespace {

struct LocalServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  LocalServer() = default;
  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LocalServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

std::string completion(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

}  // namespace

TEST(Remote, BuildsTheChatCompletionBody) {
  EndpointConfig cfg;
  cfg.base_url = "http://localhost:1";
  cfg.model = "m";
  cfg.temperature = 0.25;
  RemoteBackend text_only(cfg);
  const auto a = nlohmann::json::parse(text_only.build_body({GenRole::kDescription, "hi", "img.png"}));
  EXPECT_EQ(a["model"], "m");
  EXPECT_EQ(a["temperature"], 0.25);
  EXPECT_EQ(a["messages"][0]["role"], "user");
  EXPECT_EQ(a["messages"][0]["content"], "hi");

  cfg.vision = true;
  RemoteBackend vision(cfg);
  const auto b = nlohmann::json::parse(vision.build_body({GenRole::kDescription, "hi", "img.png"}));
  EXPECT_EQ(b["messages"][0]["content"][0]["text"], "hi");
  EXPECT_EQ(b["messages"][0]["content"][1]["image_url"]["url"], "img.png");
  const auto c = nlohmann::json::parse(vision.build_body({GenRole::kReasoning, "hi", ""}));
  EXPECT_EQ(c["messages"][0]["content"], "hi");
}

TEST(Remote, ParseContent) {
  EXPECT_EQ(RemoteBackend::parse_content(completion("ok")), "ok");
  EXPECT_THROW(RemoteBackend::parse_content("{}"), BackendError);
  EXPECT_THROW(RemoteBackend::parse_content("not json"), BackendError);
}

TEST(Remote, TalksToALocalEndpointAndRecords) {
  LocalServer srv;
  std::string seen_auth, seen_body;
  srv.server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_body = req.body;
    res.set_content(completion("remote says hi"), "application/json");
  });
  srv.start();
  setenv("THINKSTAGE_TEST_TOKEN", "sekrit", 1);

  EndpointConfig cfg;
  cfg.base_url = srv.url();
  cfg.model = "test-model";
  cfg.auth_env = "THINKSTAGE_TEST_TOKEN";
  cfg.timeout_seconds = 5;
  TempDir dir;
  const auto remote = std::make_shared<RemoteBackend>(cfg);
  const RecordingBackend recorder(remote, dir.path());
  const GenRequest req{GenRole::kReasoning, "prompt text", ""};
  const auto r = recorder.generate(req);
  EXPECT_EQ(r.text, "remote says hi");
  EXPECT_FALSE(r.timestamp.empty());
  EXPECT_EQ(seen_auth, "Bearer sekrit");
  EXPECT_EQ(nlohmann::json::parse(seen_body)["messages"][0]["content"], "prompt text");

  const ReplayBackend replay(dir.path());
  EXPECT_EQ(replay.generate(req).text, "remote says hi");
  EXPECT_EQ(replay.generate(req).timestamp, r.timestamp);
}

TEST(Remote, RetriesServerErrorsButNotClientErrors) {
  LocalServer srv;
  std::atomic<int> flaky_calls{0}, bad_calls{0};
  srv.server.Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
    if (flaky_calls++ < 2) {
      res.status = 503;
      return;
    }
    res.set_content(completion("eventually"), "application/json");
  });
  srv.server.Post("/bad", [&](const httplib::Request&, httplib::Response& res) {
    ++bad_calls;
    res.status = 400;
  });
  srv.start();

  EndpointConfig cfg;
  cfg.base_url = srv.url();
  cfg.model = "m";
  cfg.auth_env = "";
  cfg.timeout_seconds = 5;
  cfg.max_retries = 3;
  cfg.path = "/flaky";
  EXPECT_EQ(RemoteBackend(cfg).generate({GenRole::kReasoning, "p", ""}).text, "eventually");
  EXPECT_EQ(flaky_calls.load(), 3);

  cfg.path = "/bad";
  EXPECT_THROW(RemoteBackend(cfg).generate({GenRole::kReasoning, "p", ""}), BackendError);
  EXPECT_EQ(bad_calls.load(), 1);
}

TEST(Remote, UnreachableEndpointIsABackendError) {
  EndpointConfig cfg;
  cfg.base_url = "http://127.0.0.1:1";
  cfg.model = "m";
  cfg.timeout_seconds = 1;
  cfg.max_retries = 0;
  EXPECT_THROW(RemoteBackend(cfg).generate({GenRole::kReasoning, "p", ""}), BackendError);
}
