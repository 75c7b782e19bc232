#include <benchmark/benchmark.h>

#include "thinkstage/env.hpp"
#include "thinkstage/policy.hpp"
#include "thinkstage/rollout.hpp"

using namespace thinkstage;

namespace {

struct Fixture {
  Vocabulary vocab{4};
  EnvSpec env;
  TabularPolicy policy;
  Scorer scorer;
  std::vector<Question> batch;
  SampleRequest req;
  std::vector<RolloutGroup> groups;

  Fixture(std::size_t max_len, std::size_t group_size)
      : policy(make_cold_start_policy(vocab, env.num_keys, {0.998, 40.0})),
        scorer{vocab, env, RewardSpec{}, 1},
        batch(gen_questions(env, 1, 8)) {
    req = {&policy, &policy, group_size, max_len, 1, 0};
    groups = sample_groups_reference(req, batch, scorer);
  }
};

// Args: max_len, group_size, parallel (0 = serial reference)
void BM_SampleGroups(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const bool parallel = state.range(2) != 0;
  for (auto _ : state) {
    auto g = parallel ? sample_groups(f.req, f.batch, f.scorer) : sample_groups_reference(f.req, f.batch, f.scorer);
    benchmark::DoNotOptimize(g);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.batch.size()) * state.range(1));
}

void BM_BatchLogprobs(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const bool parallel = state.range(2) != 0;
  for (auto _ : state) {
    auto lp = parallel ? batch_logprobs(f.groups, f.policy) : batch_logprobs_reference(f.groups, f.policy);
    benchmark::DoNotOptimize(lp);
  }
}

void BM_BatchGradient(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const bool parallel = state.range(2) != 0;
  const auto lp = batch_logprobs_reference(f.groups, f.policy);
  const GrpoHyperParams hp;
  for (auto _ : state) {
    auto g = parallel ? batch_gradient(f.groups, f.policy, lp, hp) : batch_gradient_reference(f.groups, f.policy, lp, hp);
    benchmark::DoNotOptimize(g);
  }
}

void stage_args(benchmark::internal::Benchmark* b) {
  b->ArgNames({"max_len", "group", "parallel"});
  for (auto [len, g] : {std::pair{64, 16}, std::pair{128, 8}, std::pair{256, 4}})
    for (int par : {0, 1}) b->Args({len, g, par});
}

}  // namespace

BENCHMARK(BM_SampleGroups)->Apply(stage_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BatchLogprobs)->Apply(stage_args)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BatchGradient)->Apply(stage_args)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
