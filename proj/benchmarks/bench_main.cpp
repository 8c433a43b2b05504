#include <benchmark/benchmark.h>

#include <vector>

#include "cpe/eval.hpp"
#include "cpe/optim.hpp"
#include "cpe/policy.hpp"
#include "cpe/reward.hpp"
#include "cpe/rng.hpp"
#include "cpe/rollout.hpp"
#include "cpe/sampling.hpp"

namespace {

using namespace cpe;

PolicyParams jittered_params(const ToyEnv& env, std::uint64_t seed) {
  Rng rng(seed);
  PolicyParams p = PolicyParams::zeros(env);
  for (double& w : p.weights) w = 0.4 * (2.0 * rng.next_double() - 1.0);
  return p;
}

std::vector<TrainSample> make_samples(const ToyEnv& env, const PolicyParams& params,
                                      int n) {
  Rng rng(7);
  std::vector<TrainSample> samples;
  for (int i = 0; i < n; ++i) {
    TrainSample s;
    s.ctx.topic_id = static_cast<int>(rng.next_below(env.num_topics()));
    s.edited = i % 3 == 0;
    s.ctx.edit_mode = s.edited;
    double lp = 0.0;
    s.segments = sample_sequence(params, env, s.ctx, rng, &lp);
    s.behavior_logprob = lp;
    s.reward = rng.next_double();
    s.group = i / 4;
    samples.push_back(std::move(s));
  }
  return samples;
}

void BM_PolicyLogprob(benchmark::State& state) {
  const ToyEnv env;
  const PolicyParams params = jittered_params(env, 1);
  Rng rng(2);
  ContextFeatures ctx;
  double lp = 0.0;
  const auto segments = sample_sequence(params, env, ctx, rng, &lp);
  for (auto _ : state) {
    benchmark::DoNotOptimize(policy_logprob(params, env, ctx, segments));
  }
}
BENCHMARK(BM_PolicyLogprob);

void BM_HybridLossBatch64(benchmark::State& state) {
  const ToyEnv env;
  const PolicyParams params = jittered_params(env, 3);
  const auto samples = make_samples(env, params, 64);
  const auto adv = compute_advantages(samples, BaselineKind::GroupMean);
  const ClipConfig clip;
  for (auto _ : state) {
    benchmark::DoNotOptimize(hybrid_loss(samples, params, env, clip, adv.values));
  }
}
BENCHMARK(BM_HybridLossBatch64);

void BM_SimulatedGrm(benchmark::State& state) {
  const ToyEnv env;
  const auto [query, persona] = env.make_pair(1, 0, 0);
  const PolicyParams params = jittered_params(env, 4);
  Rng rng(5);
  ResponseSample s;
  s.query_id = query.id;
  double lp = 0.0;
  s.segments = sample_sequence(params, env, env.context(query, persona), rng, &lp);
  s.token_length = env.token_length(*s.segments);
  const GrmRuleConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulated_grm(env, s, persona, query, cfg));
  }
}
BENCHMARK(BM_SimulatedGrm);

void BM_ParseGrmOutput(benchmark::State& state) {
  Critique c;
  c.feedback_text = "Trim the closing note and fold in the diet preference.";
  c.scores = {2, 3, -1};
  const std::string text = format_grm_output(c);
  for (auto _ : state) {
    benchmark::DoNotOptimize(parse_grm_output(text));
  }
}
BENCHMARK(BM_ParseGrmOutput);

void BM_SelectRewardRank(benchmark::State& state) {
  RolloutGroup g;
  Rng rng(6);
  for (int i = 0; i < 8; ++i) {
    ResponseSample s;
    s.query_id = "q";
    s.segments = std::vector<int>{0};
    s.reward = rng.next_double();
    s.origin = i < 4 ? Origin::Original : Origin::Edited;
    if (i >= 4) {
      s.parent_index = i - 4;
      g.edited.push_back(s);
    } else {
      g.originals.push_back(s);
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(select_reward_rank(g.edited, 0.5));
  }
}
BENCHMARK(BM_SelectRewardRank);

void BM_GlmFit2k(benchmark::State& state) {
  Rng rng(8);
  std::vector<JudgmentRecord> records(2000);
  for (int i = 0; i < 2000; ++i) {
    auto& r = records[i];
    r.instruction_id = std::to_string(i);
    r.model_id = "m";
    r.baseline_id = "b";
    r.len_model = 150 + static_cast<int>(rng.next_below(500));
    r.len_baseline = 150 + static_cast<int>(rng.next_below(500));
    r.model_won = rng.next_double() < 0.6;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_lc_glm(records));
  }
}
BENCHMARK(BM_GlmFit2k);

void BM_RunRoundBatch16(benchmark::State& state) {
  const ToyEnv env;
  const PolicyParams params = PolicyParams::short_answer_init(env);
  const RoundBackend backend = grm_backend(env, GrmRuleConfig{}, DimWeights{});
  const auto batch = env.make_batch(9, 0, 16);
  RolloutConfig cfg;
  cfg.seed = 10;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_round(params, env, backend, batch, cfg));
  }
}
BENCHMARK(BM_RunRoundBatch16);

}  // namespace

BENCHMARK_MAIN();
