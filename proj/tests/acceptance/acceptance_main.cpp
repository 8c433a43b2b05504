// Acceptance suite: one checker per shipped guarantee, each printing a
// single PASS/FAIL line. Run with no arguments for all checks or with a list
// of numbers to run a subset. Exit code 0 iff everything passed.

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpe/dataset.hpp"
#include "cpe/errors.hpp"
#include "cpe/eval.hpp"
#include "cpe/optim.hpp"
#include "cpe/policy.hpp"
#include "cpe/reward.hpp"
#include "cpe/rng.hpp"
#include "cpe/rollout.hpp"
#include "cpe/sampling.hpp"
#include "cpe/svg.hpp"
#include "cpe/toy_env.hpp"

namespace fs = std::filesystem;
using namespace cpe;

namespace {

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool condition, const std::string& message) {
  if (!condition) throw CheckFailure(message);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared toy-run configuration for the training-level checks (8, 9, 11).
// Hyperparameters follow the documented defaults (batch 128, minibatch 64,
// 4 rollouts per query); the learning rate is the toy-scale default.

TrainConfig training_config(int rounds) {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 128;
  cfg.mini_batch_size = 64;
  cfg.rounds = rounds;
  return cfg;
}

double mean_over(const std::vector<TrainLogRow>& log, std::size_t begin,
                 std::size_t end, double TrainLogRow::*field) {
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += log[i].*field;
  return sum / static_cast<double>(end - begin);
}

// ---------------------------------------------------------------------------

void check_weighted_score() {
  const double s = aggregate_final_score({3, 4, 2}, {0.35, 0.40, 0.25});
  expect(std::abs(s - 3.15) <= 1e-12,
         "aggregate_final_score((3,4,2)) = " + fmt(s) + ", want 3.15");
}

void check_imbalance_statistic() {
  std::vector<int> counts;
  const int plan[][2] = {{8, 15}, {7, 38}, {6, 24}, {5, 34}, {4, 17}};
  for (const auto& [value, times] : plan) {
    counts.insert(counts.end(), times, value);
  }
  const SelectionReport report = make_report(counts);
  expect(report.mean == 6.0, "mean = " + fmt(report.mean) + ", want 6.0");
  expect(report.variance == 1.5625,
         "variance = " + fmt(report.variance) + ", want 1.5625");
  // Within one unit in the second decimal of the documented 1.57 (which is
  // the sample-variance reading, 200/127).
  expect(std::abs(report.variance - 1.57) <= 0.01,
         "variance strays from 1.57 by more than 0.01");
}

ToyEnv gradient_env() {
  std::vector<SegmentInfo> vocab = {
      {SegmentKind::OnTopic, 0, 60, "topic0"},
      {SegmentKind::OnTopic, 1, 60, "topic1"},
      {SegmentKind::PersonaMention, 0, 50, "mention0"},
      {SegmentKind::PersonaMention, 1, 50, "mention1"},
      {SegmentKind::SelfSummary, -1, 40, "self_summary"},
      {SegmentKind::NameDrop, -1, 10, "name_drop"},
      {SegmentKind::Filler, -1, 30, "filler"},
      {SegmentKind::Empty, -1, 0, "empty"},
  };
  return ToyEnv(2, 3, 4, std::move(vocab));
}

void check_hybrid_gradient() {
  const ToyEnv env = gradient_env();
  const ClipConfig clip;
  Rng rng(314159);
  double worst = 0.0;
  for (int batch = 0; batch < 100; ++batch) {
    PolicyParams params = PolicyParams::zeros(env);
    for (double& w : params.weights) w = 0.6 * (2.0 * rng.next_double() - 1.0);
    PolicyParams behavior = params;
    for (double& w : behavior.weights) w += 0.05 * (2.0 * rng.next_double() - 1.0);

    std::vector<TrainSample> samples;
    std::vector<double> advantages;
    for (int i = 0; i < 16; ++i) {
      TrainSample s;
      s.ctx.topic_id = static_cast<int>(rng.next_below(env.num_topics()));
      s.ctx.relevant_trait_mask =
          static_cast<std::uint32_t>(rng.next_below(1u << env.num_traits()));
      s.edited = rng.next_double() < 0.4;
      s.ctx.edit_mode = s.edited;
      if (s.edited)
        s.ctx.flags = static_cast<FlagMask>(rng.next_below(1u << kNumCritiqueFlags));
      double blp = 0.0;
      s.segments = sample_sequence(behavior, env, s.ctx, rng, &blp);
      s.behavior_logprob = blp;
      s.group = i / 4;
      samples.push_back(std::move(s));
      advantages.push_back(2.0 * rng.next_double() - 1.0);
    }
    const double err = finite_diff_check(params, env, samples, clip, advantages, 1e-5);
    worst = std::max(worst, err);
  }
  expect(worst <= 1e-4,
         "max relative gradient error " + fmt(worst) + " over 100 batches");

  // Clipped off-policy samples carry an exactly-zero gradient.
  PolicyParams params = PolicyParams::zeros(env);
  std::vector<TrainSample> clipped;
  std::vector<double> advantages;
  for (double ratio : {0.3, 0.79, 1.21, 2.0}) {
    TrainSample s;
    s.edited = true;
    s.ctx.edit_mode = true;
    double lp = 0.0;
    s.segments = sample_sequence(params, env, s.ctx, rng, &lp);
    s.behavior_logprob = lp - std::log(ratio);
    s.group = 0;
    clipped.push_back(std::move(s));
    advantages.push_back(1.5);
  }
  const LossResult res = hybrid_loss(clipped, params, env, clip, advantages);
  for (double g : res.grad) {
    expect(g == 0.0, "clipped off-policy gradient entry is " + fmt(g));
  }
}

void check_reduction_property() {
  const ToyEnv env;
  const RoundBackend backend = grm_backend(env, GrmRuleConfig{}, DimWeights{});
  const ClipConfig clip;
  TrainConfig tcfg = training_config(8);
  tcfg.batch_size = 16;
  tcfg.mini_batch_size = 8;

  RolloutConfig with_edits;  // edits generated, then filtered out by r_e = 0
  with_edits.edit_rounds = 1;
  SamplingConfig r0;
  r0.edit_ratio = 0.0;
  const TrainResult hybrid_run = train(PolicyParams::short_answer_init(env), env,
                                       backend, with_edits, r0, clip, tcfg, 2718);

  RolloutConfig no_edits;  // vanilla clipped-surrogate run
  no_edits.edit_rounds = 0;
  SamplingConfig any;
  any.edit_ratio = 0.9;
  const TrainResult vanilla_run = train(PolicyParams::short_answer_init(env), env,
                                        backend, no_edits, any, clip, tcfg, 2718);

  expect(hybrid_run.log.size() == vanilla_run.log.size(), "log length mismatch");
  for (std::size_t i = 0; i < hybrid_run.log.size(); ++i) {
    expect(hybrid_run.log[i].loss == vanilla_run.log[i].loss,
           "loss differs at round " + std::to_string(i));
  }
  expect(hybrid_run.params.weights == vanilla_run.params.weights,
         "final parameters differ");
}

std::vector<int> brute_force_rank(const std::vector<double>& rewards, int m) {
  std::vector<int> best, comb(m);
  double best_sum = -1e300;
  const int n = static_cast<int>(rewards.size());
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == m) {
      double sum = 0.0;
      for (int i : comb) sum += rewards[i];
      if (sum > best_sum + 1e-12) {
        best_sum = sum;
        best = comb;
      }
      return;
    }
    for (int i = start; i < n; ++i) {
      comb[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  if (m > 0) rec(0, 0);
  return best;
}

void check_sampling_oracles() {
  Rng rng(271828);
  ResponseSample proto;
  proto.query_id = "q";
  proto.segments = std::vector<int>{0};
  proto.behavior_logprob = -1.0;

  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_below(8));
    RolloutGroup g;
    g.query.id = "q";
    g.query.text = "t";
    g.persona.id = "p";
    std::vector<double> rewards;
    for (int i = 0; i < n; ++i) {
      ResponseSample parent = proto;
      parent.reward = static_cast<double>(rng.next_below(6));
      g.originals.push_back(parent);
    }
    for (int i = 0; i < n; ++i) {
      ResponseSample child = proto;
      child.origin = Origin::Edited;
      child.parent_index = i;
      child.reward = static_cast<double>(rng.next_below(6));
      rewards.push_back(*child.reward);
      g.edited.push_back(child);
    }
    const double r_e = rng.next_double();

    // RewardRank equals the brute-force subset oracle.
    auto kept = select_reward_rank(g.edited, r_e);
    std::sort(kept.begin(), kept.end());
    const int m = std::min(n, round_half_up(r_e * n));
    expect(kept == brute_force_rank(rewards, m),
           "reward-rank mismatch at trial " + std::to_string(trial));

    // Conditional output is a subset of strict improvers.
    for (int idx : select_conditional(g, r_e)) {
      expect(*g.edited[idx].reward > *g.originals[g.edited[idx].parent_index].reward,
             "conditional selected a non-improver");
    }

    // Every strategy retains 100% of originals.
    for (SamplingStrategy strategy :
         {SamplingStrategy::Random, SamplingStrategy::RewardRank,
          SamplingStrategy::Conditional, SamplingStrategy::BatchLevelRank}) {
      SamplingConfig cfg;
      cfg.strategy = strategy;
      cfg.edit_ratio = r_e;
      cfg.seed = trial;
      const Selection sel = select({g}, cfg);
      int originals = 0;
      for (const auto& item : sel.items) originals += item.edited ? 0 : 1;
      expect(originals == n, "originals were dropped");
    }
  }
}

std::vector<JudgmentRecord> simulate_glm_records(int n, double theta, double phi,
                                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> len_m(n), len_b(n);
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    len_m[i] = 150 + static_cast<int>(rng.next_below(500));
    len_b[i] = 150 + static_cast<int>(rng.next_below(500));
    const double d = len_m[i] - len_b[i];
    sum += d;
    sum_sq += d * d;
  }
  const double mean = sum / n;
  const double std_dev = std::sqrt(sum_sq / n - mean * mean);
  std::vector<JudgmentRecord> records(n);
  for (int i = 0; i < n; ++i) {
    auto& r = records[i];
    r.instruction_id = std::to_string(i);
    r.model_id = "m";
    r.baseline_id = "b";
    r.len_model = len_m[i];
    r.len_baseline = len_b[i];
    r.model_won = rng.next_double() <
                  logistic(theta + phi * length_feature(len_m[i], len_b[i], std_dev));
  }
  return records;
}

void check_glm_recovery() {
  const auto records = simulate_glm_records(20000, 1.0, 0.5, 161803);
  const GlmFit fit = fit_lc_glm(records);
  expect(fit.converged, "fit did not converge");
  expect(std::abs(fit.theta("m", "b") - 1.0) <= 0.05,
         "theta = " + fmt(fit.theta("m", "b")) + ", want 1.0 +- 0.05");
  expect(std::abs(fit.phi("m", "b") - 0.5) <= 0.05,
         "phi = " + fmt(fit.phi("m", "b")) + ", want 0.5 +- 0.05");

  const auto no_length = simulate_glm_records(20000, 0.4, 0.0, 141421);
  const GlmFit fit0 = fit_lc_glm(no_length);
  const double raw = raw_winrate(no_length, "m", "b");
  const double lc = lc_winrate(fit0, "m", "b");
  expect(std::abs(raw - lc) <= 0.01,
         "lc " + fmt(lc) + " vs raw " + fmt(raw) + " differ by more than 1 point");
}

void check_identities() {
  expect(logistic(0.0) == 0.5, "logistic(0) != 0.5");
  expect(length_feature(350, 350, 80.0) == 0.0, "tanh feature at equal lengths");
  for (double a : {100.0, 250.0, 431.0}) {
    for (double b : {90.0, 333.0}) {
      expect(length_feature(a, b, 75.0) == -length_feature(b, a, 75.0),
             "tanh feature is not antisymmetric");
    }
  }
  const std::vector<std::string> same = {"x", "y", "x"};
  expect(cohens_kappa(same, same) == 1.0, "kappa on identical labels");
  const std::vector<std::string> a = {"x", "x", "y", "y"};
  const std::vector<std::string> b = {"x", "y", "y", "y"};
  expect(std::abs(cohens_kappa(a, b) - 0.5) < 1e-12,
         "kappa hand case = " + fmt(cohens_kappa(a, b)) + ", want 0.5");
}

void check_reward_hacking() {
  const ToyEnv env;
  const GrmRuleConfig rules;
  const DimWeights weights;
  const int rounds = 200;

  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    RolloutConfig rollout;
    SamplingConfig sampling;
    const ClipConfig clip;
    const TrainConfig tcfg = training_config(rounds);

    RolloutConfig no_edit = rollout;
    no_edit.edit_rounds = 0;
    const TrainResult hack = train(PolicyParams::short_answer_init(env), env,
                                   hackable_backend(env), no_edit, sampling, clip,
                                   tcfg, seed);
    const TrainResult grm = train(PolicyParams::short_answer_init(env), env,
                                  grm_backend(env, rules, weights), rollout,
                                  sampling, clip, tcfg, seed);

    const std::size_t q = rounds - rounds / 4;
    const double hack_len = mean_over(hack.log, q, rounds, &TrainLogRow::mean_length);
    const double grm_len = mean_over(grm.log, q, rounds, &TrainLogRow::mean_length);
    const double grm_initial = grm.log.front().mean_length;

    expect(hack_len >= 1.5 * grm_len,
           "seed " + std::to_string(seed) + ": hackable final length " +
               fmt(hack_len) + " < 1.5 x " + fmt(grm_len));
    expect(std::abs(grm_len - grm_initial) <= 0.20 * grm_initial,
           "seed " + std::to_string(seed) + ": critique-run length drifted from " +
               fmt(grm_initial) + " to " + fmt(grm_len));
  }
}

void check_training_improvement() {
  const ToyEnv env;
  const int rounds = 200;
  for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    RolloutConfig rollout;  // k = 4, one edit round
    SamplingConfig sampling;
    sampling.strategy = SamplingStrategy::Random;
    sampling.edit_ratio = 0.5;
    const TrainResult result =
        train(PolicyParams::short_answer_init(env), env,
              grm_backend(env, GrmRuleConfig{}, DimWeights{}), rollout, sampling,
              ClipConfig{}, training_config(rounds), seed);

    const double first =
        mean_over(result.log, 0, rounds / 4, &TrainLogRow::mean_reward);
    const double last =
        mean_over(result.log, rounds - rounds / 4, rounds, &TrainLogRow::mean_reward);
    expect(last - first >= 0.5,
           "seed " + std::to_string(seed) + ": improvement " + fmt(last - first) +
               " (first quartile " + fmt(first) + ", last " + fmt(last) + ")");
  }
}

void check_protocol_round_trip() {
  const std::string dir = std::string(CPE_ASSETS_DIR) + "/grm_fixtures";
  const auto manifest =
      nlohmann::json::parse(read_file(dir + "/golden_manifest.json"));
  expect(manifest.size() == 50, "expected 50 golden fixtures");
  for (const auto& entry : manifest) {
    const std::string file = entry.at("file").get<std::string>();
    const Critique c = parse_grm_output(read_file(dir + "/" + file));
    expect(std::abs(c.scores.helpfulness - entry.at("helpfulness").get<double>()) <
               1e-12,
           file + ": helpfulness mismatch");
    expect(std::abs(c.scores.personalization -
                    entry.at("personalization").get<double>()) < 1e-12,
           file + ": personalization mismatch");
    expect(std::abs(c.scores.naturalness - entry.at("naturalness").get<double>()) <
               1e-12,
           file + ": naturalness mismatch");
    expect(c.feedback_text == entry.at("feedback").get<std::string>(),
           file + ": feedback mismatch");
  }

  const std::array<std::pair<const char*, ProtocolErrorKind>, 3> malformed = {{
      {"malformed_missing_tag.txt", ProtocolErrorKind::MissingTag},
      {"malformed_bad_number.txt", ProtocolErrorKind::BadNumber},
      {"malformed_out_of_range.txt", ProtocolErrorKind::OutOfRange},
  }};
  for (const auto& [file, kind] : malformed) {
    try {
      parse_grm_output(read_file(dir + "/" + std::string(file)));
      throw CheckFailure(std::string(file) + " parsed but should not");
    } catch (const ProtocolError& e) {
      expect(e.kind() == kind,
             std::string(file) + ": wrong kind " + to_string(e.kind()));
    }
  }
}

void check_cli_determinism() {
  const fs::path base = fs::temp_directory_path() / "cpe_acceptance_cli";
  fs::remove_all(base);
  fs::create_directories(base);
  const std::string config = (base / "config.json").string();
  {
    std::ofstream out(config);
    out << R"({
      "seed": 424242,
      "rollout": {"k": 4, "edit_rounds": 1},
      "sampling": {"strategy": "random", "edit_ratio": 0.5},
      "train": {"learning_rate": 0.05, "batch_size": 16, "mini_batch_size": 8,
                "rounds": 25}
    })";
  }
  auto run = [&config, &base](const std::string& out_dir) {
    const std::string cmd = std::string(CPE_CLI_PATH) + " train --config " + config +
                            " --out " + (base / out_dir).string() + " > " +
                            (base / (out_dir + ".stdout")).string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    expect(status == 0, "cpe train exited with status " + std::to_string(status));
  };
  run("run1");
  run("run2");
  for (const char* file : {"train_log.csv", "train.svg"}) {
    const std::string a = read_file((base / "run1" / file).string());
    const std::string b = read_file((base / "run2" / file).string());
    expect(!a.empty(), std::string(file) + " is empty");
    expect(a == b, std::string(file) + " differs between identical runs");
  }
  fs::remove_all(base);
}

struct Criterion {
  int number;
  const char* name;
  std::function<void()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "weighted final score (3,4,2) -> 3.15 exactly", check_weighted_score},
      {2, "batch-level selection imbalance: mean 6.0, variance 1.5625",
       check_imbalance_statistic},
      {3, "hybrid-loss analytic gradient vs central differences",
       check_hybrid_gradient},
      {4, "r_e = 0 training equals the vanilla clipped run bitwise",
       check_reduction_property},
      {5, "sampling strategies match brute-force oracles", check_sampling_oracles},
      {6, "length-controlled GLM parameter recovery", check_glm_recovery},
      {7, "logistic/tanh/kappa identities", check_identities},
      {8, "hackable reward inflates length; rule critique holds it",
       check_reward_hacking},
      {9, "200 rounds of critique-and-edit training raise the final score",
       check_training_improvement},
      {10, "critique protocol golden and malformed fixtures",
       check_protocol_round_trip},
      {11, "cpe train is byte-deterministic (CSV and SVG)", check_cli_determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& criterion : criteria()) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), criterion.number) ==
            selected.end()) {
      continue;
    }
    try {
      criterion.run();
      std::printf("PASS  %2d  %s\n", criterion.number, criterion.name);
    } catch (const std::exception& e) {
      ++failures;
      std::printf("FAIL  %2d  %s\n          %s\n", criterion.number, criterion.name,
                  e.what());
    }
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
