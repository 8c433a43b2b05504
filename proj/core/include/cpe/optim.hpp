#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cpe/policy.hpp"
#include "cpe/rollout.hpp"
#include "cpe/sampling.hpp"
#include "cpe/toy_env.hpp"

namespace cpe {

struct ClipConfig {
  double epsilon = 0.2;       // on-policy clip
  double epsilon_low = 0.2;   // off-policy lower clip
  double epsilon_high = 0.2;  // off-policy upper clip
};

void validate(const ClipConfig& cfg);

enum class BaselineKind { GroupMean, GroupMeanStd };

const char* to_string(BaselineKind k);
BaselineKind baseline_kind_from_string(const std::string& s);

struct TrainConfig {
  double learning_rate = 1e-3;  // toy-scale default; see README for rationale
  int batch_size = 128;         // (query, persona) pairs per round
  int mini_batch_size = 64;     // pairs per gradient step
  int epochs = 1;               // passes over the round's chunks
  int rounds = 200;
  BaselineKind baseline = BaselineKind::GroupMean;
  double kl_coef = 0.0;  // penalty against the initial policy; 0 disables
  bool stratify_minibatches = false;
};

void validate(const TrainConfig& cfg);

struct AdvantageEstimate {
  std::vector<double> values;
  BaselineKind baseline_kind = BaselineKind::GroupMean;
};

// One selected sample flattened for the update step: conditioning features,
// chosen segments, the frozen behavior log-probability and the reward, plus
// the question-group id advantages are computed within.
struct TrainSample {
  ContextFeatures ctx;
  std::vector<int> segments;
  double behavior_logprob = 0.0;
  double reward = 0.0;
  bool edited = false;
  int group = 0;
};

// Expands a Selection into TrainSamples (edit contexts are rebuilt from the
// parent critique's flags).
std::vector<TrainSample> flatten_selection(const std::vector<RolloutGroup>& groups,
                                           const Selection& selection,
                                           const ToyEnv& env);

// Reward minus the mean over the sample's question group (originals plus
// selected edited); GroupMeanStd also divides by the population std + 1e-8.
AdvantageEstimate compute_advantages(std::span<const TrainSample> samples,
                                     BaselineKind kind);

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // d(loss)/d(weights), flat row-major
  double clip_frac_onpolicy = 0.0;
  double clip_frac_offpolicy = 0.0;
};

// Mean per-sample policy-gradient loss with the two branches:
// originals get the clipped surrogate against pi_theta_old, edited samples
// get clip(pi_theta/pi_e, 1-eps_low, 1+eps_high) * advantage. The gradient is
// the exact piecewise derivative, zero on clipped branches and at clip kinks.
// kl_coef > 0 adds kl_coef * mean sequence KL against `ref`.
LossResult hybrid_loss(std::span<const TrainSample> samples,
                       const PolicyParams& params, const ToyEnv& env,
                       const ClipConfig& clip, std::span<const double> advantages,
                       double kl_coef = 0.0, const PolicyParams* ref = nullptr);

// Central-difference validation of hybrid_loss's analytic gradient. Samples
// whose ratio lies within 10*h of a clip boundary are excluded (the loss is
// not differentiable there); returns the max relative error over parameters
// with |analytic| > 1e-8.
double finite_diff_check(const PolicyParams& params, const ToyEnv& env,
                         std::span<const TrainSample> samples,
                         const ClipConfig& clip, std::span<const double> advantages,
                         double step);

struct TrainLogRow {
  int round = 0;
  double mean_reward = 0.0;
  double mean_length = 0.0;
  double loss = 0.0;
  double clip_frac_onpolicy = 0.0;
  double clip_frac_offpolicy = 0.0;
  // Mean of the backend's diagnostic_reward over originals; equals
  // mean_reward when no diagnostic is configured. Not part of the CSV.
  double mean_diagnostic = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<TrainLogRow> log;
};

// CSV with header round,mean_reward,mean_length,loss,clip_frac_onpolicy,
// clip_frac_offpolicy; bytes are deterministic for a given log.
std::string train_log_csv(const std::vector<TrainLogRow>& log);
void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& log);

// Full loop: per round, roll out, critique/reward, edit, select, compute
// advantages, then one pass of minibatch gradient steps. Deterministic given
// the seed; mean_reward and mean_length are over originals.
TrainResult train(PolicyParams init, const ToyEnv& env, const RoundBackend& backend,
                  const RolloutConfig& rollout_cfg, const SamplingConfig& sampling_cfg,
                  const ClipConfig& clip_cfg, const TrainConfig& train_cfg,
                  std::uint64_t seed);

}  // namespace cpe
