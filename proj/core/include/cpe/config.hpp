#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpe/llm_client.hpp"
#include "cpe/optim.hpp"
#include "cpe/reward.hpp"
#include "cpe/rollout.hpp"
#include "cpe/sampling.hpp"
#include "cpe/toy_env.hpp"

namespace cpe {

enum class RunMode { Toy, Llm };
enum class RewardBackendKind { GrmRules, Hackable };

const char* to_string(RunMode m);
const char* to_string(RewardBackendKind k);

// Everything that affects a run's results lives in the JSON config; command
// line flags only pick the command and override seed/output paths.
struct RunConfig {
  RunMode mode = RunMode::Toy;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  ToyEnvConfig env;
  RolloutConfig rollout;
  SamplingConfig sampling;
  ClipConfig clip;
  TrainConfig train;
  DimWeights weights;
  GrmRuleConfig grm_rules;
  RewardBackendKind reward_backend = RewardBackendKind::GrmRules;
  std::optional<EndpointConfig> endpoint;  // required in Llm mode

  // Ablation grid. When the config carries an "ablate" block its grid is
  // used as given; otherwise the default strategy/ratio grid applies.
  bool ablate_specified = false;
  std::vector<SamplingStrategy> ablate_strategies;
  std::vector<double> ablate_ratios;
};

// Parses and validates a run config. Errors are ConfigError with the
// dotted path of the offending field ("seed", "train.learning_rate", ...).
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

std::string run_config_to_json(const RunConfig& cfg);

}  // namespace cpe
