#include "cpe/config.hpp"

#include <nlohmann/json.hpp>

#include "cpe/errors.hpp"
#include "cpe/svg.hpp"

namespace cpe {

using nlohmann::json;

const char* to_string(RunMode m) { return m == RunMode::Toy ? "toy" : "llm"; }

const char* to_string(RewardBackendKind k) {
  return k == RewardBackendKind::GrmRules ? "grm_rules" : "hackable";
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& detail) {
  throw ConfigError(path, detail);
}

const json* find(const json& j, const std::string& key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

template <typename T>
T require(const json& j, const std::string& path, const std::string& key) {
  const json* v = find(j, key);
  if (!v) fail(path.empty() ? key : path + "." + key, "missing required field");
  try {
    return v->get<T>();
  } catch (const std::exception& e) {
    fail(path.empty() ? key : path + "." + key, e.what());
  }
}

template <typename T>
void maybe(const json& j, const std::string& path, const std::string& key, T& out) {
  const json* v = find(j, key);
  if (!v) return;
  try {
    out = v->get<T>();
  } catch (const std::exception& e) {
    fail(path.empty() ? key : path + "." + key, e.what());
  }
}

void parse_env(const json& j, ToyEnvConfig& env) {
  maybe(j, "env", "num_topics", env.num_topics);
  maybe(j, "env", "on_topic_per_topic", env.on_topic_per_topic);
  maybe(j, "env", "num_traits", env.num_traits);
  maybe(j, "env", "num_slots", env.num_slots);
  maybe(j, "env", "num_fillers", env.num_fillers);
  maybe(j, "env", "on_topic_tokens", env.on_topic_tokens);
  maybe(j, "env", "mention_tokens", env.mention_tokens);
  maybe(j, "env", "self_summary_tokens", env.self_summary_tokens);
  maybe(j, "env", "boilerplate_tokens", env.boilerplate_tokens);
  maybe(j, "env", "name_drop_tokens", env.name_drop_tokens);
  maybe(j, "env", "filler_tokens", env.filler_tokens);
  maybe(j, "env", "min_persona_traits", env.min_persona_traits);
  maybe(j, "env", "max_persona_traits", env.max_persona_traits);
  maybe(j, "env", "min_relevant_traits", env.min_relevant_traits);
  maybe(j, "env", "max_relevant_traits", env.max_relevant_traits);
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError("(root)", std::string("invalid JSON: ") + e.what());
  }

  RunConfig cfg;
  std::string mode = "toy";
  maybe(j, "", "mode", mode);
  if (mode == "toy") {
    cfg.mode = RunMode::Toy;
  } else if (mode == "llm") {
    cfg.mode = RunMode::Llm;
  } else {
    fail("mode", "expected \"toy\" or \"llm\"");
  }

  cfg.seed = require<std::uint64_t>(j, "", "seed");
  maybe(j, "", "output_dir", cfg.output_dir);

  if (const json* env = find(j, "env")) parse_env(*env, cfg.env);

  if (const json* r = find(j, "rollout")) {
    maybe(*r, "rollout", "k", cfg.rollout.k);
    maybe(*r, "rollout", "edit_rounds", cfg.rollout.edit_rounds);
    maybe(*r, "rollout", "temperature", cfg.rollout.temperature);
  }
  validate(cfg.rollout);

  if (const json* s = find(j, "sampling")) {
    std::string strategy = to_string(cfg.sampling.strategy);
    maybe(*s, "sampling", "strategy", strategy);
    try {
      cfg.sampling.strategy = sampling_strategy_from_string(strategy);
    } catch (const KeyError& e) {
      fail("sampling.strategy", e.what());
    }
    maybe(*s, "sampling", "edit_ratio", cfg.sampling.edit_ratio);
  }
  validate(cfg.sampling);

  if (const json* c = find(j, "clip")) {
    maybe(*c, "clip", "epsilon", cfg.clip.epsilon);
    maybe(*c, "clip", "epsilon_low", cfg.clip.epsilon_low);
    maybe(*c, "clip", "epsilon_high", cfg.clip.epsilon_high);
  }
  validate(cfg.clip);

  if (const json* t = find(j, "train")) {
    maybe(*t, "train", "learning_rate", cfg.train.learning_rate);
    maybe(*t, "train", "batch_size", cfg.train.batch_size);
    maybe(*t, "train", "mini_batch_size", cfg.train.mini_batch_size);
    maybe(*t, "train", "epochs", cfg.train.epochs);
    maybe(*t, "train", "rounds", cfg.train.rounds);
    std::string baseline = to_string(cfg.train.baseline);
    maybe(*t, "train", "baseline", baseline);
    try {
      cfg.train.baseline = baseline_kind_from_string(baseline);
    } catch (const KeyError& e) {
      fail("train.baseline", e.what());
    }
    maybe(*t, "train", "kl_coef", cfg.train.kl_coef);
    maybe(*t, "train", "stratify_minibatches", cfg.train.stratify_minibatches);
  }
  validate(cfg.train);

  if (const json* w = find(j, "weights")) {
    maybe(*w, "weights", "helpfulness", cfg.weights.helpfulness);
    maybe(*w, "weights", "personalization", cfg.weights.personalization);
    maybe(*w, "weights", "naturalness", cfg.weights.naturalness);
  }
  try {
    validate(cfg.weights);
  } catch (const ConfigError&) {
    fail("weights", "must be non-negative and sum to 1");
  }

  if (const json* g = find(j, "grm_rules")) {
    maybe(*g, "grm_rules", "recommended_length_tokens",
          cfg.grm_rules.recommended_length_tokens);
    maybe(*g, "grm_rules", "per_100_token_deduction",
          cfg.grm_rules.per_100_token_deduction);
    maybe(*g, "grm_rules", "name_drop_penalty", cfg.grm_rules.name_drop_penalty);
    maybe(*g, "grm_rules", "irrelevant_trait_penalty",
          cfg.grm_rules.irrelevant_trait_penalty);
    maybe(*g, "grm_rules", "self_summary_penalty", cfg.grm_rules.self_summary_penalty);
    maybe(*g, "grm_rules", "boilerplate_penalty", cfg.grm_rules.boilerplate_penalty);
    maybe(*g, "grm_rules", "on_topic_bonus_cap", cfg.grm_rules.on_topic_bonus_cap);
    maybe(*g, "grm_rules", "relevant_trait_bonus", cfg.grm_rules.relevant_trait_bonus);
  }
  try {
    validate(cfg.grm_rules);
  } catch (const ConfigError&) {
    fail("grm_rules", "penalties and bonuses must be >= 0");
  }

  std::string backend = to_string(cfg.reward_backend);
  maybe(j, "", "reward_backend", backend);
  if (backend == "grm_rules") {
    cfg.reward_backend = RewardBackendKind::GrmRules;
  } else if (backend == "hackable") {
    cfg.reward_backend = RewardBackendKind::Hackable;
  } else {
    fail("reward_backend", "expected \"grm_rules\" or \"hackable\"");
  }

  if (const json* e = find(j, "endpoint")) {
    EndpointConfig ep;
    ep.base_url = require<std::string>(*e, "endpoint", "base_url");
    ep.model_name = require<std::string>(*e, "endpoint", "model_name");
    maybe(*e, "endpoint", "api_key_env_var", ep.api_key_env_var);
    maybe(*e, "endpoint", "temperature", ep.temperature);
    maybe(*e, "endpoint", "max_tokens", ep.max_tokens);
    maybe(*e, "endpoint", "timeout_ms", ep.timeout_ms);
    maybe(*e, "endpoint", "max_retries", ep.max_retries);
    maybe(*e, "endpoint", "backoff_base_ms", ep.backoff_base_ms);
    try {
      validate(ep);
    } catch (const ConfigError&) {
      fail("endpoint", "invalid endpoint configuration");
    }
    cfg.endpoint = std::move(ep);
  }
  if (cfg.mode == RunMode::Llm && !cfg.endpoint)
    fail("endpoint", "required in llm mode");

  if (const json* a = find(j, "ablate")) {
    cfg.ablate_specified = true;
    std::vector<std::string> strategies;
    maybe(*a, "ablate", "strategies", strategies);
    for (const auto& s : strategies) {
      try {
        cfg.ablate_strategies.push_back(sampling_strategy_from_string(s));
      } catch (const KeyError& e) {
        fail("ablate.strategies", e.what());
      }
    }
    maybe(*a, "ablate", "edit_ratios", cfg.ablate_ratios);
    for (double r : cfg.ablate_ratios) {
      if (!(r >= 0.0 && r <= 1.0)) fail("ablate.edit_ratios", "ratios must be in [0, 1]");
    }
  }

  if (find(j, "env")) {
    // Construct once so invalid environment combinations surface as a
    // config error with the right field prefix.
    try {
      ToyEnv probe(cfg.env);
      (void)probe;
    } catch (const ConfigError& e) {
      fail("env", e.what());
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_file(path));
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["schema_version"] = 1;
  j["mode"] = to_string(cfg.mode);
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["env"] = {{"num_topics", cfg.env.num_topics},
              {"on_topic_per_topic", cfg.env.on_topic_per_topic},
              {"num_traits", cfg.env.num_traits},
              {"num_slots", cfg.env.num_slots},
              {"num_fillers", cfg.env.num_fillers}};
  j["rollout"] = {{"k", cfg.rollout.k},
                  {"edit_rounds", cfg.rollout.edit_rounds},
                  {"temperature", cfg.rollout.temperature}};
  j["sampling"] = {{"strategy", to_string(cfg.sampling.strategy)},
                   {"edit_ratio", cfg.sampling.edit_ratio}};
  j["clip"] = {{"epsilon", cfg.clip.epsilon},
               {"epsilon_low", cfg.clip.epsilon_low},
               {"epsilon_high", cfg.clip.epsilon_high}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"batch_size", cfg.train.batch_size},
                {"mini_batch_size", cfg.train.mini_batch_size},
                {"epochs", cfg.train.epochs},
                {"rounds", cfg.train.rounds},
                {"baseline", to_string(cfg.train.baseline)},
                {"kl_coef", cfg.train.kl_coef},
                {"stratify_minibatches", cfg.train.stratify_minibatches}};
  j["weights"] = {{"helpfulness", cfg.weights.helpfulness},
                  {"personalization", cfg.weights.personalization},
                  {"naturalness", cfg.weights.naturalness}};
  j["grm_rules"] = {
      {"recommended_length_tokens", cfg.grm_rules.recommended_length_tokens},
      {"per_100_token_deduction", cfg.grm_rules.per_100_token_deduction},
      {"name_drop_penalty", cfg.grm_rules.name_drop_penalty},
      {"irrelevant_trait_penalty", cfg.grm_rules.irrelevant_trait_penalty},
      {"self_summary_penalty", cfg.grm_rules.self_summary_penalty},
      {"boilerplate_penalty", cfg.grm_rules.boilerplate_penalty},
      {"on_topic_bonus_cap", cfg.grm_rules.on_topic_bonus_cap},
      {"relevant_trait_bonus", cfg.grm_rules.relevant_trait_bonus}};
  j["reward_backend"] = to_string(cfg.reward_backend);
  if (cfg.endpoint) {
    // Note: the API key itself never appears here, only the variable name.
    j["endpoint"] = {{"base_url", cfg.endpoint->base_url},
                     {"model_name", cfg.endpoint->model_name},
                     {"api_key_env_var", cfg.endpoint->api_key_env_var},
                     {"temperature", cfg.endpoint->temperature},
                     {"max_tokens", cfg.endpoint->max_tokens},
                     {"timeout_ms", cfg.endpoint->timeout_ms},
                     {"max_retries", cfg.endpoint->max_retries},
                     {"backoff_base_ms", cfg.endpoint->backoff_base_ms}};
  }
  return j.dump(2);
}

}  // namespace cpe
