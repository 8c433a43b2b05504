#pragma once

#include <string>

#include "cpe/types.hpp"

namespace cpe {

class ToyEnv;

// Aggregation weights for the three critique dimensions. Must be
// non-negative and sum to 1.
struct DimWeights {
  double helpfulness = 0.35;
  double personalization = 0.40;
  double naturalness = 0.25;
};

// Throws ConfigError when a weight is negative or the sum is off by more
// than 1e-12.
void validate(const DimWeights& w);

// S_final: weighted sum of the three dimension scores.
double aggregate_final_score(const DimScores& scores, const DimWeights& weights);

// Knobs of the rule-based critique model. Bonuses and penalties are all
// non-negative magnitudes; signs are applied by the rules.
struct GrmRuleConfig {
  int recommended_length_tokens = 400;
  double per_100_token_deduction = 1.0;
  double name_drop_penalty = 1.0;        // naturalness and personalization
  double irrelevant_trait_penalty = 2.0; // personalization
  double self_summary_penalty = 2.0;     // naturalness
  double boilerplate_penalty = 1.0;      // naturalness
  double on_topic_bonus_cap = 4.0;       // helpfulness
  double relevant_trait_bonus = 1.5;     // personalization, per distinct trait
};

void validate(const GrmRuleConfig& cfg);

// Renders the evaluator prompt with the persona, question and answer slots
// substituted. The template ships as assets/grm_prompt_v1.txt; this function
// uses the embedded copy of the same bytes.
std::string render_grm_prompt(const Persona& persona, const Query& query,
                              const std::string& response_text);

// The unfilled prompt template (embedded copy of assets/grm_prompt_v1.txt).
const std::string& grm_prompt_template();

// Multi-line persona rendering used inside the prompt ("- key: value").
std::string persona_profile_text(const Persona& persona);

// Parses a critique-model reply: free-text feedback between <critique> tags
// and three "<dimension>: X points" lines between <scores> tags. Tag matching
// is case-insensitive and whitespace-tolerant. Throws ProtocolError.
Critique parse_grm_output(const std::string& text);

// Formats a critique in the wire format accepted by parse_grm_output.
// parse_grm_output(format_grm_output(c)) reproduces c's scores exactly.
std::string format_grm_output(const Critique& critique);

// Reminder message sent once when a critique reply failed to parse.
const std::string& grm_format_reminder();

// Deterministic rule-based critique for toy-mode samples. Scores are clamped
// to [-5, 5]; flags record every rule that fired plus the two advisory flags
// (MissingTrait, OffTopic) that mark missed bonuses. Throws
// UnsupportedModeError for free-text samples.
Critique simulated_grm(const ToyEnv& env, const ResponseSample& sample,
                       const Persona& persona, const Query& query,
                       const GrmRuleConfig& cfg);

// Scalar baseline reward with a built-in shortcut: persona mentions and
// self-summaries raise it unconditionally and there is no length penalty.
// Exists to demonstrate reward hacking; never use it as a quality signal.
double hackable_scalar_reward(const ToyEnv& env, const ResponseSample& sample,
                              const Persona& persona, const Query& query);

}  // namespace cpe
