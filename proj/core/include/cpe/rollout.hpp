#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cpe/policy.hpp"
#include "cpe/reward.hpp"
#include "cpe/toy_env.hpp"
#include "cpe/types.hpp"

namespace cpe {

struct RolloutConfig {
  int k = 4;            // rollouts per query
  int edit_rounds = 1;  // edited children per original
  double temperature = 1.0;  // free-text backends only
  std::uint64_t seed = 0;
};

void validate(const RolloutConfig& cfg);

// Conditioning for one edit pass. Toy mode fills `features` (critique flags
// folded in, edit bit set); free-text mode fills `prompt`.
struct EditContext {
  ContextFeatures features;
  std::string prompt;
};

// Produces a critique for a sample; null when critiquing is disabled.
using CritiqueFn =
    std::function<Critique(const ResponseSample&, const Persona&, const Query&)>;
// Scalar reward for runs without a critique model.
using RewardFn =
    std::function<double(const ResponseSample&, const Persona&, const Query&)>;

// Reward/critique backend for a round. Exactly one of the two paths is used:
// with `critique` set, rewards are the weighted final score of each sample's
// critique scores; otherwise `scalar_reward` is applied and no critiques or
// edits are produced. `diagnostic_reward`, when set, is logged per round but
// never trains anything (used to watch true quality under a gamed reward).
struct RoundBackend {
  CritiqueFn critique;
  RewardFn scalar_reward;
  RewardFn diagnostic_reward;
  DimWeights weights;
};

RoundBackend grm_backend(const ToyEnv& env, const GrmRuleConfig& rules,
                         const DimWeights& weights);
RoundBackend hackable_backend(const ToyEnv& env);

// k original samples for one (query, persona). Sample i draws from the
// stream hash(seed, query id, i); behavior_logprob records the generating
// policy's log-probability.
std::vector<ResponseSample> generate_rollouts(const PolicyParams& policy,
                                              const ToyEnv& env, const Query& query,
                                              const Persona& persona,
                                              const RolloutConfig& cfg);

// Folds a critique into the conditioning used to regenerate a response.
EditContext build_edit_prompt(const ToyEnv& env, const Query& query,
                              const Persona& persona, const ResponseSample& response,
                              const Critique& critique);

// Free-text edit prompt (query, persona, original response and feedback in a
// fixed template). The template ships as assets/edit_prompt_v1.txt.
std::string render_edit_prompt(const Query& query, const Persona& persona,
                               const std::string& response_text,
                               const std::string& feedback_text);
const std::string& edit_prompt_template();

// Regenerates under the edit context; the result's behavior_logprob is the
// editing policy's log-probability, frozen here.
ResponseSample post_edit(const PolicyParams& policy, const ToyEnv& env,
                         const EditContext& ctx, const ResponseSample& parent,
                         int parent_index, Rng& rng);

// One full round over a batch: generate, critique, edit, reward. Groups come
// back in batch order with every original critiqued and rewarded and
// `edit_rounds` children per original. Failures abort the round; the thrown
// error names the failing (query, rollout) position.
std::vector<RolloutGroup> run_round(
    const PolicyParams& policy, const ToyEnv& env, const RoundBackend& backend,
    std::span<const std::pair<Query, Persona>> batch, const RolloutConfig& cfg);

}  // namespace cpe
