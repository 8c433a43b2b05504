#include "cpe/rollout.hpp"

#include <utility>

#include "cpe/errors.hpp"

namespace cpe {

namespace {

// Embedded copy of assets/edit_prompt_v1.txt; kept byte-identical by a test.
constexpr const char* kEditPromptTemplate =
    R"(Revise the answer below using the reviewer feedback. Keep what already works, fix what the feedback calls out, and stay close to the recommended length.

User profile:
{persona}

Question:
{question}

Previous answer:
{response}

Reviewer feedback:
{feedback}

Write the revised answer only.
)";

std::string substitute_once(std::string text, const std::string& slot,
                            const std::string& payload) {
  std::size_t pos = text.find(slot);
  if (pos == std::string::npos)
    throw Error("edit prompt template is missing slot " + slot);
  return text.replace(pos, slot.size(), payload);
}

double reward_of(const RoundBackend& backend, const Critique& critique) {
  return aggregate_final_score(critique.scores, backend.weights);
}

}  // namespace

void validate(const RolloutConfig& cfg) {
  if (cfg.k < 1) throw ConfigError("rollout.k", "must be >= 1");
  if (cfg.edit_rounds < 0) throw ConfigError("rollout.edit_rounds", "must be >= 0");
  if (cfg.temperature < 0.0) throw ConfigError("rollout.temperature", "must be >= 0");
}

RoundBackend grm_backend(const ToyEnv& env, const GrmRuleConfig& rules,
                         const DimWeights& weights) {
  validate(rules);
  validate(weights);
  RoundBackend b;
  b.weights = weights;
  b.critique = [&env, rules](const ResponseSample& s, const Persona& p,
                             const Query& q) { return simulated_grm(env, s, p, q, rules); };
  return b;
}

RoundBackend hackable_backend(const ToyEnv& env) {
  RoundBackend b;
  b.scalar_reward = [&env](const ResponseSample& s, const Persona& p, const Query& q) {
    return hackable_scalar_reward(env, s, p, q);
  };
  return b;
}

std::vector<ResponseSample> generate_rollouts(const PolicyParams& policy,
                                              const ToyEnv& env, const Query& query,
                                              const Persona& persona,
                                              const RolloutConfig& cfg) {
  validate(cfg);
  const ContextFeatures ctx = env.context(query, persona);
  std::vector<ResponseSample> out;
  out.reserve(cfg.k);
  for (int i = 0; i < cfg.k; ++i) {
    Rng rng = derive_stream(cfg.seed, "rollout", hash_str(query.id), i);
    ResponseSample s;
    s.query_id = query.id;
    double logprob = 0.0;
    s.segments = sample_sequence(policy, env, ctx, rng, &logprob);
    s.behavior_logprob = logprob;
    s.token_length = env.token_length(*s.segments);
    s.origin = Origin::Original;
    out.push_back(std::move(s));
  }
  return out;
}

EditContext build_edit_prompt(const ToyEnv& env, const Query& query,
                              const Persona& persona, const ResponseSample& response,
                              const Critique& critique) {
  EditContext ctx;
  ctx.features = env.edit_context(query, persona, critique.flags);
  if (!response.toy_mode()) {
    ctx.prompt = render_edit_prompt(query, persona, response.text,
                                    critique.feedback_text);
  }
  return ctx;
}

std::string render_edit_prompt(const Query& query, const Persona& persona,
                               const std::string& response_text,
                               const std::string& feedback_text) {
  std::string out = edit_prompt_template();
  out = substitute_once(std::move(out), "{persona}", persona_profile_text(persona));
  out = substitute_once(std::move(out), "{question}", query.text);
  out = substitute_once(std::move(out), "{response}", response_text);
  out = substitute_once(std::move(out), "{feedback}", feedback_text);
  return out;
}

const std::string& edit_prompt_template() {
  static const std::string tpl = kEditPromptTemplate;
  return tpl;
}

ResponseSample post_edit(const PolicyParams& policy, const ToyEnv& env,
                         const EditContext& ctx, const ResponseSample& parent,
                         int parent_index, Rng& rng) {
  if (parent.origin != Origin::Original)
    throw StateError("post_edit parent must be an original sample");
  ResponseSample s;
  s.query_id = parent.query_id;
  double logprob = 0.0;
  s.segments = sample_sequence(policy, env, ctx.features, rng, &logprob);
  s.behavior_logprob = logprob;  // log pi_e, frozen at edit time
  s.token_length = env.token_length(*s.segments);
  s.origin = Origin::Edited;
  s.parent_index = parent_index;
  return s;
}

std::vector<RolloutGroup> run_round(
    const PolicyParams& policy, const ToyEnv& env, const RoundBackend& backend,
    std::span<const std::pair<Query, Persona>> batch, const RolloutConfig& cfg) {
  validate(cfg);
  if (batch.empty()) throw StateError("run_round needs a non-empty batch");
  if (!backend.critique && !backend.scalar_reward)
    throw ConfigError("backend", "needs a critique model or a scalar reward");

  std::vector<RolloutGroup> groups;
  groups.reserve(batch.size());
  for (const auto& [query, persona] : batch) {
    RolloutGroup g;
    g.query = query;
    g.persona = persona;
    g.originals = generate_rollouts(policy, env, query, persona, cfg);

    for (int i = 0; i < cfg.k; ++i) {
      try {
        ResponseSample& original = g.originals[i];
        if (backend.critique) {
          Critique critique = backend.critique(original, persona, query);
          original.reward = reward_of(backend, critique);
          for (int r = 0; r < cfg.edit_rounds; ++r) {
            EditContext ctx = build_edit_prompt(env, query, persona, original, critique);
            Rng rng = derive_stream(cfg.seed, "edit", hash_str(query.id),
                                    hash_combine(i, r));
            ResponseSample child = post_edit(policy, env, ctx, original, i, rng);
            child.reward =
                reward_of(backend, backend.critique(child, persona, query));
            g.edited.push_back(std::move(child));
          }
          g.critiques.push_back(std::move(critique));
        } else {
          original.reward = backend.scalar_reward(original, persona, query);
        }
      } catch (const std::exception& e) {
        throw StateError("round failed at query=" + query.id + " rollout=" +
                         std::to_string(i) + ": " + e.what());
      }
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace cpe
