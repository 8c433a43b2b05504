#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cpe/optim.hpp"
#include "cpe/policy.hpp"
#include "cpe/rng.hpp"
#include "cpe/rollout.hpp"
#include "cpe/toy_env.hpp"
#include "cpe/types.hpp"

namespace cpe::test {

// Small environment for gradient and distribution tests: 2 topics, 3 traits,
// 4 slots, 8 segments covering every kind.
inline ToyEnv small_env() {
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

// n identical filler segments, one slot vocabulary of the given size.
inline ToyEnv uniform_env(int vocab_size, int num_slots) {
  std::vector<SegmentInfo> vocab;
  for (int i = 0; i < vocab_size; ++i) {
    vocab.push_back({SegmentKind::Filler, -1, 10, "filler_" + std::to_string(i)});
  }
  return ToyEnv(1, 1, num_slots, std::move(vocab));
}

inline Query toy_query(int topic = 0, const std::string& id = "q0") {
  Query q;
  q.id = id;
  q.text = "toy question";
  q.topic_id = topic;
  return q;
}

// Persona whose traits are catalog entries [0, n) with the given relevant
// positions (which equal catalog indices here).
inline Persona toy_persona(const ToyEnv& env, int n_traits,
                           std::vector<int> relevant) {
  Persona p;
  p.id = "p0";
  for (int i = 0; i < n_traits; ++i) p.traits.emplace_back(env.trait_key(i), "v");
  p.relevant_trait_ids = std::move(relevant);
  return p;
}

inline PolicyParams random_params(const ToyEnv& env, Rng& rng, double scale = 0.5) {
  PolicyParams p = PolicyParams::zeros(env);
  for (double& w : p.weights) w = scale * (2.0 * rng.next_double() - 1.0);
  return p;
}

// Random mixed batch of train samples with exact behavior log-probs drawn
// from a perturbed behavior policy, so ratios spread around 1.
inline std::pair<std::vector<TrainSample>, std::vector<double>> random_batch(
    const ToyEnv& env, const PolicyParams& params, Rng& rng, int n_samples,
    double edited_fraction = 0.4) {
  PolicyParams behavior = params;
  for (double& w : behavior.weights) w += 0.05 * (2.0 * rng.next_double() - 1.0);

  std::vector<TrainSample> samples;
  std::vector<double> advantages;
  for (int i = 0; i < n_samples; ++i) {
    ContextFeatures ctx;
    ctx.topic_id = static_cast<int>(rng.next_below(env.num_topics()));
    ctx.relevant_trait_mask =
        static_cast<std::uint32_t>(rng.next_below(1u << env.num_traits()));
    TrainSample s;
    s.edited = rng.next_double() < edited_fraction;
    if (s.edited) {
      ctx.flags = static_cast<FlagMask>(rng.next_below(1u << kNumCritiqueFlags));
      ctx.edit_mode = true;
    }
    s.ctx = ctx;
    double blp = 0.0;
    s.segments = sample_sequence(behavior, env, ctx, rng, &blp);
    s.behavior_logprob = blp;
    s.reward = 2.0 * rng.next_double() - 1.0;
    s.group = i / 4;
    samples.push_back(std::move(s));
    advantages.push_back(2.0 * rng.next_double() - 1.0);
  }
  return {std::move(samples), std::move(advantages)};
}

// Independent reference: the plain clipped surrogate over a batch, written
// as a direct transcription of the formula. Shares only the log-probability
// primitive with the implementation under test.
inline double vanilla_clip_loss(std::span<const TrainSample> samples,
                                const PolicyParams& params, const ToyEnv& env,
                                double epsilon, std::span<const double> advantages) {
  double sum = 0.0;
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double lp = policy_logprob(params, env, samples[i].ctx, samples[i].segments);
    const double r = std::exp(lp - samples[i].behavior_logprob);
    const double a = advantages[i];
    const double clipped = std::clamp(r, 1.0 - epsilon, 1.0 + epsilon);
    sum += -std::min(r * a, clipped * a);
  }
  return sum * inv_n;
}

}  // namespace cpe::test
