#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpe/rng.hpp"
#include "cpe/toy_env.hpp"

namespace cpe {

// Linear-softmax policy over the segment vocabulary. One weight matrix of
// shape (feature_dim x vocab_size); slot logits are sums of the rows of the
// active features, so log-probabilities and gradients are exact.
struct PolicyParams {
  int feature_dim = 0;
  int vocab_size = 0;
  std::vector<double> weights;  // row-major [feature_dim][vocab_size]

  double& at(int feature, int segment) {
    return weights[static_cast<std::size_t>(feature) * vocab_size + segment];
  }
  double at(int feature, int segment) const {
    return weights[static_cast<std::size_t>(feature) * vocab_size + segment];
  }

  static PolicyParams zeros(const ToyEnv& env);

  // Zero weights plus a positive logit on every Empty segment at every slot
  // position, standing in for an instruction-tuned starting point that
  // prefers answers near the recommended length. The default puts ~39% of
  // slot mass on Empty in the default environment (~400-token answers).
  static PolicyParams short_answer_init(const ToyEnv& env,
                                        double empty_logit = 2.44);
};

// Log-softmax over segments for one slot; `out` must hold vocab_size values.
void slot_log_probs(const PolicyParams& params, const ToyEnv& env,
                    const ContextFeatures& ctx, int slot, std::vector<double>& out);

// Sum over slots of log softmax(weights . features)[segment]. Throws
// IndexError for out-of-range segment indices; a sequence shorter or longer
// than num_slots is also an IndexError.
double policy_logprob(const PolicyParams& params, const ToyEnv& env,
                      const ContextFeatures& ctx, const std::vector<int>& segments);

// Draws one full sequence; the returned log-probability is accumulated from
// exactly the same slot log-softmax values that policy_logprob would
// recompute, so recomputation matches bit for bit.
std::vector<int> sample_sequence(const PolicyParams& params, const ToyEnv& env,
                                 const ContextFeatures& ctx, Rng& rng,
                                 double* logprob_out = nullptr);

// Adds coeff * d(log pi(segments | ctx))/d(weights) into grad (flat,
// row-major like PolicyParams::weights).
void accumulate_logprob_grad(const PolicyParams& params, const ToyEnv& env,
                             const ContextFeatures& ctx,
                             const std::vector<int>& segments, double coeff,
                             std::vector<double>& grad);

// Exact KL(pi_params || pi_ref) for one context, summed over slots, plus
// optionally its gradient w.r.t. params scaled by coeff.
double sequence_kl(const PolicyParams& params, const PolicyParams& ref,
                   const ToyEnv& env, const ContextFeatures& ctx,
                   double grad_coeff = 0.0, std::vector<double>* grad = nullptr);

// Flat binary checkpoint with a one-line JSON header.
void save_checkpoint(const std::string& path, const PolicyParams& params,
                     std::uint64_t seed, int round);
PolicyParams load_checkpoint(const std::string& path, std::uint64_t* seed_out = nullptr,
                             int* round_out = nullptr);

}  // namespace cpe
