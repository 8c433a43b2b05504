#include "cpe/policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "cpe/errors.hpp"

namespace cpe {

namespace {

thread_local std::vector<int> t_active;
thread_local std::vector<double> t_logits;
thread_local std::vector<double> t_logp;
thread_local std::vector<double> t_logp_ref;

void check_shape(const PolicyParams& params, const ToyEnv& env) {
  if (params.feature_dim != env.feature_dim() || params.vocab_size != env.vocab_size())
    throw ConfigError("policy", "parameter shape does not match the environment");
}

void slot_logits(const PolicyParams& params, const ToyEnv& env,
                 const ContextFeatures& ctx, int slot, std::vector<double>& out) {
  env.active_features(ctx, slot, t_active);
  out.assign(params.vocab_size, 0.0);
  for (int row : t_active) {
    const double* w = params.weights.data() +
                      static_cast<std::size_t>(row) * params.vocab_size;
    for (int v = 0; v < params.vocab_size; ++v) out[v] += w[v];
  }
}

// In-place logits -> log softmax.
void log_softmax(std::vector<double>& x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v);
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  for (double& v : x) v -= lse;
}

}  // namespace

PolicyParams PolicyParams::zeros(const ToyEnv& env) {
  PolicyParams p;
  p.feature_dim = env.feature_dim();
  p.vocab_size = env.vocab_size();
  p.weights.assign(static_cast<std::size_t>(p.feature_dim) * p.vocab_size, 0.0);
  return p;
}

PolicyParams PolicyParams::short_answer_init(const ToyEnv& env, double empty_logit) {
  PolicyParams p = zeros(env);
  for (int v = 0; v < env.vocab_size(); ++v) {
    if (env.segment(v).kind != SegmentKind::Empty) continue;
    for (int slot = 0; slot < env.num_slots(); ++slot) {
      p.at(env.slot_offset() + slot, v) = empty_logit;
    }
  }
  return p;
}

void slot_log_probs(const PolicyParams& params, const ToyEnv& env,
                    const ContextFeatures& ctx, int slot, std::vector<double>& out) {
  check_shape(params, env);
  slot_logits(params, env, ctx, slot, out);
  log_softmax(out);
}

double policy_logprob(const PolicyParams& params, const ToyEnv& env,
                      const ContextFeatures& ctx, const std::vector<int>& segments) {
  check_shape(params, env);
  if (static_cast<int>(segments.size()) != env.num_slots())
    throw IndexError("sequence length " + std::to_string(segments.size()) +
                     " does not match " + std::to_string(env.num_slots()) + " slots");
  double total = 0.0;
  for (int slot = 0; slot < env.num_slots(); ++slot) {
    const int chosen = segments[slot];
    if (chosen < 0 || chosen >= params.vocab_size)
      throw IndexError("segment index " + std::to_string(chosen) + " out of range");
    slot_log_probs(params, env, ctx, slot, t_logp);
    total += t_logp[chosen];
  }
  return total;
}

std::vector<int> sample_sequence(const PolicyParams& params, const ToyEnv& env,
                                 const ContextFeatures& ctx, Rng& rng,
                                 double* logprob_out) {
  check_shape(params, env);
  std::vector<int> segments(env.num_slots(), 0);
  double total = 0.0;
  for (int slot = 0; slot < env.num_slots(); ++slot) {
    slot_log_probs(params, env, ctx, slot, t_logp);
    const double u = rng.next_double();
    double cum = 0.0;
    int chosen = params.vocab_size - 1;
    for (int v = 0; v < params.vocab_size; ++v) {
      cum += std::exp(t_logp[v]);
      if (u < cum) {
        chosen = v;
        break;
      }
    }
    segments[slot] = chosen;
    total += t_logp[chosen];
  }
  if (logprob_out) *logprob_out = total;
  return segments;
}

void accumulate_logprob_grad(const PolicyParams& params, const ToyEnv& env,
                             const ContextFeatures& ctx,
                             const std::vector<int>& segments, double coeff,
                             std::vector<double>& grad) {
  check_shape(params, env);
  if (grad.size() != params.weights.size())
    throw IndexError("gradient buffer has the wrong size");
  const int V = params.vocab_size;
  for (int slot = 0; slot < env.num_slots(); ++slot) {
    const int chosen = segments[slot];
    if (chosen < 0 || chosen >= V)
      throw IndexError("segment index " + std::to_string(chosen) + " out of range");
    slot_log_probs(params, env, ctx, slot, t_logp);
    env.active_features(ctx, slot, t_active);
    for (int row : t_active) {
      double* g = grad.data() + static_cast<std::size_t>(row) * V;
      for (int v = 0; v < V; ++v) g[v] -= coeff * std::exp(t_logp[v]);
      g[chosen] += coeff;
    }
  }
}

double sequence_kl(const PolicyParams& params, const PolicyParams& ref,
                   const ToyEnv& env, const ContextFeatures& ctx,
                   double grad_coeff, std::vector<double>* grad) {
  check_shape(params, env);
  check_shape(ref, env);
  const int V = params.vocab_size;
  double total = 0.0;
  for (int slot = 0; slot < env.num_slots(); ++slot) {
    slot_log_probs(params, env, ctx, slot, t_logp);
    slot_log_probs(ref, env, ctx, slot, t_logp_ref);
    double kl = 0.0;
    for (int v = 0; v < V; ++v) {
      kl += std::exp(t_logp[v]) * (t_logp[v] - t_logp_ref[v]);
    }
    total += kl;
    if (grad && grad_coeff != 0.0) {
      // d(KL)/d(logit_v) = p_v * (log p_v - log q_v - KL)
      env.active_features(ctx, slot, t_active);
      for (int row : t_active) {
        double* g = grad->data() + static_cast<std::size_t>(row) * V;
        for (int v = 0; v < V; ++v) {
          g[v] += grad_coeff * std::exp(t_logp[v]) * (t_logp[v] - t_logp_ref[v] - kl);
        }
      }
    }
  }
  return total;
}

void save_checkpoint(const std::string& path, const PolicyParams& params,
                     std::uint64_t seed, int round) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path);
  std::ostringstream header;
  header << "{\"schema_version\":1,\"feature_dim\":" << params.feature_dim
         << ",\"vocab_size\":" << params.vocab_size << ",\"seed\":" << seed
         << ",\"round\":" << round << "}\n";
  out << header.str();
  out.write(reinterpret_cast<const char*>(params.weights.data()),
            static_cast<std::streamsize>(params.weights.size() * sizeof(double)));
}

PolicyParams load_checkpoint(const std::string& path, std::uint64_t* seed_out,
                             int* round_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("checkpoint not found: " + path);
  std::string header;
  if (!std::getline(in, header)) throw ParseError(1, "missing checkpoint header");

  auto field = [&header](const std::string& name) -> std::uint64_t {
    const std::string key = "\"" + name + "\":";
    std::size_t pos = header.find(key);
    if (pos == std::string::npos) throw ParseError(1, "header missing " + name);
    return std::stoull(header.substr(pos + key.size()));
  };

  PolicyParams p;
  p.feature_dim = static_cast<int>(field("feature_dim"));
  p.vocab_size = static_cast<int>(field("vocab_size"));
  if (p.feature_dim <= 0 || p.vocab_size <= 0)
    throw ParseError(1, "invalid checkpoint shape");
  if (seed_out) *seed_out = static_cast<std::uint64_t>(field("seed"));
  if (round_out) *round_out = static_cast<int>(field("round"));
  p.weights.resize(static_cast<std::size_t>(p.feature_dim) * p.vocab_size);
  in.read(reinterpret_cast<char*>(p.weights.data()),
          static_cast<std::streamsize>(p.weights.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(p.weights.size() * sizeof(double)))
    throw ParseError(2, "checkpoint payload truncated");
  return p;
}

}  // namespace cpe
