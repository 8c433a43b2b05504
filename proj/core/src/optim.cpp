#include "cpe/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "cpe/errors.hpp"
#include "cpe/svg.hpp"

namespace cpe {

void validate(const ClipConfig& cfg) {
  for (double e : {cfg.epsilon, cfg.epsilon_low, cfg.epsilon_high}) {
    if (!(e > 0.0 && e < 1.0))
      throw ConfigError("clip", "epsilons must lie in (0, 1)");
  }
}

const char* to_string(BaselineKind k) {
  return k == BaselineKind::GroupMean ? "group_mean" : "group_mean_std";
}

BaselineKind baseline_kind_from_string(const std::string& s) {
  if (s == "group_mean") return BaselineKind::GroupMean;
  if (s == "group_mean_std") return BaselineKind::GroupMeanStd;
  throw KeyError("unknown baseline kind: " + s);
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) && cfg.learning_rate != 0.0)
    throw ConfigError("train.learning_rate", "must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
  if (cfg.mini_batch_size < 1 || cfg.mini_batch_size > cfg.batch_size)
    throw ConfigError("train.mini_batch_size", "must be in [1, batch_size]");
  if (cfg.epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
  if (cfg.rounds < 1) throw ConfigError("train.rounds", "must be >= 1");
}

std::vector<TrainSample> flatten_selection(const std::vector<RolloutGroup>& groups,
                                           const Selection& selection,
                                           const ToyEnv& env) {
  std::vector<TrainSample> out;
  out.reserve(selection.items.size());
  for (const BatchItem& item : selection.items) {
    const RolloutGroup& g = groups.at(item.group);
    const ResponseSample& s = item.edited ? g.edited.at(item.index)
                                          : g.originals.at(item.index);
    if (!s.toy_mode())
      throw UnsupportedModeError("training requires toy-mode samples");
    if (!s.behavior_logprob) throw StateError("sample is missing behavior_logprob");
    if (!s.reward) throw StateError("sample is missing a reward");
    TrainSample t;
    if (item.edited) {
      if (g.critiques.empty())
        throw StateError("edited sample without critiques in its group");
      t.ctx = env.edit_context(g.query, g.persona,
                               g.critiques.at(s.parent_index).flags);
    } else {
      t.ctx = env.context(g.query, g.persona);
    }
    t.segments = *s.segments;
    t.behavior_logprob = *s.behavior_logprob;
    t.reward = *s.reward;
    t.edited = item.edited;
    t.group = item.group;
    out.push_back(std::move(t));
  }
  return out;
}

AdvantageEstimate compute_advantages(std::span<const TrainSample> samples,
                                     BaselineKind kind) {
  int max_group = -1;
  for (const auto& s : samples) max_group = std::max(max_group, s.group);
  std::vector<double> sum(max_group + 1, 0.0);
  std::vector<double> sum_sq(max_group + 1, 0.0);
  std::vector<int> count(max_group + 1, 0);
  for (const auto& s : samples) {
    sum[s.group] += s.reward;
    sum_sq[s.group] += s.reward * s.reward;
    ++count[s.group];
  }

  AdvantageEstimate est;
  est.baseline_kind = kind;
  est.values.reserve(samples.size());
  for (const auto& s : samples) {
    const double mean = sum[s.group] / count[s.group];
    double a = s.reward - mean;
    if (kind == BaselineKind::GroupMeanStd) {
      const double var = std::max(0.0, sum_sq[s.group] / count[s.group] - mean * mean);
      a /= std::sqrt(var) + 1e-8;
    }
    if (!std::isfinite(a)) throw NumericalError("non-finite advantage");
    est.values.push_back(a);
  }
  return est;
}

LossResult hybrid_loss(std::span<const TrainSample> samples,
                       const PolicyParams& params, const ToyEnv& env,
                       const ClipConfig& clip, std::span<const double> advantages,
                       double kl_coef, const PolicyParams* ref) {
  validate(clip);
  if (samples.size() != advantages.size())
    throw StateError("advantages are not aligned with the batch");
  if (samples.empty()) throw StateError("hybrid_loss needs a non-empty batch");
  if (kl_coef != 0.0 && ref == nullptr)
    throw ConfigError("train.kl_coef", "KL penalty needs a reference policy");

  LossResult result;
  result.grad.assign(params.weights.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  double loss_sum = 0.0;
  int n_on = 0, n_off = 0, clipped_on = 0, clipped_off = 0;

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const TrainSample& s = samples[i];
    const double adv = advantages[i];
    const double lp = policy_logprob(params, env, s.ctx, s.segments);
    if (!std::isfinite(lp) || !std::isfinite(s.behavior_logprob))
      throw NumericalError("non-finite log-probability in hybrid_loss");
    const double ratio = std::exp(lp - s.behavior_logprob);

    if (!s.edited) {
      ++n_on;
      const double lo = 1.0 - clip.epsilon, hi = 1.0 + clip.epsilon;
      const double unclipped = ratio * adv;
      const double clipped = std::clamp(ratio, lo, hi) * adv;
      loss_sum += -std::min(unclipped, clipped);
      // Gradient flows only while the unclipped branch is strictly the
      // active one; at the kink the subgradient is taken as zero.
      const bool active = (adv > 0.0 && ratio < hi) || (adv < 0.0 && ratio > lo);
      if (adv != 0.0 && !active) ++clipped_on;
      if (active) {
        accumulate_logprob_grad(params, env, s.ctx, s.segments,
                                -adv * ratio * inv_n, result.grad);
      }
    } else {
      ++n_off;
      const double lo = 1.0 - clip.epsilon_low, hi = 1.0 + clip.epsilon_high;
      loss_sum += -std::clamp(ratio, lo, hi) * adv;
      const bool inside = ratio > lo && ratio < hi;
      if (!inside) ++clipped_off;
      if (inside && adv != 0.0) {
        accumulate_logprob_grad(params, env, s.ctx, s.segments,
                                -adv * ratio * inv_n, result.grad);
      }
    }

    if (kl_coef != 0.0) {
      loss_sum += kl_coef * sequence_kl(params, *ref, env, s.ctx,
                                        kl_coef * inv_n, &result.grad);
    }
  }

  result.loss = loss_sum * inv_n;
  result.clip_frac_onpolicy = n_on > 0 ? static_cast<double>(clipped_on) / n_on : 0.0;
  result.clip_frac_offpolicy = n_off > 0 ? static_cast<double>(clipped_off) / n_off : 0.0;
  return result;
}

double finite_diff_check(const PolicyParams& params, const ToyEnv& env,
                         std::span<const TrainSample> samples,
                         const ClipConfig& clip, std::span<const double> advantages,
                         double step) {
  if (step <= 0.0) throw ConfigError("step", "must be > 0");
  if (samples.size() != advantages.size())
    throw StateError("advantages are not aligned with the batch");

  // Drop samples whose ratio sits within 10*step of a clip boundary; the
  // loss has a kink there and central differences straddle it.
  std::vector<TrainSample> kept;
  std::vector<double> kept_adv;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const TrainSample& s = samples[i];
    const double ratio =
        std::exp(policy_logprob(params, env, s.ctx, s.segments) - s.behavior_logprob);
    const double lo = s.edited ? 1.0 - clip.epsilon_low : 1.0 - clip.epsilon;
    const double hi = s.edited ? 1.0 + clip.epsilon_high : 1.0 + clip.epsilon;
    if (std::abs(ratio - lo) < 10.0 * step || std::abs(ratio - hi) < 10.0 * step)
      continue;
    kept.push_back(s);
    kept_adv.push_back(advantages[i]);
  }
  if (kept.empty()) return 0.0;

  const LossResult analytic = hybrid_loss(kept, params, env, clip, kept_adv);
  PolicyParams perturbed = params;
  double max_rel_err = 0.0;
  for (std::size_t p = 0; p < params.weights.size(); ++p) {
    const double orig = perturbed.weights[p];
    perturbed.weights[p] = orig + step;
    const double plus = hybrid_loss(kept, perturbed, env, clip, kept_adv).loss;
    perturbed.weights[p] = orig - step;
    const double minus = hybrid_loss(kept, perturbed, env, clip, kept_adv).loss;
    perturbed.weights[p] = orig;
    const double fd = (plus - minus) / (2.0 * step);
    const double g = analytic.grad[p];
    if (std::abs(g) > 1e-8) {
      max_rel_err = std::max(max_rel_err, std::abs(fd - g) / std::abs(g));
    }
  }
  return max_rel_err;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::size_t> minibatch_order(const std::vector<TrainSample>& samples,
                                         bool stratify, Rng& rng) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto shuffle = [&rng](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[rng.next_below(i)]);
    }
  };
  if (!stratify) {
    shuffle(order);
    return order;
  }
  // Stratified: shuffle originals and edited separately, then interleave
  // proportionally so every chunk sees both kinds.
  std::vector<std::size_t> on, off;
  for (std::size_t i : order) (samples[i].edited ? off : on).push_back(i);
  shuffle(on);
  shuffle(off);
  std::vector<std::size_t> merged;
  merged.reserve(order.size());
  std::size_t io = 0, ie = 0;
  while (io < on.size() || ie < off.size()) {
    // Pick the stream that is behind its target share.
    const double want_on = static_cast<double>(on.size()) / order.size();
    const double have =
        merged.empty() ? 0.0 : static_cast<double>(io) / merged.size();
    if (ie >= off.size() || (io < on.size() && have <= want_on)) {
      merged.push_back(on[io++]);
    } else {
      merged.push_back(off[ie++]);
    }
  }
  return merged;
}

}  // namespace

std::string train_log_csv(const std::vector<TrainLogRow>& log) {
  std::string out =
      "round,mean_reward,mean_length,loss,clip_frac_onpolicy,clip_frac_offpolicy\n";
  for (const auto& row : log) {
    out += std::to_string(row.round) + "," + fmt_double(row.mean_reward) + "," +
           fmt_double(row.mean_length) + "," + fmt_double(row.loss) + "," +
           fmt_double(row.clip_frac_onpolicy) + "," +
           fmt_double(row.clip_frac_offpolicy) + "\n";
  }
  return out;
}

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& log) {
  write_file(path, train_log_csv(log));
}

TrainResult train(PolicyParams init, const ToyEnv& env, const RoundBackend& backend,
                  const RolloutConfig& rollout_cfg, const SamplingConfig& sampling_cfg,
                  const ClipConfig& clip_cfg, const TrainConfig& train_cfg,
                  std::uint64_t seed) {
  validate(rollout_cfg);
  validate(sampling_cfg);
  validate(clip_cfg);
  validate(train_cfg);

  TrainResult result;
  result.params = std::move(init);
  const PolicyParams reference = result.params;  // KL anchor
  const int n_chunks = std::max(1, train_cfg.batch_size / train_cfg.mini_batch_size);

  for (int round = 0; round < train_cfg.rounds; ++round) {
    const std::uint64_t round_seed = hash_combine(seed, round);
    auto batch = env.make_batch(seed, round, train_cfg.batch_size);

    RolloutConfig rcfg = rollout_cfg;
    rcfg.seed = hash_combine(round_seed, hash_str("rollout"));
    auto groups = run_round(result.params, env, backend, batch, rcfg);

    SamplingConfig scfg = sampling_cfg;
    scfg.seed = hash_combine(round_seed, hash_str("select"));
    Selection sel = select(groups, scfg);
    auto samples = flatten_selection(groups, sel, env);
    auto advantages = compute_advantages(samples, train_cfg.baseline);

    TrainLogRow row;
    row.round = round;
    double reward_sum = 0.0, length_sum = 0.0, diag_sum = 0.0;
    int n_orig = 0;
    for (const auto& g : groups) {
      for (const auto& o : g.originals) {
        reward_sum += *o.reward;
        length_sum += o.token_length;
        if (backend.diagnostic_reward)
          diag_sum += backend.diagnostic_reward(o, g.persona, g.query);
        ++n_orig;
      }
    }
    row.mean_reward = reward_sum / n_orig;
    row.mean_length = length_sum / n_orig;
    row.mean_diagnostic = backend.diagnostic_reward ? diag_sum / n_orig : row.mean_reward;

    Rng shuffle_rng = derive_stream(round_seed, "shuffle");
    double loss_sum = 0.0, clip_on_sum = 0.0, clip_off_sum = 0.0;
    int n_steps = 0;
    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
      auto order = minibatch_order(samples, train_cfg.stratify_minibatches, shuffle_rng);
      for (int chunk = 0; chunk < n_chunks; ++chunk) {
        const std::size_t begin = order.size() * chunk / n_chunks;
        const std::size_t end = order.size() * (chunk + 1) / n_chunks;
        if (begin == end) continue;
        std::vector<TrainSample> chunk_samples;
        std::vector<double> chunk_adv;
        chunk_samples.reserve(end - begin);
        for (std::size_t j = begin; j < end; ++j) {
          chunk_samples.push_back(samples[order[j]]);
          chunk_adv.push_back(advantages.values[order[j]]);
        }
        LossResult loss =
            hybrid_loss(chunk_samples, result.params, env, clip_cfg, chunk_adv,
                        train_cfg.kl_coef,
                        train_cfg.kl_coef != 0.0 ? &reference : nullptr);
        for (std::size_t p = 0; p < result.params.weights.size(); ++p) {
          result.params.weights[p] -= train_cfg.learning_rate * loss.grad[p];
        }
        loss_sum += loss.loss;
        clip_on_sum += loss.clip_frac_onpolicy;
        clip_off_sum += loss.clip_frac_offpolicy;
        ++n_steps;
      }
    }
    row.loss = n_steps > 0 ? loss_sum / n_steps : 0.0;
    row.clip_frac_onpolicy = n_steps > 0 ? clip_on_sum / n_steps : 0.0;
    row.clip_frac_offpolicy = n_steps > 0 ? clip_off_sum / n_steps : 0.0;
    result.log.push_back(row);
  }
  return result;
}

}  // namespace cpe
