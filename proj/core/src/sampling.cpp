#include "cpe/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpe/errors.hpp"

namespace cpe {

const char* to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::Random: return "random";
    case SamplingStrategy::RewardRank: return "reward_rank";
    case SamplingStrategy::Conditional: return "conditional";
    case SamplingStrategy::BatchLevelRank: return "batch_level_rank";
  }
  throw KeyError("unknown sampling strategy");
}

SamplingStrategy sampling_strategy_from_string(const std::string& s) {
  if (s == "random") return SamplingStrategy::Random;
  if (s == "reward_rank") return SamplingStrategy::RewardRank;
  if (s == "conditional") return SamplingStrategy::Conditional;
  if (s == "batch_level_rank") return SamplingStrategy::BatchLevelRank;
  throw KeyError("unknown sampling strategy: " + s);
}

void validate(const SamplingConfig& cfg) {
  if (!(cfg.edit_ratio >= 0.0 && cfg.edit_ratio <= 1.0))
    throw ConfigError("sampling.edit_ratio", "must be in [0, 1]");
}

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

SelectionReport make_report(std::vector<int> counts) {
  SelectionReport r;
  r.per_question_counts = std::move(counts);
  if (r.per_question_counts.empty()) return r;
  const double n = static_cast<double>(r.per_question_counts.size());
  double sum = 0.0;
  for (int c : r.per_question_counts) sum += c;
  r.mean = sum / n;
  double ss = 0.0;
  for (int c : r.per_question_counts) {
    const double d = c - r.mean;
    ss += d * d;
  }
  r.variance = ss / n;  // population variance
  return r;
}

std::vector<int> select_random(int num_edited, double edit_ratio, Rng& rng) {
  std::vector<int> kept;
  for (int i = 0; i < num_edited; ++i) {
    if (rng.next_double() < edit_ratio) kept.push_back(i);
  }
  return kept;
}

namespace {

double require_reward(const ResponseSample& s) {
  if (!s.reward) throw StateError("sample is missing a reward");
  return *s.reward;
}

// Indices sorted by key descending, ties to the lower index.
template <typename KeyFn>
std::vector<int> rank_desc(int n, KeyFn key) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&key](int a, int b) { return key(a) > key(b); });
  return order;
}

}  // namespace

std::vector<int> select_reward_rank(std::span<const ResponseSample> edited,
                                    double edit_ratio) {
  const int n = static_cast<int>(edited.size());
  if (n == 0) return {};
  for (const auto& s : edited) require_reward(s);
  const int m = std::min(n, round_half_up(edit_ratio * n));
  auto order = rank_desc(n, [&edited](int i) { return *edited[i].reward; });
  order.resize(m);
  return order;
}

std::vector<int> select_conditional(const RolloutGroup& group, double edit_ratio) {
  const int n = static_cast<int>(group.edited.size());
  if (n == 0) return {};
  std::vector<int> improvers;
  std::vector<double> margin(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const ResponseSample& child = group.edited[i];
    if (child.parent_index < 0 ||
        child.parent_index >= static_cast<int>(group.originals.size()))
      throw StateError("edited sample has no valid parent");
    const double parent_reward = require_reward(group.originals[child.parent_index]);
    margin[i] = require_reward(child) - parent_reward;
    if (margin[i] > 0.0) improvers.push_back(i);
  }
  std::stable_sort(improvers.begin(), improvers.end(),
                   [&margin](int a, int b) { return margin[a] > margin[b]; });
  const int m = std::min(static_cast<int>(improvers.size()),
                         round_half_up(edit_ratio * n));
  improvers.resize(m);
  return improvers;
}

std::pair<std::vector<std::vector<int>>, SelectionReport> select_batch_level_rank(
    const std::vector<RolloutGroup>& groups, double edit_ratio) {
  struct Entry {
    double reward;
    int group;
    int index;
  };
  std::vector<Entry> pool;
  for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
    for (int i = 0; i < static_cast<int>(groups[g].edited.size()); ++i) {
      pool.push_back({require_reward(groups[g].edited[i]), g, i});
    }
  }
  const int total = static_cast<int>(pool.size());
  const int m = std::min(total, round_half_up(edit_ratio * total));
  std::stable_sort(pool.begin(), pool.end(), [](const Entry& a, const Entry& b) {
    return a.reward > b.reward;  // stable: batch position breaks ties
  });

  std::vector<std::vector<int>> kept(groups.size());
  for (int i = 0; i < m; ++i) kept[pool[i].group].push_back(pool[i].index);
  for (auto& v : kept) std::sort(v.begin(), v.end());

  std::vector<int> counts(groups.size(), 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    counts[g] = static_cast<int>(groups[g].originals.size() + kept[g].size());
  }
  return {std::move(kept), make_report(std::move(counts))};
}

Selection select(const std::vector<RolloutGroup>& groups, const SamplingConfig& cfg) {
  validate(cfg);
  for (const auto& g : groups) {
    for (const auto& s : g.originals) require_reward(s);
    for (const auto& s : g.edited) require_reward(s);
  }

  std::vector<std::vector<int>> kept(groups.size());
  SelectionReport report;
  if (cfg.strategy == SamplingStrategy::BatchLevelRank) {
    std::tie(kept, report) = select_batch_level_rank(groups, cfg.edit_ratio);
  } else {
    std::vector<int> counts(groups.size(), 0);
    for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
      const RolloutGroup& group = groups[g];
      switch (cfg.strategy) {
        case SamplingStrategy::Random: {
          Rng rng = derive_stream(cfg.seed, "select", hash_str(group.query.id));
          kept[g] = select_random(static_cast<int>(group.edited.size()),
                                  cfg.edit_ratio, rng);
          break;
        }
        case SamplingStrategy::RewardRank:
          kept[g] = select_reward_rank(group.edited, cfg.edit_ratio);
          break;
        case SamplingStrategy::Conditional:
          kept[g] = select_conditional(group, cfg.edit_ratio);
          break;
        case SamplingStrategy::BatchLevelRank: break;  // handled above
      }
      counts[g] = static_cast<int>(kept[g].size());
    }
    report = make_report(std::move(counts));
  }

  Selection sel;
  sel.report = std::move(report);
  for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
    for (int i = 0; i < static_cast<int>(groups[g].originals.size()); ++i) {
      sel.items.push_back({g, i, false});
    }
    for (int i : kept[g]) sel.items.push_back({g, i, true});
  }
  return sel;
}

}  // namespace cpe
