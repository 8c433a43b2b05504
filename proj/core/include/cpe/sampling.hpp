#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cpe/rng.hpp"
#include "cpe/types.hpp"

namespace cpe {

enum class SamplingStrategy { Random, RewardRank, Conditional, BatchLevelRank };

const char* to_string(SamplingStrategy s);
SamplingStrategy sampling_strategy_from_string(const std::string& s);

struct SamplingConfig {
  SamplingStrategy strategy = SamplingStrategy::Random;
  double edit_ratio = 0.5;  // r_e in [0, 1]
  std::uint64_t seed = 0;
};

void validate(const SamplingConfig& cfg);

// Per-question selected-sample tallies. For the per-question strategies the
// counts are selected edited responses; for BatchLevelRank they are totals
// (originals + selected edited), which is how the imbalance diagnostic
// counts. `variance` is the population variance.
struct SelectionReport {
  std::vector<int> per_question_counts;
  double mean = 0.0;
  double variance = 0.0;
};

SelectionReport make_report(std::vector<int> counts);

// Reference into a group: original index or edited index.
struct BatchItem {
  int group = 0;
  int index = 0;
  bool edited = false;

  bool operator==(const BatchItem&) const = default;
};

struct Selection {
  std::vector<BatchItem> items;  // group order; originals first within a group
  SelectionReport report;
};

// Builds the training batch: every original from every group plus edited
// responses chosen by the strategy. Throws StateError when any sample lacks
// a reward.
Selection select(const std::vector<RolloutGroup>& groups, const SamplingConfig& cfg);

// Independent Bernoulli(r_e) over the group's edited samples; returns kept
// indices in order.
std::vector<int> select_random(int num_edited, double edit_ratio, Rng& rng);

// Top round(r_e * n) edited samples by reward, ties to the lower index.
std::vector<int> select_reward_rank(std::span<const ResponseSample> edited,
                                    double edit_ratio);

// Strict improvers over their parent, ranked by improvement margin, then the
// top round(r_e * n) of that filtered list (n counts all edited).
std::vector<int> select_conditional(const RolloutGroup& group, double edit_ratio);

// Global top round(r_e * N) edited samples across the whole batch, with the
// per-question-total report described above. Returns kept edited indices per
// group.
std::pair<std::vector<std::vector<int>>, SelectionReport> select_batch_level_rank(
    const std::vector<RolloutGroup>& groups, double edit_ratio);

// round-half-up used for the deterministic strategies' counts.
int round_half_up(double x);

}  // namespace cpe
