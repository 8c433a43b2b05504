#pragma once

#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "cpe/eval.hpp"
#include "cpe/reward.hpp"
#include "cpe/types.hpp"

namespace cpe {

inline constexpr int kSchemaVersion = 1;

// Keeps pairs whose judge-score gap strictly exceeds the threshold; order
// preserved. Idempotent.
std::vector<PreferencePair> filter_preference_pairs(
    std::span<const PreferencePair> pairs, double threshold);

// A preference pair with both sides' dimension scores attached.
struct ScoredPair {
  PreferencePair pair;
  DimScores chosen_scores;
  DimScores rejected_scores;

  bool operator==(const ScoredPair&) const = default;
};

// Drops entries whose two weighted final scores agree within 1e-9.
std::vector<ScoredPair> drop_tied_final_scores(std::span<const ScoredPair> annotated,
                                               const DimWeights& weights);

// Single-record JSON (de)serialization. Emission is deterministic; parsing
// validates invariants and the schema_version field.
std::string to_json_line(const RolloutGroup& g);
std::string to_json_line(const PreferencePair& p);
std::string to_json_line(const JudgmentRecord& r);
RolloutGroup rollout_group_from_json(const std::string& line);
PreferencePair preference_pair_from_json(const std::string& line);
JudgmentRecord judgment_record_from_json(const std::string& line);

// JSONL files, one record per line, UTF-8. Loaders throw NotFoundError for a
// missing file and ParseError naming the 1-based line for malformed input.
std::vector<RolloutGroup> load_rollout_groups(const std::string& path);
void store_rollout_groups(const std::string& path, std::span<const RolloutGroup> groups);
std::vector<PreferencePair> load_preference_pairs(const std::string& path);
void store_preference_pairs(const std::string& path, std::span<const PreferencePair> pairs);
std::vector<JudgmentRecord> load_judgment_records(const std::string& path);
void store_judgment_records(const std::string& path, std::span<const JudgmentRecord> records);

// One label per line; used for rater files.
std::vector<std::string> load_label_lines(const std::string& path);

}  // namespace cpe
