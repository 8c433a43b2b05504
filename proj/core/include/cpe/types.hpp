#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cpe {

enum class QueryCategory { Specific, General };
enum class QueryTier { Easy, Mid, Hard };

// Machine-readable critique flags. The bit positions double as feature
// indices when a critique is folded into an edit context.
enum class CritiqueFlag : std::uint32_t {
  NameDrop = 1u << 0,
  IrrelevantTrait = 1u << 1,
  SelfSummary = 1u << 2,
  Boilerplate = 1u << 3,
  OverLength = 1u << 4,
  MissingTrait = 1u << 5,
  OffTopic = 1u << 6,
};

inline constexpr int kNumCritiqueFlags = 7;

using FlagMask = std::uint32_t;

inline constexpr FlagMask flag_bit(CritiqueFlag f) {
  return static_cast<FlagMask>(f);
}
inline constexpr bool has_flag(FlagMask mask, CritiqueFlag f) {
  return (mask & flag_bit(f)) != 0;
}

const char* flag_name(CritiqueFlag f);
CritiqueFlag flag_from_name(const std::string& name);  // throws KeyError
std::vector<std::string> flag_names(FlagMask mask);    // sorted by bit index

// Structured user profile. `relevant_trait_ids` holds positions into
// `traits` that matter for the query this persona is paired with; it is a
// toy-environment annotation and stays empty for free-text data.
struct Persona {
  std::string id;
  std::vector<std::pair<std::string, std::string>> traits;
  std::vector<int> relevant_trait_ids;

  bool operator==(const Persona&) const = default;
};

struct Query {
  std::string id;
  std::string text;
  QueryCategory category = QueryCategory::Specific;
  QueryTier tier = QueryTier::Easy;
  int topic_id = 0;

  bool operator==(const Query&) const = default;
};

enum class Origin { Original, Edited };

// One generated or edited response. Toy-mode samples carry segment indices
// into the environment vocabulary; free-text samples carry `text`.
// `behavior_logprob` is the log-probability of the whole sequence under the
// policy that produced it, recorded at generation time and never updated.
struct ResponseSample {
  std::string query_id;
  std::optional<std::vector<int>> segments;
  std::string text;
  int token_length = 0;
  Origin origin = Origin::Original;
  int parent_index = -1;  // index into the group's originals; Edited only
  std::optional<double> behavior_logprob;
  std::optional<double> reward;

  bool toy_mode() const { return segments.has_value(); }

  bool operator==(const ResponseSample&) const = default;
};

// Per-dimension critique scores, each in [-5, 5].
struct DimScores {
  double helpfulness = 0.0;
  double personalization = 0.0;
  double naturalness = 0.0;

  bool operator==(const DimScores&) const = default;
};

struct Critique {
  std::string feedback_text;
  DimScores scores;
  FlagMask flags = 0;  // empty for free-text critiques

  bool operator==(const Critique&) const = default;
};

// All material produced for one (query, persona) pair in one round:
// k originals, their critiques (aligned by index), and edited children.
struct RolloutGroup {
  Query query;
  Persona persona;
  std::vector<ResponseSample> originals;
  std::vector<ResponseSample> edited;
  std::vector<Critique> critiques;

  bool operator==(const RolloutGroup&) const = default;
};

struct PreferencePair {
  std::string query_id;
  std::string chosen_text;
  std::string rejected_text;
  double chosen_judge_score = 0.0;   // [1, 5]
  double rejected_judge_score = 0.0; // [1, 5]

  bool operator==(const PreferencePair&) const = default;
};

const char* to_string(QueryCategory c);
const char* to_string(QueryTier t);
const char* to_string(Origin o);
QueryCategory query_category_from_string(const std::string& s);
QueryTier query_tier_from_string(const std::string& s);

// Structural validation; throws ConfigError naming the violated field.
void validate(const Persona& p);
void validate(const Query& q);
void validate(const ResponseSample& s, int num_originals_in_group = -1);
void validate(const DimScores& s);
void validate(const RolloutGroup& g);
void validate(const PreferencePair& p);

}  // namespace cpe
