#include "cpe/types.hpp"

#include <cmath>
#include <set>

#include "cpe/errors.hpp"

namespace cpe {

namespace {

constexpr const char* kFlagNames[kNumCritiqueFlags] = {
    "name_drop",   "irrelevant_trait", "self_summary", "boilerplate",
    "over_length", "missing_trait",    "off_topic",
};

}  // namespace

const char* flag_name(CritiqueFlag f) {
  for (int i = 0; i < kNumCritiqueFlags; ++i) {
    if (flag_bit(f) == (1u << i)) return kFlagNames[i];
  }
  throw KeyError("unknown critique flag");
}

CritiqueFlag flag_from_name(const std::string& name) {
  for (int i = 0; i < kNumCritiqueFlags; ++i) {
    if (name == kFlagNames[i]) return static_cast<CritiqueFlag>(1u << i);
  }
  throw KeyError("unknown critique flag name: " + name);
}

std::vector<std::string> flag_names(FlagMask mask) {
  std::vector<std::string> out;
  for (int i = 0; i < kNumCritiqueFlags; ++i) {
    if (mask & (1u << i)) out.emplace_back(kFlagNames[i]);
  }
  return out;
}

const char* to_string(QueryCategory c) {
  return c == QueryCategory::Specific ? "specific" : "general";
}

const char* to_string(QueryTier t) {
  switch (t) {
    case QueryTier::Easy: return "easy";
    case QueryTier::Mid: return "mid";
    case QueryTier::Hard: return "hard";
  }
  throw KeyError("unknown tier");
}

const char* to_string(Origin o) {
  return o == Origin::Original ? "original" : "edited";
}

QueryCategory query_category_from_string(const std::string& s) {
  if (s == "specific") return QueryCategory::Specific;
  if (s == "general") return QueryCategory::General;
  throw KeyError("unknown query category: " + s);
}

QueryTier query_tier_from_string(const std::string& s) {
  if (s == "easy") return QueryTier::Easy;
  if (s == "mid") return QueryTier::Mid;
  if (s == "hard") return QueryTier::Hard;
  throw KeyError("unknown query tier: " + s);
}

void validate(const Persona& p) {
  if (p.id.empty()) throw ConfigError("persona.id", "must be non-empty");
  std::set<std::string> keys;
  for (const auto& [key, value] : p.traits) {
    if (!keys.insert(key).second)
      throw ConfigError("persona.traits", "duplicate trait key: " + key);
  }
  for (int idx : p.relevant_trait_ids) {
    if (idx < 0 || idx >= static_cast<int>(p.traits.size()))
      throw ConfigError("persona.relevant_trait_ids",
                        "index " + std::to_string(idx) + " out of range");
  }
}

void validate(const Query& q) {
  if (q.id.empty()) throw ConfigError("query.id", "must be non-empty");
}

void validate(const ResponseSample& s, int num_originals_in_group) {
  if (s.token_length < 0)
    throw ConfigError("sample.token_length", "must be non-negative");
  if (s.behavior_logprob && *s.behavior_logprob > 0.0)
    throw ConfigError("sample.behavior_logprob", "must be <= 0");
  if (s.origin == Origin::Edited) {
    if (s.parent_index < 0)
      throw ConfigError("sample.parent_index", "edited sample needs a parent");
    if (num_originals_in_group >= 0 && s.parent_index >= num_originals_in_group)
      throw ConfigError("sample.parent_index",
                        "parent " + std::to_string(s.parent_index) +
                            " not an original in the group");
  }
}

void validate(const DimScores& s) {
  for (double v : {s.helpfulness, s.personalization, s.naturalness}) {
    if (!(v >= -5.0 && v <= 5.0))
      throw ConfigError("scores", "dimension score outside [-5, 5]");
  }
}

void validate(const RolloutGroup& g) {
  validate(g.query);
  validate(g.persona);
  const int k = static_cast<int>(g.originals.size());
  for (const auto& o : g.originals) {
    validate(o, k);
    if (o.origin != Origin::Original)
      throw ConfigError("group.originals", "contains a non-original sample");
  }
  for (const auto& e : g.edited) {
    validate(e, k);
    if (e.origin != Origin::Edited)
      throw ConfigError("group.edited", "contains a non-edited sample");
  }
  if (!g.critiques.empty() && g.critiques.size() != g.originals.size())
    throw ConfigError("group.critiques", "not aligned with originals");
  for (const auto& c : g.critiques) validate(c.scores);
}

void validate(const PreferencePair& p) {
  if (p.query_id.empty()) throw ConfigError("pair.query_id", "must be non-empty");
  for (double v : {p.chosen_judge_score, p.rejected_judge_score}) {
    if (!(v >= 1.0 && v <= 5.0))
      throw ConfigError("pair.judge_score", "outside [1, 5]");
  }
}

}  // namespace cpe
