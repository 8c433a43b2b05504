#include "cpe/toy_env.hpp"

#include <algorithm>

#include "cpe/errors.hpp"

namespace cpe {

namespace {

const std::vector<std::string> kTraitKeys = {
    "hobby", "job", "diet", "city", "vehicle", "sport", "music", "pet",
    "climate", "budget", "schedule", "family", "language", "tool", "genre", "goal",
};

const std::vector<std::vector<std::string>> kTraitValues = {
    {"cycling", "chess", "baking", "climbing"},
    {"engineer", "teacher", "nurse", "designer"},
    {"vegetarian", "vegan", "keto", "halal"},
    {"Lyon", "Osaka", "Austin", "Tartu"},
    {"bike", "sedan", "scooter", "van"},
    {"tennis", "judo", "rowing", "futsal"},
    {"jazz", "techno", "folk", "metal"},
    {"cat", "dog", "parrot", "none"},
    {"humid", "dry", "cold", "mild"},
    {"tight", "modest", "flexible", "generous"},
    {"mornings", "evenings", "weekends", "irregular"},
    {"solo", "couple", "kids", "shared-flat"},
    {"french", "japanese", "spanish", "estonian"},
    {"spreadsheet", "notebook", "whiteboard", "app"},
    {"thriller", "memoir", "sci-fi", "essays"},
    {"save-time", "save-money", "learn", "relax"},
};

const std::vector<std::string> kTopicNames = {
    "weekend travel planning", "weeknight cooking",   "home fitness routines",
    "budgeting software",      "language practice",   "small-space gardening",
    "commute logistics",       "gift ideas",
};

}  // namespace

ToyEnv::ToyEnv(ToyEnvConfig cfg) : cfg_(cfg) {
  if (cfg_.num_topics < 1 || cfg_.num_traits < 1 || cfg_.num_slots < 1)
    throw ConfigError("env", "topics, traits and slots must be >= 1");
  if (cfg_.num_traits > 32)
    throw ConfigError("env.num_traits", "catalog limited to 32 traits");
  if (cfg_.on_topic_per_topic < 1 || cfg_.num_fillers < 0)
    throw ConfigError("env", "invalid vocabulary counts");
  if (cfg_.min_persona_traits < 1 || cfg_.max_persona_traits < cfg_.min_persona_traits)
    throw ConfigError("env", "persona trait bounds must satisfy 1 <= min <= max");
  if (cfg_.min_relevant_traits < 0 ||
      cfg_.max_relevant_traits < cfg_.min_relevant_traits)
    throw ConfigError("env", "relevant trait bounds must satisfy 0 <= min <= max");
  if (cfg_.num_topics > static_cast<int>(kTopicNames.size()) ||
      cfg_.num_traits > static_cast<int>(kTraitKeys.size()))
    throw ConfigError("env", "not enough canned topics/traits for this size");
  build_catalog();

  for (int t = 0; t < cfg_.num_topics; ++t) {
    for (int j = 0; j < cfg_.on_topic_per_topic; ++j) {
      vocab_.push_back({SegmentKind::OnTopic, t, cfg_.on_topic_tokens,
                        "topic" + std::to_string(t) + "_" + std::string(1, char('a' + j))});
    }
  }
  for (int i = 0; i < cfg_.num_traits; ++i) {
    vocab_.push_back({SegmentKind::PersonaMention, i, cfg_.mention_tokens,
                      "mention_" + trait_keys_[i]});
  }
  vocab_.push_back({SegmentKind::SelfSummary, -1, cfg_.self_summary_tokens, "self_summary"});
  vocab_.push_back({SegmentKind::Boilerplate, -1, cfg_.boilerplate_tokens, "boilerplate"});
  vocab_.push_back({SegmentKind::NameDrop, -1, cfg_.name_drop_tokens, "name_drop"});
  for (int j = 0; j < cfg_.num_fillers; ++j) {
    vocab_.push_back({SegmentKind::Filler, -1, cfg_.filler_tokens,
                      "filler_" + std::string(1, char('a' + j))});
  }
  vocab_.push_back({SegmentKind::Empty, -1, 0, "empty"});
}

ToyEnv::ToyEnv(int num_topics, int num_traits, int num_slots,
               std::vector<SegmentInfo> vocabulary)
    : vocab_(std::move(vocabulary)) {
  cfg_.num_topics = num_topics;
  cfg_.num_traits = num_traits;
  cfg_.num_slots = num_slots;
  if (num_topics < 1 || num_traits < 1 || num_slots < 1 || vocab_.empty())
    throw ConfigError("env", "invalid custom environment");
  if (num_traits > 32) throw ConfigError("env.num_traits", "catalog limited to 32");
  build_catalog();
}

void ToyEnv::build_catalog() {
  trait_keys_.assign(kTraitKeys.begin(),
                     kTraitKeys.begin() + std::min<std::size_t>(cfg_.num_traits,
                                                                kTraitKeys.size()));
  for (std::size_t i = trait_keys_.size(); i < static_cast<std::size_t>(cfg_.num_traits);
       ++i) {
    trait_keys_.push_back("trait" + std::to_string(i));
  }
  trait_values_.assign(kTraitValues.begin(),
                       kTraitValues.begin() + std::min<std::size_t>(trait_keys_.size(),
                                                                    kTraitValues.size()));
  while (trait_values_.size() < trait_keys_.size())
    trait_values_.push_back({"v0", "v1", "v2", "v3"});
  topic_names_.assign(kTopicNames.begin(),
                      kTopicNames.begin() + std::min<std::size_t>(cfg_.num_topics,
                                                                  kTopicNames.size()));
  while (topic_names_.size() < static_cast<std::size_t>(cfg_.num_topics))
    topic_names_.push_back("topic " + std::to_string(topic_names_.size()));
}

const SegmentInfo& ToyEnv::segment(int index) const {
  if (index < 0 || index >= vocab_size())
    throw IndexError("segment index " + std::to_string(index) + " out of range");
  return vocab_[index];
}

int ToyEnv::feature_dim() const {
  return cfg_.num_topics + cfg_.num_traits + cfg_.num_slots + kNumCritiqueFlags + 1;
}

void ToyEnv::active_features(const ContextFeatures& ctx, int slot,
                             std::vector<int>& out) const {
  if (slot < 0 || slot >= cfg_.num_slots) throw IndexError("slot out of range");
  if (ctx.topic_id < 0 || ctx.topic_id >= cfg_.num_topics)
    throw IndexError("topic id out of range");
  out.clear();
  out.push_back(topic_offset() + ctx.topic_id);
  for (int i = 0; i < cfg_.num_traits; ++i) {
    if (ctx.relevant_trait_mask & (1u << i)) out.push_back(trait_offset() + i);
  }
  out.push_back(slot_offset() + slot);
  for (int i = 0; i < kNumCritiqueFlags; ++i) {
    if (ctx.flags & (1u << i)) out.push_back(flag_offset() + i);
  }
  if (ctx.edit_mode) out.push_back(edit_bit_offset());
}

std::uint32_t ToyEnv::relevant_trait_mask(const Persona& persona) const {
  std::uint32_t mask = 0;
  for (int pos : persona.relevant_trait_ids) {
    if (pos < 0 || pos >= static_cast<int>(persona.traits.size())) continue;
    int idx = trait_index(persona.traits[pos].first);
    if (idx >= 0) mask |= (1u << idx);
  }
  return mask;
}

ContextFeatures ToyEnv::context(const Query& query, const Persona& persona) const {
  ContextFeatures ctx;
  ctx.topic_id = query.topic_id;
  ctx.relevant_trait_mask = relevant_trait_mask(persona);
  return ctx;
}

ContextFeatures ToyEnv::edit_context(const Query& query, const Persona& persona,
                                     FlagMask critique_flags) const {
  ContextFeatures ctx = context(query, persona);
  ctx.flags = critique_flags;
  ctx.edit_mode = true;
  return ctx;
}

int ToyEnv::trait_index(const std::string& key) const {
  for (std::size_t i = 0; i < trait_keys_.size(); ++i) {
    if (trait_keys_[i] == key) return static_cast<int>(i);
  }
  return -1;
}

const std::string& ToyEnv::trait_key(int catalog_index) const {
  if (catalog_index < 0 || catalog_index >= static_cast<int>(trait_keys_.size()))
    throw IndexError("trait catalog index out of range");
  return trait_keys_[catalog_index];
}

int ToyEnv::token_length(const std::vector<int>& segments) const {
  int total = 0;
  for (int s : segments) total += segment(s).token_length;
  return total;
}

std::pair<Query, Persona> ToyEnv::make_pair(std::uint64_t seed, std::uint64_t round,
                                            int index) const {
  Rng rng = derive_stream(seed, "pair", round, static_cast<std::uint64_t>(index));

  Query q;
  q.topic_id = static_cast<int>(rng.next_below(cfg_.num_topics));
  q.id = "q" + std::to_string(round) + "_" + std::to_string(index);
  q.text = "Advice on " + topic_names_[q.topic_id] + "?";
  q.category = rng.next_below(2) == 0 ? QueryCategory::Specific : QueryCategory::General;
  q.tier = static_cast<QueryTier>(rng.next_below(3));

  Persona p;
  p.id = "p" + std::to_string(round) + "_" + std::to_string(index);
  int span = cfg_.max_persona_traits - cfg_.min_persona_traits + 1;
  int n_traits = cfg_.min_persona_traits + static_cast<int>(rng.next_below(span));
  n_traits = std::min(n_traits, cfg_.num_traits);

  std::vector<int> catalog(cfg_.num_traits);
  for (int i = 0; i < cfg_.num_traits; ++i) catalog[i] = i;
  for (int i = 0; i < n_traits; ++i) {
    int j = i + static_cast<int>(rng.next_below(cfg_.num_traits - i));
    std::swap(catalog[i], catalog[j]);
  }
  catalog.resize(n_traits);
  std::sort(catalog.begin(), catalog.end());
  for (int idx : catalog) {
    const auto& values = trait_values_[idx];
    p.traits.emplace_back(trait_keys_[idx], values[rng.next_below(values.size())]);
  }

  int rel_span = cfg_.max_relevant_traits - cfg_.min_relevant_traits + 1;
  int n_rel = cfg_.min_relevant_traits + static_cast<int>(rng.next_below(rel_span));
  n_rel = std::min(n_rel, n_traits);
  std::vector<int> positions(n_traits);
  for (int i = 0; i < n_traits; ++i) positions[i] = i;
  for (int i = 0; i < n_rel; ++i) {
    int j = i + static_cast<int>(rng.next_below(n_traits - i));
    std::swap(positions[i], positions[j]);
  }
  positions.resize(n_rel);
  std::sort(positions.begin(), positions.end());
  p.relevant_trait_ids = positions;
  return {q, p};
}

std::vector<std::pair<Query, Persona>> ToyEnv::make_batch(std::uint64_t seed,
                                                          std::uint64_t round,
                                                          int count) const {
  std::vector<std::pair<Query, Persona>> batch;
  batch.reserve(count);
  for (int i = 0; i < count; ++i) batch.push_back(make_pair(seed, round, i));
  return batch;
}

}  // namespace cpe
