#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cpe/rng.hpp"
#include "cpe/types.hpp"

namespace cpe {

// What a vocabulary segment does when it appears in a response.
enum class SegmentKind {
  OnTopic,        // substantive content for topic `ref`
  PersonaMention, // references catalog trait `ref`
  SelfSummary,    // trailing "this answer considers your ..." note
  Boilerplate,    // stock phrase
  NameDrop,       // addresses the user by name
  Filler,         // neutral padding
  Empty,          // unused slot, zero tokens
};

struct SegmentInfo {
  SegmentKind kind = SegmentKind::Filler;
  int ref = -1;  // topic id for OnTopic, trait catalog index for PersonaMention
  int token_length = 0;
  std::string name;
};

// Defaults are balanced so that an untrained uniform-over-content policy
// scores near zero: penalty segments and missed bonuses roughly cancel.
// Silence is then no better than average content and learning has to
// discriminate segments rather than suppress all of them.
struct ToyEnvConfig {
  int num_topics = 4;
  int on_topic_per_topic = 2;
  int num_traits = 6;  // trait catalog size
  int num_slots = 12;
  int num_fillers = 2;
  int on_topic_tokens = 60;
  int mention_tokens = 60;
  int self_summary_tokens = 45;
  int boilerplate_tokens = 35;
  int name_drop_tokens = 8;
  int filler_tokens = 30;
  int min_persona_traits = 4;
  int max_persona_traits = 6;
  int min_relevant_traits = 3;
  int max_relevant_traits = 5;
};

// Conditioning state for one generation: the policy sees the query topic,
// indicators for the traits that are relevant to this (query, persona) pair,
// the critique flags (edit passes only) and an edit-mode bit. Slot position
// is appended per slot when the feature vector is built.
struct ContextFeatures {
  int topic_id = 0;
  std::uint32_t relevant_trait_mask = 0;
  FlagMask flags = 0;
  bool edit_mode = false;

  bool operator==(const ContextFeatures&) const = default;
};

// Fixed-slot synthetic response environment. A response is `num_slots`
// segment choices from a small vocabulary; empty segments make short answers
// possible, so token length varies while sequence log-probabilities stay a
// finite product of softmax factors.
class ToyEnv {
 public:
  explicit ToyEnv(ToyEnvConfig cfg = {});

  // Custom vocabulary, used by tests that need tiny instances.
  ToyEnv(int num_topics, int num_traits, int num_slots,
         std::vector<SegmentInfo> vocabulary);

  const ToyEnvConfig& config() const { return cfg_; }
  const std::vector<SegmentInfo>& vocabulary() const { return vocab_; }
  const SegmentInfo& segment(int index) const;  // throws IndexError
  int vocab_size() const { return static_cast<int>(vocab_.size()); }
  int num_slots() const { return cfg_.num_slots; }
  int num_topics() const { return cfg_.num_topics; }
  int num_traits() const { return cfg_.num_traits; }

  // Feature layout: topic one-hot | relevant-trait indicators | slot one-hot
  // | critique-flag bits | edit-mode bit.
  int feature_dim() const;
  int topic_offset() const { return 0; }
  int trait_offset() const { return cfg_.num_topics; }
  int slot_offset() const { return cfg_.num_topics + cfg_.num_traits; }
  int flag_offset() const { return slot_offset() + cfg_.num_slots; }
  int edit_bit_offset() const { return flag_offset() + kNumCritiqueFlags; }

  // Active feature rows for a slot, ascending. Every row has weight 1.
  void active_features(const ContextFeatures& ctx, int slot,
                       std::vector<int>& out) const;

  ContextFeatures context(const Query& query, const Persona& persona) const;
  ContextFeatures edit_context(const Query& query, const Persona& persona,
                               FlagMask critique_flags) const;

  // Catalog indices of traits that are both present in the persona and
  // marked relevant for the current query.
  std::uint32_t relevant_trait_mask(const Persona& persona) const;

  int trait_index(const std::string& key) const;  // -1 when unknown
  const std::string& trait_key(int catalog_index) const;

  int token_length(const std::vector<int>& segments) const;

  // Deterministic (query, persona) synthesis for round batches.
  std::pair<Query, Persona> make_pair(std::uint64_t seed, std::uint64_t round,
                                      int index) const;
  std::vector<std::pair<Query, Persona>> make_batch(std::uint64_t seed,
                                                    std::uint64_t round,
                                                    int count) const;

 private:
  ToyEnvConfig cfg_;
  std::vector<SegmentInfo> vocab_;
  std::vector<std::string> trait_keys_;
  std::vector<std::vector<std::string>> trait_values_;
  std::vector<std::string> topic_names_;

  void build_catalog();
};

}  // namespace cpe
