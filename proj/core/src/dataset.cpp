#include "cpe/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cpe/errors.hpp"

namespace cpe {

using nlohmann::json;

std::vector<PreferencePair> filter_preference_pairs(
    std::span<const PreferencePair> pairs, double threshold) {
  if (threshold < 0.0) throw ConfigError("threshold", "must be >= 0");
  std::vector<PreferencePair> kept;
  for (const auto& p : pairs) {
    if (std::abs(p.chosen_judge_score - p.rejected_judge_score) > threshold)
      kept.push_back(p);
  }
  return kept;
}

std::vector<ScoredPair> drop_tied_final_scores(std::span<const ScoredPair> annotated,
                                               const DimWeights& weights) {
  validate(weights);
  std::vector<ScoredPair> kept;
  for (const auto& entry : annotated) {
    const double chosen = aggregate_final_score(entry.chosen_scores, weights);
    const double rejected = aggregate_final_score(entry.rejected_scores, weights);
    if (std::abs(chosen - rejected) > 1e-9) kept.push_back(entry);
  }
  return kept;
}

namespace {

json persona_to_json(const Persona& p) {
  json traits = json::array();
  for (const auto& [k, v] : p.traits) traits.push_back(json::array({k, v}));
  return json{{"id", p.id},
              {"traits", std::move(traits)},
              {"relevant_trait_ids", p.relevant_trait_ids}};
}

Persona persona_from_json(const json& j) {
  Persona p;
  p.id = j.at("id").get<std::string>();
  for (const auto& t : j.at("traits")) {
    p.traits.emplace_back(t.at(0).get<std::string>(), t.at(1).get<std::string>());
  }
  p.relevant_trait_ids = j.at("relevant_trait_ids").get<std::vector<int>>();
  validate(p);
  return p;
}

json query_to_json(const Query& q) {
  return json{{"id", q.id},
              {"text", q.text},
              {"category", to_string(q.category)},
              {"tier", to_string(q.tier)},
              {"topic_id", q.topic_id}};
}

Query query_from_json(const json& j) {
  Query q;
  q.id = j.at("id").get<std::string>();
  q.text = j.at("text").get<std::string>();
  q.category = query_category_from_string(j.at("category").get<std::string>());
  q.tier = query_tier_from_string(j.at("tier").get<std::string>());
  q.topic_id = j.at("topic_id").get<int>();
  validate(q);
  return q;
}

json sample_to_json(const ResponseSample& s) {
  json j{{"query_id", s.query_id},
         {"token_length", s.token_length},
         {"origin", to_string(s.origin)}};
  if (s.segments) {
    j["segments"] = *s.segments;
  } else {
    j["text"] = s.text;
  }
  if (s.origin == Origin::Edited) j["parent_index"] = s.parent_index;
  if (s.behavior_logprob) j["behavior_logprob"] = *s.behavior_logprob;
  if (s.reward) j["reward"] = *s.reward;
  return j;
}

ResponseSample sample_from_json(const json& j) {
  ResponseSample s;
  s.query_id = j.at("query_id").get<std::string>();
  s.token_length = j.at("token_length").get<int>();
  const std::string origin = j.at("origin").get<std::string>();
  if (origin == "original") {
    s.origin = Origin::Original;
  } else if (origin == "edited") {
    s.origin = Origin::Edited;
    s.parent_index = j.at("parent_index").get<int>();
  } else {
    throw KeyError("unknown origin: " + origin);
  }
  if (j.contains("segments")) {
    s.segments = j.at("segments").get<std::vector<int>>();
  } else {
    s.text = j.at("text").get<std::string>();
  }
  if (j.contains("behavior_logprob"))
    s.behavior_logprob = j.at("behavior_logprob").get<double>();
  if (j.contains("reward")) s.reward = j.at("reward").get<double>();
  validate(s);
  return s;
}

json critique_to_json(const Critique& c) {
  return json{{"feedback", c.feedback_text},
              {"scores",
               {{"helpfulness", c.scores.helpfulness},
                {"personalization", c.scores.personalization},
                {"naturalness", c.scores.naturalness}}},
              {"flags", flag_names(c.flags)}};
}

Critique critique_from_json(const json& j) {
  Critique c;
  c.feedback_text = j.at("feedback").get<std::string>();
  const json& s = j.at("scores");
  c.scores.helpfulness = s.at("helpfulness").get<double>();
  c.scores.personalization = s.at("personalization").get<double>();
  c.scores.naturalness = s.at("naturalness").get<double>();
  for (const auto& name : j.at("flags")) {
    c.flags |= flag_bit(flag_from_name(name.get<std::string>()));
  }
  validate(c.scores);
  return c;
}

void check_schema_version(const json& j) {
  if (!j.contains("schema_version")) return;  // tolerate hand-written files
  const int v = j.at("schema_version").get<int>();
  if (v != kSchemaVersion)
    throw KeyError("unsupported schema_version " + std::to_string(v));
}

template <typename T, typename FromJson>
std::vector<T> load_jsonl(const std::string& path, FromJson from_json_line) {
  if (!std::filesystem::exists(path))
    throw NotFoundError("file not found: " + path);
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open: " + path);
  std::vector<T> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(from_json_line(line));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

template <typename T, typename ToJson>
void store_jsonl(const std::string& path, std::span<const T> records,
                 ToJson to_json_line) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write: " + path);
  for (const auto& r : records) out << to_json_line(r) << "\n";
}

}  // namespace

std::string to_json_line(const RolloutGroup& g) {
  json j{{"schema_version", kSchemaVersion},
         {"query", query_to_json(g.query)},
         {"persona", persona_to_json(g.persona)}};
  json originals = json::array();
  for (const auto& s : g.originals) originals.push_back(sample_to_json(s));
  json edited = json::array();
  for (const auto& s : g.edited) edited.push_back(sample_to_json(s));
  json critiques = json::array();
  for (const auto& c : g.critiques) critiques.push_back(critique_to_json(c));
  j["originals"] = std::move(originals);
  j["edited"] = std::move(edited);
  j["critiques"] = std::move(critiques);
  return j.dump();
}

RolloutGroup rollout_group_from_json(const std::string& line) {
  const json j = json::parse(line);
  check_schema_version(j);
  RolloutGroup g;
  g.query = query_from_json(j.at("query"));
  g.persona = persona_from_json(j.at("persona"));
  for (const auto& s : j.at("originals")) g.originals.push_back(sample_from_json(s));
  for (const auto& s : j.at("edited")) g.edited.push_back(sample_from_json(s));
  for (const auto& c : j.at("critiques")) g.critiques.push_back(critique_from_json(c));
  validate(g);
  return g;
}

std::string to_json_line(const PreferencePair& p) {
  return json{{"schema_version", kSchemaVersion},
              {"query_id", p.query_id},
              {"chosen_text", p.chosen_text},
              {"rejected_text", p.rejected_text},
              {"chosen_judge_score", p.chosen_judge_score},
              {"rejected_judge_score", p.rejected_judge_score}}
      .dump();
}

PreferencePair preference_pair_from_json(const std::string& line) {
  const json j = json::parse(line);
  check_schema_version(j);
  PreferencePair p;
  p.query_id = j.at("query_id").get<std::string>();
  p.chosen_text = j.at("chosen_text").get<std::string>();
  p.rejected_text = j.at("rejected_text").get<std::string>();
  p.chosen_judge_score = j.at("chosen_judge_score").get<double>();
  p.rejected_judge_score = j.at("rejected_judge_score").get<double>();
  validate(p);
  return p;
}

std::string to_json_line(const JudgmentRecord& r) {
  return json{{"schema_version", kSchemaVersion},
              {"instruction_id", r.instruction_id},
              {"model_id", r.model_id},
              {"baseline_id", r.baseline_id},
              {"winner", r.model_won ? "model" : "baseline"},
              {"len_model", r.len_model},
              {"len_baseline", r.len_baseline}}
      .dump();
}

JudgmentRecord judgment_record_from_json(const std::string& line) {
  const json j = json::parse(line);
  check_schema_version(j);
  JudgmentRecord r;
  r.instruction_id = j.at("instruction_id").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  r.baseline_id = j.at("baseline_id").get<std::string>();
  const std::string winner = j.at("winner").get<std::string>();
  if (winner == "model") {
    r.model_won = true;
  } else if (winner == "baseline") {
    r.model_won = false;
  } else {
    throw KeyError("unknown winner: " + winner);
  }
  r.len_model = j.at("len_model").get<int>();
  r.len_baseline = j.at("len_baseline").get<int>();
  validate(r);
  return r;
}

std::vector<RolloutGroup> load_rollout_groups(const std::string& path) {
  return load_jsonl<RolloutGroup>(path, rollout_group_from_json);
}

void store_rollout_groups(const std::string& path,
                          std::span<const RolloutGroup> groups) {
  store_jsonl<RolloutGroup>(path, groups,
                            [](const RolloutGroup& g) { return to_json_line(g); });
}

std::vector<PreferencePair> load_preference_pairs(const std::string& path) {
  return load_jsonl<PreferencePair>(path, preference_pair_from_json);
}

void store_preference_pairs(const std::string& path,
                            std::span<const PreferencePair> pairs) {
  store_jsonl<PreferencePair>(path, pairs,
                              [](const PreferencePair& p) { return to_json_line(p); });
}

std::vector<JudgmentRecord> load_judgment_records(const std::string& path) {
  return load_jsonl<JudgmentRecord>(path, judgment_record_from_json);
}

void store_judgment_records(const std::string& path,
                            std::span<const JudgmentRecord> records) {
  store_jsonl<JudgmentRecord>(path, records,
                              [](const JudgmentRecord& r) { return to_json_line(r); });
}

std::vector<std::string> load_label_lines(const std::string& path) {
  if (!std::filesystem::exists(path)) throw NotFoundError("file not found: " + path);
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace cpe
