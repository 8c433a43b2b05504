#include "cpe/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>

#include "cpe/errors.hpp"
#include "cpe/toy_env.hpp"

namespace cpe {

namespace {

// Embedded copy of assets/grm_prompt_v1.txt. A unit test checks the asset
// file and this string stay byte-identical.
constexpr const char* kGrmPromptTemplate =
    R"(You are a strict evaluator of personalized answers. Score the model answer on three dimensions, each from -5 to 5. Apply every deduction that fits; do not reward surface tricks.

1. Helpfulness
Positive scores require accurate, complete content that actually addresses the question. Off-topic or thin answers score at or below zero.

2. Personalization
Positive scores require using the parts of the profile that matter for this question, woven in naturally. Deduct 2 points for each profile detail inserted that is irrelevant to the question.

3. Naturalness
Start from a neutral tone. Deduct 2 points for a closing note that praises or summarizes the answer itself, 1 point for stock filler phrases, and 1 point for addressing the user by name.

Length rule (affects Helpfulness and Naturalness): the recommended answer length is 300-400 tokens. If the answer runs over, deduct 1 point from each of the two dimensions for every extra 100 tokens.

Reply in exactly this format:

<critique>
Two or three specific, actionable suggestions addressing the main deductions.
</critique>

<scores>
Helpfulness: X points
Personalization: X points
Natural: X points
</scores>

Put reasoning only inside the critique block and only the final numbers inside the scores block. The floor for every dimension is -5.

Below is the user's profile:
{persona}

Below is the user's question:
{question}

Below is the model answer:
{answer}
)";

// Embedded copy used when a reply was malformed and we ask once more.
constexpr const char* kFormatReminder =
    "Your previous reply did not match the required format. Reply again using "
    "exactly one <critique>...</critique> block followed by one "
    "<scores>...</scores> block containing the lines 'Helpfulness: X points', "
    "'Personalization: X points' and 'Natural: X points' with X in [-5, 5].";

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Finds one <tag>...</tag> block (case-insensitive). Returns the inner text.
std::string extract_block(const std::string& text, const std::string& lowered,
                          const std::string& tag) {
  const std::string open = "<" + tag + ">";
  const std::string close = "</" + tag + ">";
  std::size_t b = lowered.find(open);
  if (b == std::string::npos)
    throw ProtocolError(ProtocolErrorKind::MissingTag, "no <" + tag + "> tag");
  std::size_t e = lowered.find(close, b + open.size());
  if (e == std::string::npos)
    throw ProtocolError(ProtocolErrorKind::MissingTag, "no </" + tag + "> tag");
  return text.substr(b + open.size(), e - (b + open.size()));
}

// Parses "<label>: X( points)?" out of the scores block. Each label must
// appear exactly once; `aliases` accepts spelling variants.
double parse_score_line(const std::string& block_lower, const std::string& block,
                        const std::vector<std::string>& aliases) {
  std::size_t found = std::string::npos;
  for (const auto& alias : aliases) {
    std::size_t pos = 0;
    while ((pos = block_lower.find(alias, pos)) != std::string::npos) {
      // Whole-word hits only: "natural" must not match inside "naturalness"
      // or "unnatural".
      std::size_t after = pos + alias.size();
      bool letter_before =
          pos > 0 && std::isalpha(static_cast<unsigned char>(block_lower[pos - 1]));
      if (letter_before || (after < block_lower.size() &&
                            std::isalpha(static_cast<unsigned char>(block_lower[after])))) {
        pos = after;
        continue;
      }
      if (found != std::string::npos)
        throw ProtocolError(ProtocolErrorKind::Ambiguous,
                            "duplicate score line for " + aliases.front());
      found = pos;
      pos = after;
    }
  }
  if (found == std::string::npos)
    throw ProtocolError(ProtocolErrorKind::BadNumber,
                        "no score line for " + aliases.front());
  std::size_t colon = block.find(':', found);
  if (colon == std::string::npos)
    throw ProtocolError(ProtocolErrorKind::BadNumber,
                        "no ':' after " + aliases.front());
  std::size_t end = block.find('\n', colon);
  std::string value_text = trim(block.substr(
      colon + 1, end == std::string::npos ? std::string::npos : end - colon - 1));
  // Drop a trailing "points"/"point".
  std::string vl = lower(value_text);
  for (const char* suffix : {"points", "point"}) {
    std::size_t n = std::string(suffix).size();
    if (vl.size() >= n && vl.compare(vl.size() - n, n, suffix) == 0) {
      value_text = trim(value_text.substr(0, value_text.size() - n));
      break;
    }
  }
  if (value_text.empty())
    throw ProtocolError(ProtocolErrorKind::BadNumber,
                        "empty score for " + aliases.front());
  char* parse_end = nullptr;
  double v = std::strtod(value_text.c_str(), &parse_end);
  if (parse_end == value_text.c_str() || *parse_end != '\0')
    throw ProtocolError(ProtocolErrorKind::BadNumber,
                        "not a number: '" + value_text + "'");
  if (!(v >= -5.0 && v <= 5.0))
    throw ProtocolError(ProtocolErrorKind::OutOfRange,
                        aliases.front() + " score " + value_text + " outside [-5, 5]");
  return v;
}

std::string substitute_once(std::string text, const std::string& slot,
                            const std::string& payload) {
  std::size_t pos = text.find(slot);
  if (pos == std::string::npos)
    throw Error("prompt template is missing slot " + slot);
  return text.replace(pos, slot.size(), payload);
}

double clamp_score(double v) { return std::clamp(v, -5.0, 5.0); }

const char* flag_advice(CritiqueFlag f) {
  switch (f) {
    case CritiqueFlag::NameDrop:
      return "Do not address the user by name; speak to their need directly.";
    case CritiqueFlag::IrrelevantTrait:
      return "Drop profile details that have no bearing on this question.";
    case CritiqueFlag::SelfSummary:
      return "Remove the closing note that praises the answer itself.";
    case CritiqueFlag::Boilerplate:
      return "Replace stock filler phrases with concrete content.";
    case CritiqueFlag::OverLength:
      return "Cut the answer back toward the recommended length.";
    case CritiqueFlag::MissingTrait:
      return "Work the relevant profile details into the recommendation.";
    case CritiqueFlag::OffTopic:
      return "Answer the actual question before anything else.";
  }
  return "";
}

}  // namespace

void validate(const DimWeights& w) {
  if (w.helpfulness < 0.0 || w.personalization < 0.0 || w.naturalness < 0.0)
    throw ConfigError("weights", "dimension weights must be non-negative");
  double sum = w.helpfulness + w.personalization + w.naturalness;
  if (std::abs(sum - 1.0) > 1e-12)
    throw ConfigError("weights", "dimension weights must sum to 1");
}

double aggregate_final_score(const DimScores& scores, const DimWeights& weights) {
  validate(weights);
  return weights.helpfulness * scores.helpfulness +
         weights.personalization * scores.personalization +
         weights.naturalness * scores.naturalness;
}

void validate(const GrmRuleConfig& cfg) {
  if (cfg.recommended_length_tokens <= 0)
    throw ConfigError("grm_rules.recommended_length_tokens", "must be > 0");
  for (double v : {cfg.per_100_token_deduction, cfg.name_drop_penalty,
                   cfg.irrelevant_trait_penalty, cfg.self_summary_penalty,
                   cfg.boilerplate_penalty, cfg.on_topic_bonus_cap,
                   cfg.relevant_trait_bonus}) {
    if (v < 0.0) throw ConfigError("grm_rules", "penalties and bonuses must be >= 0");
  }
}

const std::string& grm_prompt_template() {
  static const std::string tpl = kGrmPromptTemplate;
  return tpl;
}

std::string persona_profile_text(const Persona& persona) {
  std::string out;
  for (const auto& [key, value] : persona.traits) {
    out += "- " + key + ": " + value + "\n";
  }
  if (out.empty()) out = "- (no profile details)\n";
  out.pop_back();  // no trailing newline inside the slot
  return out;
}

std::string render_grm_prompt(const Persona& persona, const Query& query,
                              const std::string& response_text) {
  std::string out = grm_prompt_template();
  out = substitute_once(std::move(out), "{persona}", persona_profile_text(persona));
  out = substitute_once(std::move(out), "{question}", query.text);
  out = substitute_once(std::move(out), "{answer}", response_text);
  return out;
}

Critique parse_grm_output(const std::string& text) {
  const std::string lowered = lower(text);
  Critique c;
  c.feedback_text = trim(extract_block(text, lowered, "critique"));
  const std::string scores_block = extract_block(text, lowered, "scores");
  const std::string scores_lower = lower(scores_block);
  c.scores.helpfulness = parse_score_line(scores_lower, scores_block, {"helpfulness"});
  c.scores.personalization =
      parse_score_line(scores_lower, scores_block, {"personalization"});
  c.scores.naturalness =
      parse_score_line(scores_lower, scores_block, {"naturalness", "natural"});
  return c;
}

std::string format_grm_output(const Critique& critique) {
  auto fmt = [](double v) {
    char buf[32];
    if (v == static_cast<long long>(v)) {
      std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
    } else {
      std::snprintf(buf, sizeof(buf), "%g", v);
    }
    return std::string(buf);
  };
  std::string out = "<critique>\n";
  out += critique.feedback_text.empty() ? "No major issues." : critique.feedback_text;
  out += "\n</critique>\n\n<scores>\n";
  out += "Helpfulness: " + fmt(critique.scores.helpfulness) + " points\n";
  out += "Personalization: " + fmt(critique.scores.personalization) + " points\n";
  out += "Natural: " + fmt(critique.scores.naturalness) + " points\n";
  out += "</scores>\n";
  return out;
}

const std::string& grm_format_reminder() {
  static const std::string reminder = kFormatReminder;
  return reminder;
}

Critique simulated_grm(const ToyEnv& env, const ResponseSample& sample,
                       const Persona& persona, const Query& query,
                       const GrmRuleConfig& cfg) {
  validate(cfg);
  if (!sample.toy_mode())
    throw UnsupportedModeError("simulated_grm needs a segment-indexed sample");

  const std::uint32_t relevant = env.relevant_trait_mask(persona);

  double topic_bonus = 0.0;
  std::set<int> distinct_relevant;
  int irrelevant_mentions = 0;
  int name_drops = 0;
  int self_summaries = 0;
  int boilerplates = 0;
  for (int idx : *sample.segments) {
    const SegmentInfo& seg = env.segment(idx);
    switch (seg.kind) {
      case SegmentKind::OnTopic:
        if (seg.ref == query.topic_id) topic_bonus += 1.0;
        break;
      case SegmentKind::PersonaMention:
        if (seg.ref >= 0 && (relevant & (1u << seg.ref)))
          distinct_relevant.insert(seg.ref);
        else
          ++irrelevant_mentions;
        break;
      case SegmentKind::SelfSummary: ++self_summaries; break;
      case SegmentKind::Boilerplate: ++boilerplates; break;
      case SegmentKind::NameDrop: ++name_drops; break;
      case SegmentKind::Filler:
      case SegmentKind::Empty: break;
    }
  }

  const int over = sample.token_length - cfg.recommended_length_tokens;
  const double length_deduction =
      over > 0 ? cfg.per_100_token_deduction * std::ceil(over / 100.0) : 0.0;

  Critique c;
  c.scores.helpfulness =
      clamp_score(std::min(cfg.on_topic_bonus_cap, topic_bonus) - length_deduction);
  c.scores.personalization = clamp_score(
      cfg.relevant_trait_bonus * static_cast<double>(distinct_relevant.size()) -
      cfg.irrelevant_trait_penalty * irrelevant_mentions -
      cfg.name_drop_penalty * name_drops);
  c.scores.naturalness = clamp_score(-cfg.self_summary_penalty * self_summaries -
                                     cfg.boilerplate_penalty * boilerplates -
                                     cfg.name_drop_penalty * name_drops -
                                     length_deduction);

  if (name_drops > 0) c.flags |= flag_bit(CritiqueFlag::NameDrop);
  if (irrelevant_mentions > 0) c.flags |= flag_bit(CritiqueFlag::IrrelevantTrait);
  if (self_summaries > 0) c.flags |= flag_bit(CritiqueFlag::SelfSummary);
  if (boilerplates > 0) c.flags |= flag_bit(CritiqueFlag::Boilerplate);
  if (length_deduction > 0.0) c.flags |= flag_bit(CritiqueFlag::OverLength);
  for (int i = 0; i < env.num_traits(); ++i) {
    if ((relevant & (1u << i)) && !distinct_relevant.count(i)) {
      c.flags |= flag_bit(CritiqueFlag::MissingTrait);
      break;
    }
  }
  if (topic_bonus == 0.0) c.flags |= flag_bit(CritiqueFlag::OffTopic);

  if (c.flags == 0) {
    c.feedback_text = "Good answer: on topic, personalized where it matters, "
                      "and within the recommended length.";
  } else {
    for (int i = 0; i < kNumCritiqueFlags; ++i) {
      if (c.flags & (1u << i)) {
        if (!c.feedback_text.empty()) c.feedback_text += " ";
        c.feedback_text += flag_advice(static_cast<CritiqueFlag>(1u << i));
      }
    }
  }
  return c;
}

double hackable_scalar_reward(const ToyEnv& env, const ResponseSample& sample,
                              const Persona& persona, const Query& query) {
  (void)persona;
  if (!sample.toy_mode())
    throw UnsupportedModeError("hackable_scalar_reward needs a segment-indexed sample");
  double topic = 0.0;
  int mentions = 0;
  int self_summaries = 0;
  for (int idx : *sample.segments) {
    const SegmentInfo& seg = env.segment(idx);
    if (seg.kind == SegmentKind::OnTopic && seg.ref == query.topic_id) topic += 1.0;
    if (seg.kind == SegmentKind::PersonaMention) ++mentions;
    if (seg.kind == SegmentKind::SelfSummary) ++self_summaries;
  }
  return std::min(4.0, topic) + 0.5 * mentions + 0.3 * self_summaries;
}

}  // namespace cpe
