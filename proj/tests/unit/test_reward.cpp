#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cpe/errors.hpp"
#include "cpe/reward.hpp"
#include "cpe/rng.hpp"
#include "cpe/svg.hpp"
#include "cpe/toy_env.hpp"
#include "helpers.hpp"

using namespace cpe;

namespace {

ResponseSample toy_sample(const ToyEnv& env, std::vector<int> segments) {
  ResponseSample s;
  s.query_id = "q0";
  s.token_length = env.token_length(segments);
  s.segments = std::move(segments);
  return s;
}

// Pads with the environment's empty segment up to the slot count.
std::vector<int> padded(const ToyEnv& env, std::vector<int> segments) {
  int empty = -1;
  for (int v = 0; v < env.vocab_size(); ++v) {
    if (env.segment(v).kind == SegmentKind::Empty) empty = v;
  }
  REQUIRE(empty >= 0);
  while (static_cast<int>(segments.size()) < env.num_slots())
    segments.push_back(empty);
  return segments;
}

int find_segment(const ToyEnv& env, SegmentKind kind, int ref = -1) {
  for (int v = 0; v < env.vocab_size(); ++v) {
    if (env.segment(v).kind == kind && (ref < 0 || env.segment(v).ref == ref))
      return v;
  }
  FAIL("segment kind not found");
  return -1;
}

}  // namespace

TEST_CASE("aggregate_final_score") {
  const DimWeights w;
  CHECK(aggregate_final_score({0, 0, 0}, w) == 0.0);
  CHECK(std::abs(aggregate_final_score({3, 4, 2}, w) - 3.15) <= 1e-12);
  CHECK(aggregate_final_score({5, 5, 5}, w) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(aggregate_final_score({5, 5, 5}, {0.2, 0.5, 0.3}) ==
        doctest::Approx(5.0).epsilon(1e-12));

  CHECK_THROWS_AS(aggregate_final_score({1, 1, 1}, {0.5, 0.5, 0.5}), ConfigError);
  CHECK_THROWS_AS(aggregate_final_score({1, 1, 1}, {-0.2, 0.7, 0.5}), ConfigError);
}

TEST_CASE("aggregate_final_score is monotone and affine") {
  const DimWeights w;
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    DimScores a{10 * rng.next_double() - 5, 10 * rng.next_double() - 5,
                10 * rng.next_double() - 5};
    DimScores higher = a;
    higher.personalization = std::min(5.0, higher.personalization + rng.next_double());
    CHECK(aggregate_final_score(higher, w) >= aggregate_final_score(a, w));

    DimScores b{10 * rng.next_double() - 5, 10 * rng.next_double() - 5,
                10 * rng.next_double() - 5};
    const double alpha = rng.next_double();
    DimScores mix{alpha * a.helpfulness + (1 - alpha) * b.helpfulness,
                  alpha * a.personalization + (1 - alpha) * b.personalization,
                  alpha * a.naturalness + (1 - alpha) * b.naturalness};
    CHECK(aggregate_final_score(mix, w) ==
          doctest::Approx(alpha * aggregate_final_score(a, w) +
                          (1 - alpha) * aggregate_final_score(b, w))
              .epsilon(1e-12));
  }
}

TEST_CASE("render_grm_prompt substitutes each payload exactly once") {
  Persona p;
  p.id = "p1";
  p.traits = {{"hobby", "rowing"}, {"diet", "vegan"}};
  Query q = test::toy_query();
  q.text = "What should I cook tonight?";
  const std::string answer = "UNIQUE_ANSWER_PAYLOAD";
  const std::string prompt = render_grm_prompt(p, q, answer);

  auto count = [&prompt](const std::string& needle) {
    std::size_t n = 0, pos = 0;
    while ((pos = prompt.find(needle, pos)) != std::string::npos) {
      ++n;
      pos += needle.size();
    }
    return n;
  };
  CHECK(count(answer) == 1);
  CHECK(count(q.text) == 1);
  CHECK(count("- hobby: rowing") == 1);
  CHECK(count("{persona}") == 0);
  CHECK(count("{question}") == 0);
  CHECK(count("{answer}") == 0);

  // Length arithmetic: template minus the three slots plus the payloads.
  const std::string persona_text = persona_profile_text(p);
  const std::size_t expected = grm_prompt_template().size() -
                               std::string("{persona}{question}{answer}").size() +
                               persona_text.size() + q.text.size() + answer.size();
  CHECK(prompt.size() == expected);

  // Empty answer slot still renders.
  const std::string empty_prompt = render_grm_prompt(p, q, "");
  CHECK(empty_prompt.find("Below is the model answer:") != std::string::npos);
}

TEST_CASE("prompt template asset matches the embedded copy") {
  const std::string asset = read_file(std::string(CPE_ASSETS_DIR) + "/grm_prompt_v1.txt");
  CHECK(asset == grm_prompt_template());
}

TEST_CASE("parse_grm_output round-trips formatted critiques") {
  Critique c;
  c.feedback_text = "Trim the closing note.";
  c.scores = {2, 3, -1};
  const Critique parsed = parse_grm_output(format_grm_output(c));
  CHECK(parsed.scores.helpfulness == 2.0);
  CHECK(parsed.scores.personalization == 3.0);
  CHECK(parsed.scores.naturalness == -1.0);
  CHECK(parsed.feedback_text == c.feedback_text);

  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    Critique r;
    r.feedback_text = "suggestion " + std::to_string(i);
    r.scores = {static_cast<double>(static_cast<int>(rng.next_below(11))) - 5,
                static_cast<double>(static_cast<int>(rng.next_below(11))) - 5,
                static_cast<double>(static_cast<int>(rng.next_below(11))) - 5};
    const Critique back = parse_grm_output(format_grm_output(r));
    CHECK(back.scores == r.scores);
  }
}

TEST_CASE("parse_grm_output error kinds") {
  const std::string ok =
      "<critique>\nok\n</critique>\n<scores>\nHelpfulness: 1 points\n"
      "Personalization: 2 points\nNatural: 3 points\n</scores>";
  CHECK(parse_grm_output(ok).scores.naturalness == 3.0);

  // case-insensitive tags, decimals, whitespace
  const std::string relaxed =
      "  <CRITIQUE> mixed case </CRITIQUE>\n<Scores>\n  Helpfulness: -2.5\n"
      "Personalization: 0 points\n  Naturalness: 4.5 points\n</Scores>\n";
  const Critique c = parse_grm_output(relaxed);
  CHECK(c.scores.helpfulness == -2.5);
  CHECK(c.scores.naturalness == 4.5);

  auto kind_of = [](const std::string& text) {
    try {
      parse_grm_output(text);
    } catch (const ProtocolError& e) {
      return e.kind();
    }
    throw std::runtime_error("expected ProtocolError");
  };

  CHECK(kind_of("no tags at all") == ProtocolErrorKind::MissingTag);
  CHECK(kind_of("<critique>x</critique><scores>Helpfulness: 1\n"
                "Personalization: 2\nNatural: 3\n") == ProtocolErrorKind::MissingTag);
  CHECK(kind_of("<critique>x</critique><scores>Helpfulness: seven\n"
                "Personalization: 2\nNatural: 3\n</scores>") ==
        ProtocolErrorKind::BadNumber);
  CHECK(kind_of("<critique>x</critique><scores>Helpfulness: 7 points\n"
                "Personalization: 2\nNatural: 3\n</scores>") ==
        ProtocolErrorKind::OutOfRange);
  CHECK(kind_of("<critique>x</critique><scores>Helpfulness: 1\nHelpfulness: 2\n"
                "Personalization: 2\nNatural: 3\n</scores>") ==
        ProtocolErrorKind::Ambiguous);
  CHECK(kind_of("<critique>x</critique><scores>Personalization: 2\nNatural: 3\n"
                "</scores>") == ProtocolErrorKind::BadNumber);
  CHECK(kind_of("") == ProtocolErrorKind::MissingTag);
}

TEST_CASE("golden fixtures parse to their manifest values") {
  const std::string dir = std::string(CPE_ASSETS_DIR) + "/grm_fixtures";
  const auto manifest = nlohmann::json::parse(read_file(dir + "/golden_manifest.json"));
  REQUIRE(manifest.size() == 50);
  for (const auto& entry : manifest) {
    const Critique c = parse_grm_output(read_file(dir + "/" + entry.at("file").get<std::string>()));
    CHECK(c.scores.helpfulness == doctest::Approx(entry.at("helpfulness").get<double>()));
    CHECK(c.scores.personalization ==
          doctest::Approx(entry.at("personalization").get<double>()));
    CHECK(c.scores.naturalness == doctest::Approx(entry.at("naturalness").get<double>()));
    CHECK(c.feedback_text == entry.at("feedback").get<std::string>());
  }
}

TEST_CASE("simulated_grm rule walk with default config") {
  const ToyEnv env;  // default environment
  const GrmRuleConfig cfg;
  const Query q = test::toy_query(0);
  const Persona p = test::toy_persona(env, 2, {0, 1});  // both traits relevant

  const int on_topic = find_segment(env, SegmentKind::OnTopic, 0);
  const int mention0 = find_segment(env, SegmentKind::PersonaMention, 0);
  const int mention1 = find_segment(env, SegmentKind::PersonaMention, 1);
  const int self_summary = find_segment(env, SegmentKind::SelfSummary);

  // On topic, both relevant traits mentioned, 330 tokens: no deductions.
  auto base = toy_sample(env, padded(env, {on_topic, on_topic, on_topic,
                                           mention0, mention1}));
  REQUIRE(base.token_length == 300);
  const Critique c = simulated_grm(env, base, p, q, cfg);
  CHECK(c.flags == 0);
  CHECK(c.scores.helpfulness == 3.0);  // three on-topic bonuses, under the cap
  CHECK(c.scores.personalization == 3.0);  // 2 distinct relevant traits * 1.5
  CHECK(c.scores.naturalness == 0.0);

  // Same sample plus one self-summary: naturalness drops by exactly 2.
  auto with_note = toy_sample(env, padded(env, {on_topic, on_topic, on_topic,
                                                mention0, mention1, self_summary}));
  REQUIRE(with_note.token_length <= cfg.recommended_length_tokens);
  const Critique c2 = simulated_grm(env, with_note, p, q, cfg);
  CHECK(c2.scores.naturalness == c.scores.naturalness - 2.0);
  CHECK(c2.flags == flag_bit(CritiqueFlag::SelfSummary));
  CHECK(c2.scores.helpfulness == c.scores.helpfulness);
  CHECK(c2.scores.personalization == c.scores.personalization);
}

TEST_CASE("simulated_grm length deduction hits helpfulness and naturalness") {
  // 650-token response with recommended 400: ceil(250/100) = 3 off both.
  std::vector<SegmentInfo> vocab = {
      {SegmentKind::OnTopic, 0, 60, "topic0"},
      {SegmentKind::Filler, -1, 650, "long_filler"},
      {SegmentKind::Empty, -1, 0, "empty"},
  };
  const ToyEnv env(1, 1, 2, std::move(vocab));
  const GrmRuleConfig cfg;
  const Persona p = test::toy_persona(env, 1, {});
  const Query q = test::toy_query(0);

  auto s = toy_sample(env, {1, 2});  // the 650-token filler + empty
  REQUIRE(s.token_length == 650);
  const Critique c = simulated_grm(env, s, p, q, cfg);
  CHECK(c.scores.helpfulness == -3.0);   // 0 topical - 3 length
  CHECK(c.scores.naturalness == -3.0);   // 0 - 3 length
  CHECK(has_flag(c.flags, CritiqueFlag::OverLength));
  CHECK(has_flag(c.flags, CritiqueFlag::OffTopic));

  // Exactly at the recommended length there is no deduction.
  std::vector<SegmentInfo> vocab2 = {
      {SegmentKind::Filler, -1, 400, "filler400"},
      {SegmentKind::Empty, -1, 0, "empty"},
  };
  const ToyEnv env2(1, 1, 2, std::move(vocab2));
  auto s2 = toy_sample(env2, {0, 1});
  const Critique c2 = simulated_grm(env2, s2, test::toy_persona(env2, 1, {}), q, cfg);
  CHECK(!has_flag(c2.flags, CritiqueFlag::OverLength));
}

TEST_CASE("simulated_grm is deterministic and clamps to [-5, 5]") {
  const ToyEnv env = test::small_env();
  const GrmRuleConfig cfg;
  const Query q = test::toy_query(0);
  const Persona p = test::toy_persona(env, 2, {0});

  const int name_drop = find_segment(env, SegmentKind::NameDrop);
  auto nasty = toy_sample(env, std::vector<int>(env.num_slots(), name_drop));
  nasty.token_length = 10000;  // adversarial length
  const Critique a = simulated_grm(env, nasty, p, q, cfg);
  const Critique b = simulated_grm(env, nasty, p, q, cfg);
  CHECK(a.scores.helpfulness == b.scores.helpfulness);
  CHECK(a.scores.personalization == b.scores.personalization);
  CHECK(a.scores.naturalness == b.scores.naturalness);
  for (double v : {a.scores.helpfulness, a.scores.personalization,
                   a.scores.naturalness}) {
    CHECK(v >= -5.0);
    CHECK(v <= 5.0);
  }
  CHECK(a.scores.helpfulness == -5.0);  // clamped

  ResponseSample text_sample;
  text_sample.text = "free text";
  CHECK_THROWS_AS(simulated_grm(env, text_sample, p, q, cfg), UnsupportedModeError);
}

TEST_CASE("adding a penalized segment never raises the final score") {
  const ToyEnv env = test::small_env();
  const GrmRuleConfig cfg;
  const DimWeights w;
  const Query q = test::toy_query(0);
  const Persona p = test::toy_persona(env, 2, {0});
  Rng rng(5);

  const int empty = find_segment(env, SegmentKind::Empty);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int> segs;
    for (int i = 0; i < env.num_slots(); ++i)
      segs.push_back(static_cast<int>(rng.next_below(env.vocab_size())));
    // ensure at least one empty slot to replace
    segs[0] = empty;
    auto before = toy_sample(env, segs);

    // Replace the empty slot with a penalized segment.
    const SegmentKind kinds[] = {SegmentKind::NameDrop, SegmentKind::SelfSummary};
    segs[0] = find_segment(env, kinds[rng.next_below(2)]);
    auto after = toy_sample(env, segs);

    const double s_before =
        aggregate_final_score(simulated_grm(env, before, p, q, cfg).scores, w);
    const double s_after =
        aggregate_final_score(simulated_grm(env, after, p, q, cfg).scores, w);
    CHECK(s_after <= s_before + 1e-12);
  }
}

TEST_CASE("hackable_scalar_reward rewards the shortcut") {
  const ToyEnv env = test::small_env();
  const Query q = test::toy_query(0);
  const Persona p = test::toy_persona(env, 2, {0});

  const int on_topic = find_segment(env, SegmentKind::OnTopic, 0);
  const int mention0 = find_segment(env, SegmentKind::PersonaMention, 0);
  const int mention1 = find_segment(env, SegmentKind::PersonaMention, 1);
  const int self_summary = find_segment(env, SegmentKind::SelfSummary);
  const int empty = find_segment(env, SegmentKind::Empty);

  auto with_mentions =
      toy_sample(env, {on_topic, mention0, mention1, mention0});
  auto without =
      toy_sample(env, {on_topic, empty, empty, empty});
  CHECK(hackable_scalar_reward(env, with_mentions, p, q) -
            hackable_scalar_reward(env, without, p, q) ==
        doctest::Approx(1.5));

  auto empty_response = toy_sample(env, {empty, empty, empty, empty});
  CHECK(hackable_scalar_reward(env, empty_response, p, q) == 0.0);

  // Appending a self-summary strictly increases it; persona mentions never
  // decrease it.
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> segs;
    for (int i = 0; i < env.num_slots(); ++i)
      segs.push_back(static_cast<int>(rng.next_below(env.vocab_size())));
    segs[1] = empty;
    auto base = toy_sample(env, segs);
    const double r0 = hackable_scalar_reward(env, base, p, q);

    segs[1] = self_summary;
    CHECK(hackable_scalar_reward(env, toy_sample(env, segs), p, q) > r0);

    segs[1] = mention1;
    CHECK(hackable_scalar_reward(env, toy_sample(env, segs), p, q) >= r0);
  }
}
