#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "ler/command.hpp"
#include "ler/default_grammar.hpp"

namespace ler {
namespace {

using namespace ler::literals;
using CT = CommandToken;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Grammar, EmbeddedCopyMatchesDataFile) {
  const auto text = slurp(LER_DATA_DIR "/grammar/en.grammar");
  ASSERT_FALSE(text.empty());
  EXPECT_EQ(text, kDefaultGrammarText);
}

TEST(Grammar, DefaultCoversEveryToken) {
  const auto g = default_grammar();
  EXPECT_TRUE(g.unreachable_tokens().empty());
  EXPECT_TRUE(g.case_insensitive);
  EXPECT_EQ(g.locale, "en");
}

TEST(Parse, Examples) {
  const auto g = default_grammar();
  EXPECT_EQ(parse("zoom in", g).value(), CT::In);
  EXPECT_EQ(parse("  Zoom   IN \r", g).value(), CT::In);
  EXPECT_EQ(parse("back", g).value(), CT::Out);
  EXPECT_EQ(parse("pedal", g).value(), CT::Stop);
  EXPECT_EQ(parse("STEP", g).value(), CT::StepMode);
  EXPECT_EQ(parse("motors off", g).value(), CT::ManualOn);

  const auto bad = parse("  zoom   sideways ", g);
  ASSERT_FALSE(bad.ok());
  EXPECT_EQ(bad.error().text, "zoom sideways");
  EXPECT_FALSE(parse("", g).ok());
  EXPECT_FALSE(parse("zoomin", g).ok());
}

TEST(Parse, TotalOverArbitraryBytes) {
  const auto g = default_grammar();
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20'000; ++i) {
    std::string line(rng() % 24, '\0');
    for (auto& c : line) c = static_cast<char>(rng() & 0xff);
    const auto r = parse(line, g);
    if (r.ok()) {
      // only a vocabulary phrase can be accepted
      EXPECT_TRUE(g.phrases.contains(normalize_phrase(line, true)));
    }
  }
}

TEST(Parse, CaseSensitiveGrammar) {
  std::string text = "@case_insensitive = false\n";
  for (const auto& [t, name] : kTokenNames) text += std::string(name) + " = " + std::string(name) + "\n";
  const auto g = load_grammar(text);
  EXPECT_EQ(parse("LEFT", g).value(), CT::Left);
  EXPECT_FALSE(parse("left", g).ok());
}

TEST(LoadGrammar, RejectsConflictsUnknownTokensAndGaps) {
  const std::string base(kDefaultGrammarText);
  try {
    load_grammar(base + "zoom in = OUT\n");
    FAIL() << "conflict accepted";
  } catch (const GrammarError& e) {
    EXPECT_NE(std::string(e.what()).find("zoom in"), std::string::npos);
  }
  EXPECT_NO_THROW(load_grammar(base + "ZOOM  in = IN\n"));  // same binding again is fine
  EXPECT_THROW(load_grammar(base + "wiggle = WIGGLE\n"), GrammarError);
  EXPECT_THROW(load_grammar(base + "no equals sign\n"), GrammarError);
  EXPECT_THROW(load_grammar(base + "@locale = fr\n"), GrammarError);
  EXPECT_THROW(load_grammar("@colour = blue\n" + base), GrammarError);
  EXPECT_THROW(load_grammar("left = LEFT\n"), GrammarError);
  EXPECT_THROW(load_grammar(""), GrammarError);
  try {
    load_grammar("a = LEFT\n\nb = WHAT\n");
    FAIL();
  } catch (const GrammarError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Dispatch, TableMatchesConvention) {
  const auto m = MotionMode::Continuous;
  EXPECT_EQ(std::get<MotionRequest>(dispatch(CT::Left, m)), (MotionRequest{Axis::Pan, -1, m}));
  EXPECT_EQ(std::get<MotionRequest>(dispatch(CT::Right, m)), (MotionRequest{Axis::Pan, +1, m}));
  EXPECT_EQ(std::get<MotionRequest>(dispatch(CT::Up, m)), (MotionRequest{Axis::Tilt, -1, m}));
  EXPECT_EQ(std::get<MotionRequest>(dispatch(CT::Down, m)), (MotionRequest{Axis::Tilt, +1, m}));
  EXPECT_EQ(std::get<MotionRequest>(dispatch(CT::In, MotionMode::Step)),
            (MotionRequest{Axis::Insertion, +1, MotionMode::Step}));
  EXPECT_EQ(std::get<MotionRequest>(dispatch(CT::Out, m)), (MotionRequest{Axis::Insertion, -1, m}));
  EXPECT_TRUE(std::holds_alternative<action::Stop>(dispatch(CT::Stop, m)));
  EXPECT_EQ(std::get<action::SetInputMode>(dispatch(CT::StepMode, m)).mode, MotionMode::Step);
  EXPECT_EQ(std::get<action::SetInputMode>(dispatch(CT::ContinuousMode, m)).mode, MotionMode::Continuous);
  EXPECT_TRUE(std::get<action::SetManual>(dispatch(CT::ManualOn, m)).on);
  EXPECT_FALSE(std::get<action::SetManual>(dispatch(CT::ManualOff, m)).on);
  EXPECT_TRUE(std::holds_alternative<action::ResetFault>(dispatch(CT::Reset, m)));

  const DispatchConfig flipped{.up_decreases_tilt = false};
  EXPECT_EQ(std::get<MotionRequest>(dispatch(CT::Up, m, flipped)).direction, +1);
  EXPECT_EQ(std::get<MotionRequest>(dispatch(CT::Down, m, flipped)).direction, -1);
}

TEST(Apply, InputModeSelectsStepping) {
  const ControllerConfig cfg;
  SteeringState s;
  s = apply(s, dispatch(CT::StepMode, s.input_mode), cfg).value();
  s = apply(s, dispatch(CT::Right, s.input_mode), cfg).value();
  EXPECT_EQ(s.controller.mode, ControlMode::Stepping);
  s = apply(s, dispatch(CT::Stop, s.input_mode), cfg).value();
  EXPECT_EQ(s.controller.mode, ControlMode::Idle);
  s = apply(s, dispatch(CT::ManualOn, s.input_mode), cfg).value();
  const auto r = apply(s, dispatch(CT::Left, s.input_mode), cfg);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.error(), ControllerError::RejectedManual);
}

InputEvent ev(std::int64_t ms, CT t, InputSource src = InputSource::Voice) { return {Milliseconds(ms), src, t}; }

TEST(Arbitrate, Examples) {
  std::vector<InputEvent> events{ev(0, CT::Left), ev(100, CT::Left, InputSource::Keypad), ev(200, CT::Left)};
  EXPECT_EQ(arbitrate(events), (std::vector<CT>{CT::Left, CT::Left}));

  events = {ev(0, CT::Left), ev(150, CT::Left)};
  EXPECT_EQ(arbitrate(events), (std::vector<CT>{CT::Left, CT::Left}));

  events = {ev(0, CT::Left), ev(50, CT::Right), ev(100, CT::Left)};
  EXPECT_EQ(arbitrate(events), (std::vector<CT>{CT::Left, CT::Right}));

  events = {ev(0, CT::Stop), ev(1, CT::Stop, InputSource::Pedal), ev(2, CT::Stop)};
  EXPECT_EQ(arbitrate(events), (std::vector<CT>{CT::Stop, CT::Stop, CT::Stop}));

  events = {ev(0, CT::In), ev(10, CT::Stop), ev(20, CT::In)};
  EXPECT_EQ(arbitrate(events), (std::vector<CT>{CT::In, CT::Stop}));
}

TEST(Arbitrate, Properties) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 2'000; ++trial) {
    std::vector<InputEvent> events;
    std::int64_t t = 0;
    const int n = static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) {
      t += static_cast<std::int64_t>(rng() % 200);
      events.push_back(ev(t, static_cast<CT>(rng() % kTokenNames.size()), static_cast<InputSource>(rng() % 3)));
    }
    const auto out = arbitrate(events);

    // Output is a subsequence of the input tokens.
    std::size_t j = 0;
    for (const auto& e : events)
      if (j < out.size() && out[j] == e.token) ++j;
    ASSERT_EQ(j, out.size());

    // Every STOP and every non-motion token survives.
    const auto count = [](const auto& v, auto pred) { return std::count_if(v.begin(), v.end(), pred); };
    ASSERT_EQ(count(out, [](CT x) { return !is_motion_token(x); }),
              count(events, [](const InputEvent& e) { return !is_motion_token(e.token); }));

    // Reference: greedy per-token filter written independently.
    std::vector<CT> expected;
    std::map<CT, std::int64_t> last;
    for (const auto& e : events) {
      if (is_motion_token(e.token)) {
        auto it = last.find(e.token);
        if (it != last.end() && e.time.count() - it->second < 150) continue;
        last[e.token] = e.time.count();
      }
      expected.push_back(e.token);
    }
    ASSERT_EQ(out, expected);

    // Zero window is the identity.
    std::vector<CT> all;
    for (const auto& e : events) all.push_back(e.token);
    ASSERT_EQ(arbitrate(events, 0_ms), all);
  }
}

TEST(Tokens, NamesRoundTrip) {
  for (const auto& [t, name] : kTokenNames) {
    EXPECT_EQ(token_from_string(name), t);
    EXPECT_EQ(to_string(t), name);
  }
  EXPECT_FALSE(token_from_string("left"));
  EXPECT_EQ(source_from_string("PEDAL"), InputSource::Pedal);
  EXPECT_FALSE(source_from_string("MIND"));
}

}  // namespace
}  // namespace ler
