#pragma once

// Steering input handling: recognizer/keypad/pedal text lines are parsed
// against a phrase grammar into CommandTokens, arbitrated into an ordered
// stream, and dispatched as controller actions.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ler/controller.hpp"
#include "ler/result.hpp"
#include "ler/units.hpp"

namespace ler {

enum class CommandToken : std::uint8_t {
  Left,
  Right,
  Up,
  Down,
  In,
  Out,
  Stop,
  StepMode,
  ContinuousMode,
  ManualOn,
  ManualOff,
  Reset,
};

inline constexpr std::array<std::pair<CommandToken, std::string_view>, 12> kTokenNames{{
    {CommandToken::Left, "LEFT"},
    {CommandToken::Right, "RIGHT"},
    {CommandToken::Up, "UP"},
    {CommandToken::Down, "DOWN"},
    {CommandToken::In, "IN"},
    {CommandToken::Out, "OUT"},
    {CommandToken::Stop, "STOP"},
    {CommandToken::StepMode, "STEP_MODE"},
    {CommandToken::ContinuousMode, "CONTINUOUS_MODE"},
    {CommandToken::ManualOn, "MANUAL_ON"},
    {CommandToken::ManualOff, "MANUAL_OFF"},
    {CommandToken::Reset, "RESET"},
}};

constexpr std::string_view to_string(CommandToken t) noexcept {
  for (const auto& [token, name] : kTokenNames)
    if (token == t) return name;
  return "?";
}

constexpr std::optional<CommandToken> token_from_string(std::string_view name) noexcept {
  for (const auto& [token, n] : kTokenNames)
    if (n == name) return token;
  return std::nullopt;
}

constexpr bool is_motion_token(CommandToken t) noexcept {
  switch (t) {
    case CommandToken::Left:
    case CommandToken::Right:
    case CommandToken::Up:
    case CommandToken::Down:
    case CommandToken::In:
    case CommandToken::Out: return true;
    default: return false;
  }
}

enum class InputSource : std::uint8_t { Voice, Keypad, Pedal };

constexpr std::string_view to_string(InputSource s) noexcept {
  switch (s) {
    case InputSource::Voice: return "VOICE";
    case InputSource::Keypad: return "KEYPAD";
    case InputSource::Pedal: return "PEDAL";
  }
  return "?";
}

constexpr std::optional<InputSource> source_from_string(std::string_view s) noexcept {
  if (s == "VOICE") return InputSource::Voice;
  if (s == "KEYPAD") return InputSource::Keypad;
  if (s == "PEDAL") return InputSource::Pedal;
  return std::nullopt;
}

class GrammarError : public std::runtime_error {
 public:
  GrammarError(std::size_t line, const std::string& what)
      : std::runtime_error("grammar line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Trims, collapses internal whitespace runs to one space and, when
// requested, folds ASCII letters to lower case. Other bytes pass through.
inline std::string normalize_phrase(std::string_view text, bool fold_case) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (u == ' ' || u == '\t' || u == '\r' || u == '\n' || u == '\f' || u == '\v') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(fold_case && u >= 'A' && u <= 'Z' ? static_cast<char>(u - 'A' + 'a') : c);
  }
  return out;
}

struct GrammarConfig {
  std::map<std::string, CommandToken> phrases;  // keys already normalized
  bool case_insensitive = true;
  std::string locale = "en";

  // Adds a phrase; rejects a phrase already bound to a different token.
  void add(std::string_view phrase, CommandToken token) {
    auto key = normalize_phrase(phrase, case_insensitive);
    if (key.empty()) throw std::invalid_argument("empty phrase");
    auto [it, inserted] = phrases.emplace(key, token);
    if (!inserted && it->second != token)
      throw std::invalid_argument("phrase '" + key + "' maps to both " + std::string(to_string(it->second)) +
                                  " and " + std::string(to_string(token)));
  }

  [[nodiscard]] std::vector<CommandToken> unreachable_tokens() const {
    std::vector<CommandToken> missing;
    for (const auto& [token, name] : kTokenNames) {
      const bool found = std::any_of(phrases.begin(), phrases.end(), [t = token](const auto& kv) { return kv.second == t; });
      if (!found) missing.push_back(token);
    }
    return missing;
  }

  friend bool operator==(const GrammarConfig&, const GrammarConfig&) = default;
};

// Grammar file: one "phrase = TOKEN" per line, '#' starts a comment. Two
// directives tune matching: "@case_insensitive = true|false" and
// "@locale = <tag>"; they must precede the first phrase.
inline GrammarConfig load_grammar(std::string_view text) {
  GrammarConfig g;
  bool saw_phrase = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string line = normalize_phrase(raw, false);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string::npos) throw GrammarError(line_no, "expected 'phrase = TOKEN'");
    const std::string key = normalize_phrase(std::string_view(line).substr(0, eq), false);
    const std::string value = normalize_phrase(std::string_view(line).substr(eq + 1), false);
    if (key.empty() || value.empty()) throw GrammarError(line_no, "expected 'phrase = TOKEN'");

    if (key.front() == '@') {
      if (saw_phrase) throw GrammarError(line_no, "directives must precede phrases");
      if (key == "@case_insensitive") {
        if (value != "true" && value != "false") throw GrammarError(line_no, "expected true or false");
        g.case_insensitive = value == "true";
      } else if (key == "@locale") {
        g.locale = value;
      } else {
        throw GrammarError(line_no, "unknown directive '" + key + "'");
      }
      continue;
    }

    const auto token = token_from_string(value);
    if (!token) throw GrammarError(line_no, "unknown token '" + value + "'");
    try {
      g.add(key, *token);
    } catch (const std::invalid_argument& e) {
      throw GrammarError(line_no, e.what());
    }
    saw_phrase = true;
  }

  if (const auto missing = g.unreachable_tokens(); !missing.empty()) {
    std::string names;
    for (auto t : missing) names += (names.empty() ? "" : ", ") + std::string(to_string(t));
    throw GrammarError(line_no, "no phrase for token(s): " + names);
  }
  return g;
}

struct UnknownPhrase {
  std::string text;

  friend bool operator==(const UnknownPhrase&, const UnknownPhrase&) = default;
};

// Exact lookup of the normalized line. Never throws on any input bytes.
inline Result<CommandToken, UnknownPhrase> parse(std::string_view line, const GrammarConfig& grammar) noexcept {
  try {
    const auto key = normalize_phrase(line, grammar.case_insensitive);
    if (auto it = grammar.phrases.find(key); it != grammar.phrases.end()) return it->second;
    return fail(UnknownPhrase{normalize_phrase(line, false)});
  } catch (...) {
    // allocation failure is the only way here
    return fail(UnknownPhrase{});
  }
}

// --- dispatch -------------------------------------------------------------

struct DispatchConfig {
  // UP brings the scope toward vertical (tilt decreases). Flip to invert.
  bool up_decreases_tilt = true;

  friend bool operator==(const DispatchConfig&, const DispatchConfig&) = default;
};

namespace action {
struct Stop {
  friend bool operator==(Stop, Stop) = default;
};
struct SetInputMode {
  MotionMode mode;
  friend bool operator==(SetInputMode, SetInputMode) = default;
};
struct SetManual {
  bool on;
  friend bool operator==(SetManual, SetManual) = default;
};
struct ResetFault {
  friend bool operator==(ResetFault, ResetFault) = default;
};
}  // namespace action

using ControllerAction = std::variant<MotionRequest, action::Stop, action::SetInputMode, action::SetManual, action::ResetFault>;

inline ControllerAction dispatch(CommandToken token, MotionMode mode, const DispatchConfig& cfg = {}) noexcept {
  const int up = cfg.up_decreases_tilt ? -1 : +1;
  switch (token) {
    case CommandToken::Left: return MotionRequest{Axis::Pan, -1, mode};
    case CommandToken::Right: return MotionRequest{Axis::Pan, +1, mode};
    case CommandToken::Up: return MotionRequest{Axis::Tilt, up, mode};
    case CommandToken::Down: return MotionRequest{Axis::Tilt, -up, mode};
    case CommandToken::In: return MotionRequest{Axis::Insertion, +1, mode};
    case CommandToken::Out: return MotionRequest{Axis::Insertion, -1, mode};
    case CommandToken::Stop: return action::Stop{};
    case CommandToken::StepMode: return action::SetInputMode{MotionMode::Step};
    case CommandToken::ContinuousMode: return action::SetInputMode{MotionMode::Continuous};
    case CommandToken::ManualOn: return action::SetManual{true};
    case CommandToken::ManualOff: return action::SetManual{false};
    case CommandToken::Reset: return action::ResetFault{};
  }
  return action::Stop{};
}

// Steering state owned by a session: the controller plus the selected
// CONTINUOUS/STEP input mode.
struct SteeringState {
  ControllerState controller;
  MotionMode input_mode = MotionMode::Continuous;

  friend bool operator==(const SteeringState&, const SteeringState&) = default;
};

// Applies a dispatched action. Controller rejections come back unchanged.
inline Result<SteeringState, ControllerError> apply(SteeringState s, const ControllerAction& a,
                                                     const ControllerConfig& cfg) {
  struct Visitor {
    SteeringState& s;
    const ControllerConfig& cfg;
    Result<SteeringState, ControllerError> operator()(const MotionRequest& req) const {
      auto r = command(s.controller, req, cfg);
      if (!r) return fail(r.error());
      s.controller = *r;
      return s;
    }
    Result<SteeringState, ControllerError> operator()(action::Stop) const {
      s.controller = stop(s.controller);
      return s;
    }
    Result<SteeringState, ControllerError> operator()(action::SetInputMode m) const {
      s.input_mode = m.mode;
      return s;
    }
    Result<SteeringState, ControllerError> operator()(action::SetManual m) const {
      s.controller = set_manual(s.controller, m.on);
      return s;
    }
    Result<SteeringState, ControllerError> operator()(action::ResetFault) const {
      auto r = reset_fault(s.controller, cfg.thermal);
      if (!r) return fail(r.error());
      s.controller = *r;
      return s;
    }
  };
  return std::visit(Visitor{s, cfg}, a);
}

// --- arbitration ----------------------------------------------------------

struct InputEvent {
  Milliseconds time{0};
  InputSource source = InputSource::Voice;
  CommandToken token = CommandToken::Stop;
};

inline constexpr Milliseconds kDefaultDebounce{150};

// Streaming arbiter over a single timestamp-ordered event stream. Events pass
// through in order and are never held back, so a STOP takes effect the
// moment it arrives. A motion token identical to one accepted less than the
// debounce window earlier (from any source) is dropped.
class Arbiter {
 public:
  explicit Arbiter(Milliseconds window = kDefaultDebounce) : window_(window) {}

  std::optional<CommandToken> push(const InputEvent& e) {
    if (is_motion_token(e.token)) {
      auto& last = last_accepted_[static_cast<std::size_t>(e.token)];
      if (last && e.time - *last < window_) return std::nullopt;
      last = e.time;
    }
    return e.token;
  }

  [[nodiscard]] Milliseconds window() const noexcept { return window_; }

 private:
  Milliseconds window_;
  std::array<std::optional<Milliseconds>, kTokenNames.size()> last_accepted_{};
};

inline std::vector<CommandToken> arbitrate(std::span<const InputEvent> events, Milliseconds window = kDefaultDebounce) {
  Arbiter arbiter(window);
  std::vector<CommandToken> out;
  for (const auto& e : events)
    if (auto t = arbiter.push(e)) out.push_back(*t);
  return out;
}

}  // namespace ler
