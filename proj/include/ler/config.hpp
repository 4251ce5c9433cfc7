#pragma once

// Session configuration and its two text forms: the flat "key = value"
// settings used by scenario headers and limits files, and the JSON object
// embedded in session-log headers.

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ler/command.hpp"
#include "ler/controller.hpp"
#include "ler/default_grammar.hpp"

namespace ler {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::string_view kLogFormat = "ler-session-log/1";

struct SessionConfig {
  ControllerConfig controller;
  DispatchConfig dispatch;
  GrammarConfig grammar = default_grammar();
  std::string grammar_source = "builtin:en";
  MotionMode initial_mode = MotionMode::Continuous;
  std::int64_t telemetry_interval = 2;  // ticks per telemetry frame
  Milliseconds debounce = kDefaultDebounce;
  std::uint64_t seed = 0;

  void validate() const {
    controller.validate();
    if (telemetry_interval <= 0) throw std::invalid_argument("telemetry_interval must be positive");
    if (debounce.count() < 0) throw std::invalid_argument("debounce_ms must be non-negative");
    if (const auto missing = grammar.unreachable_tokens(); !missing.empty())
      throw std::invalid_argument("grammar has no phrase for " + std::string(to_string(missing.front())));
  }

  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::int64_t parse_int(std::string_view key, std::string_view v) {
  std::int64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(std::string(key) + ": expected true or false");
}

}  // namespace detail

// Applies one setting. Returns false if the key is not a session setting so
// callers can layer their own keys (e.g. a script's "ticks").
inline bool apply_setting(SessionConfig& cfg, std::string_view key, std::string_view value) {
  auto& c = cfg.controller;
  auto i = [&] { return detail::parse_int(key, value); };
  if (key == "dt_ms") c.dt = Milliseconds(i());
  else if (key == "tilt_max_mdeg") c.limits.tilt_max = Millidegrees(i());
  else if (key == "insertion_max_um") c.limits.insertion_max = Micrometers(i());
  else if (key == "pan_speed_mdeg_s") c.limits.pan_speed_max = MillidegreesPerSecond(i());
  else if (key == "tilt_speed_mdeg_s") c.limits.tilt_speed_max = MillidegreesPerSecond(i());
  else if (key == "insertion_speed_um_s") c.limits.insertion_speed_max = MicrometersPerSecond(i());
  else if (key == "angular_step_mdeg") c.steps.angular = Millidegrees(i());
  else if (key == "insertion_step_um") c.steps.insertion = Micrometers(i());
  else if (key == "thermal_charge_uu_s") c.thermal.charge_per_s = i();
  else if (key == "thermal_decay_uu_s") c.thermal.decay_per_s = i();
  else if (key == "thermal_budget_uu") c.thermal.budget = i();
  else if (key == "telemetry_interval") cfg.telemetry_interval = i();
  else if (key == "debounce_ms") cfg.debounce = Milliseconds(i());
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(i());
  else if (key == "up_decreases_tilt") cfg.dispatch.up_decreases_tilt = detail::parse_bool(key, value);
  else if (key == "input_mode") {
    if (value == "continuous") cfg.initial_mode = MotionMode::Continuous;
    else if (value == "step") cfg.initial_mode = MotionMode::Step;
    else throw ConfigError("input_mode: expected continuous or step");
  } else {
    return false;
  }
  return true;
}

struct Setting {
  std::size_t line = 0;
  std::string key;
  std::string value;
};

// Splits "key = value" text into settings; '#' lines and blanks are skipped.
inline std::vector<Setting> read_settings(std::string_view text) {
  std::vector<Setting> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    const auto line = normalize_phrase(raw, false);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    out.push_back({line_no, normalize_phrase(std::string_view(line).substr(0, eq), false),
                   normalize_phrase(std::string_view(line).substr(eq + 1), false)});
  }
  return out;
}

// Limits file for the workspace report: session settings only.
inline SessionConfig parse_limits_file(std::string_view text) {
  SessionConfig cfg;
  for (const auto& s : read_settings(text))
    if (!apply_setting(cfg, s.key, s.value))
      throw ConfigError("line " + std::to_string(s.line) + ": unknown setting '" + s.key + "'");
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

// --- JSON form --------------------------------------------------------------

inline nlohmann::ordered_json config_to_json(const SessionConfig& cfg) {
  const auto& c = cfg.controller;
  nlohmann::ordered_json j;
  j["dt_ms"] = c.dt.count();
  j["telemetry_interval"] = cfg.telemetry_interval;
  j["debounce_ms"] = cfg.debounce.count();
  j["seed"] = cfg.seed;
  j["input_mode"] = cfg.initial_mode == MotionMode::Continuous ? "continuous" : "step";
  j["up_decreases_tilt"] = cfg.dispatch.up_decreases_tilt;
  j["tilt_max_mdeg"] = c.limits.tilt_max.count();
  j["insertion_max_um"] = c.limits.insertion_max.count();
  j["pan_speed_mdeg_s"] = c.limits.pan_speed_max.count();
  j["tilt_speed_mdeg_s"] = c.limits.tilt_speed_max.count();
  j["insertion_speed_um_s"] = c.limits.insertion_speed_max.count();
  j["angular_step_mdeg"] = c.steps.angular.count();
  j["insertion_step_um"] = c.steps.insertion.count();
  j["thermal_charge_uu_s"] = c.thermal.charge_per_s;
  j["thermal_decay_uu_s"] = c.thermal.decay_per_s;
  j["thermal_budget_uu"] = c.thermal.budget;
  auto phrases = nlohmann::ordered_json::array();
  for (const auto& [phrase, token] : cfg.grammar.phrases) phrases.push_back({phrase, to_string(token)});
  j["grammar"] = {{"source", cfg.grammar_source},
                  {"locale", cfg.grammar.locale},
                  {"case_insensitive", cfg.grammar.case_insensitive},
                  {"phrases", std::move(phrases)}};
  return j;
}

template <class Json>
SessionConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config: expected an object");
  SessionConfig cfg;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    if (key == "grammar") continue;
    std::string text;
    if (v.is_boolean()) text = v.template get<bool>() ? "true" : "false";
    else if (v.is_number_integer()) text = std::to_string(v.template get<std::int64_t>());
    else if (v.is_string()) text = v.template get<std::string>();
    else throw ConfigError("config." + key + ": unsupported value");
    if (!apply_setting(cfg, key, text)) throw ConfigError("config: unknown setting '" + key + "'");
  }
  if (j.contains("grammar")) {
    const auto& g = j["grammar"];
    if (!g.is_object() || !g.contains("phrases") || !g["phrases"].is_array())
      throw ConfigError("config.grammar: expected {source, locale, case_insensitive, phrases}");
    GrammarConfig grammar;
    if (g.contains("case_insensitive")) grammar.case_insensitive = g["case_insensitive"].template get<bool>();
    if (g.contains("locale")) grammar.locale = g["locale"].template get<std::string>();
    for (const auto& entry : g["phrases"]) {
      if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() || !entry[1].is_string())
        throw ConfigError("config.grammar.phrases: expected [phrase, TOKEN] pairs");
      const auto token = token_from_string(entry[1].template get<std::string>());
      if (!token) throw ConfigError("config.grammar.phrases: unknown token");
      try {
        grammar.add(entry[0].template get<std::string>(), *token);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config.grammar.phrases: ") + e.what());
      }
    }
    cfg.grammar = std::move(grammar);
    cfg.grammar_source = g.contains("source") ? g["source"].template get<std::string>() : "";
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

}  // namespace ler
