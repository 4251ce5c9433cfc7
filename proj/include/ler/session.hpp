#pragma once

// Fixed-timestep simulation session with bit-exact record and replay.
//
// Inputs stamped with tick k are applied before the controller advances
// from k to k+1. A telemetry frame is emitted after every advance whose
// resulting tick count is a multiple of the telemetry interval, so a run of
// N ticks at interval 2 produces frames tagged 2, 4, ..., N.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ler/command.hpp"
#include "ler/config.hpp"
#include "ler/controller.hpp"
#include "ler/kinematics.hpp"

namespace ler {

// --- telemetry ---------------------------------------------------------------

struct TelemetryFrame {
  std::int64_t tick = 0;
  JointVector joints;
  Point3 tip;
  Vec3 axis;
  ControlMode mode = ControlMode::Idle;
  std::optional<FaultCause> fault;
  std::optional<Axis> active;
};

inline TelemetryFrame make_frame(std::int64_t tick, const ControllerState& s, const JointLimits& limits) {
  const ScopePose pose = forward_kinematics(s.joints, limits);
  return {tick,
          s.joints,
          pose.tip,
          pose.axis,
          s.mode,
          s.fault_cause,
          s.active ? std::optional<Axis>(s.active->axis) : std::nullopt};
}

namespace detail {

// Fixed-precision decimal; a value that rounds to zero prints unsigned.
inline void append_fixed(std::string& out, double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string_view s(buf);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string_view::npos) s.remove_prefix(1);
  out += s;
}

inline void append_vec(std::string& out, Vec3 v, int decimals) {
  out += '[';
  append_fixed(out, v.x, decimals);
  out += ',';
  append_fixed(out, v.y, decimals);
  out += ',';
  append_fixed(out, v.z, decimals);
  out += ']';
}

template <class E>
void append_optional(std::string& out, const std::optional<E>& v) {
  if (v) {
    out += '"';
    out += to_string(*v);
    out += '"';
  } else {
    out += "null";
  }
}

}  // namespace detail

// Wire form of a frame, without the trailing newline. Joints are integers,
// the tip carries exactly 3 decimals (mm) and the axis exactly 6.
inline std::string to_wire(const TelemetryFrame& f) {
  std::string out;
  out.reserve(220);
  out += R"({"type":"telemetry","tick":)";
  out += std::to_string(f.tick);
  out += R"(,"pan_mdeg":)";
  out += std::to_string(f.joints.pan.count());
  out += R"(,"tilt_mdeg":)";
  out += std::to_string(f.joints.tilt.count());
  out += R"(,"ins_um":)";
  out += std::to_string(f.joints.insertion.count());
  out += R"(,"tip_mm":)";
  detail::append_vec(out, f.tip, 3);
  out += R"(,"axis":)";
  detail::append_vec(out, f.axis, 6);
  out += R"(,"mode":")";
  out += to_string(f.mode);
  out += R"(","fault":)";
  detail::append_optional(out, f.fault);
  out += R"(,"active":)";
  detail::append_optional(out, f.active);
  out += '}';
  return out;
}

// --- session log -------------------------------------------------------------

struct InputRecord {
  std::int64_t tick = 0;
  InputSource source = InputSource::Voice;
  std::string line;

  friend bool operator==(const InputRecord&, const InputRecord&) = default;
};

inline std::string to_wire(const InputRecord& r) {
  nlohmann::ordered_json j;
  j["type"] = "input";
  j["tick"] = r.tick;
  j["source"] = to_string(r.source);
  j["line"] = r.line;
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

inline std::string session_header(const SessionConfig& cfg, std::string_view version = kVersion) {
  nlohmann::ordered_json j;
  j["type"] = "header";
  j["format"] = kLogFormat;
  j["version"] = version;
  j["config"] = config_to_json(cfg);
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

inline std::string end_record(std::int64_t ticks) {
  return R"({"type":"end","ticks":)" + std::to_string(ticks) + "}";
}

// Header line, then input and telemetry lines in the order they happened.
// The end record is produced by to_text().
struct SessionLog {
  std::string header;
  std::vector<std::string> body;
  std::vector<InputRecord> inputs;
  std::int64_t ticks = 0;

  [[nodiscard]] std::string to_text() const {
    std::string out = header;
    out += '\n';
    for (const auto& line : body) {
      out += line;
      out += '\n';
    }
    out += end_record(ticks);
    out += '\n';
    return out;
  }

  [[nodiscard]] std::vector<std::string> telemetry_lines() const {
    std::vector<std::string> out;
    for (const auto& l : body)
      if (l.starts_with(R"({"type":"telemetry")")) out.push_back(l);
    return out;
  }
};

// --- session -----------------------------------------------------------------

struct InputOutcome {
  enum class Status { Applied, Debounced, UnknownPhrase, Rejected };

  Status status = Status::Applied;
  std::int64_t tick = 0;
  std::optional<CommandToken> token;
  std::optional<ControllerError> error;
  std::string text;  // offending phrase for UnknownPhrase
};

// Replaces invalid UTF-8 and control characters so every accepted line can
// be written to a log, a script row or a wire message and read back intact.
inline std::string sanitize_input_line(std::string_view line) {
  std::string escaped = nlohmann::json(std::string(line)).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  std::string out = nlohmann::json::parse(escaped).get<std::string>();
  for (char& c : out)
    if (static_cast<unsigned char>(c) < 0x20 || c == 0x7f) c = ' ';
  return out;
}

class Session {
 public:
  explicit Session(SessionConfig cfg, bool record = true)
      : cfg_(std::move(cfg)), arbiter_(cfg_.debounce), record_(record) {
    cfg_.validate();
    state_.input_mode = cfg_.initial_mode;
    log_.header = session_header(cfg_);
  }

  // Applies one input line at the current tick.
  InputOutcome input(InputSource source, std::string_view raw_line) {
    InputRecord rec{tick_, source, sanitize_input_line(raw_line)};
    if (record_) {
      log_.body.push_back(to_wire(rec));
      log_.inputs.push_back(rec);
    }

    InputOutcome out;
    out.tick = tick_;
    const auto parsed = parse(rec.line, cfg_.grammar);
    if (!parsed) {
      out.status = InputOutcome::Status::UnknownPhrase;
      out.text = parsed.error().text;
      return out;
    }
    out.token = *parsed;
    const InputEvent ev{Milliseconds(tick_ * cfg_.controller.dt.count()), source, *parsed};
    if (!arbiter_.push(ev)) {
      out.status = InputOutcome::Status::Debounced;
      return out;
    }
    auto next = apply(state_, dispatch(*parsed, state_.input_mode, cfg_.dispatch), cfg_.controller);
    if (!next) {
      out.status = InputOutcome::Status::Rejected;
      out.error = next.error();
      return out;
    }
    state_ = *next;
    return out;
  }

  // Advances one tick; returns the frame if this tick is a telemetry tick.
  std::optional<TelemetryFrame> advance() {
    state_.controller = ler::tick(state_.controller, cfg_.controller);
    ++tick_;
    log_.ticks = tick_;
    if (tick_ % cfg_.telemetry_interval != 0) return std::nullopt;
    auto frame = make_frame(tick_, state_.controller, cfg_.controller.limits);
    if (record_) log_.body.push_back(to_wire(frame));
    return frame;
  }

  [[nodiscard]] std::int64_t tick() const noexcept { return tick_; }
  [[nodiscard]] const SteeringState& state() const noexcept { return state_; }
  [[nodiscard]] const SessionConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const SessionLog& log() const noexcept { return log_; }

 private:
  SessionConfig cfg_;
  SteeringState state_;
  Arbiter arbiter_;
  std::int64_t tick_ = 0;
  bool record_;
  SessionLog log_;
};

// --- scenario scripts --------------------------------------------------------

class ScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioScript {
  SessionConfig config;
  std::int64_t ticks = 0;
  std::vector<InputRecord> inputs;  // ticks nondecreasing, all < ticks
};

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::optional<std::int64_t> parse_tick(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v < 0) return std::nullopt;
  return v;
}

}  // namespace detail

inline void validate_script(const ScenarioScript& script) {
  if (script.ticks < 0) throw ScriptError("ticks must be non-negative");
  std::int64_t prev = 0;
  for (const auto& in : script.inputs) {
    if (in.tick < prev) throw ScriptError("input ticks must be nondecreasing (tick " + std::to_string(in.tick) + ")");
    if (in.tick >= script.ticks)
      throw ScriptError("input at tick " + std::to_string(in.tick) + " is beyond the script length");
    prev = in.tick;
  }
  try {
    script.config.validate();
  } catch (const std::invalid_argument& e) {
    throw ScriptError(e.what());
  }
}

// Script file: "key = value" header lines, then rows "tick<TAB>line" or
// "tick<TAB>SOURCE<TAB>line". Lines starting with '#' are comments. The
// "grammar" key names a grammar file relative to `base_dir`, or "builtin".
inline ScenarioScript parse_script(std::string_view text, const std::filesystem::path& base_dir = {}) {
  ScenarioScript script;
  bool have_ticks = false;
  bool in_body = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto err = [&](const std::string& what) { return ScriptError("line " + std::to_string(line_no) + ": " + what); };

  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (raw.empty() || raw.front() == '#') continue;

    if (const auto tab = raw.find('\t'); tab != std::string_view::npos && detail::parse_tick(raw.substr(0, tab))) {
      in_body = true;
      InputRecord rec;
      rec.tick = *detail::parse_tick(raw.substr(0, tab));
      std::string_view rest = raw.substr(tab + 1);
      if (const auto tab2 = rest.find('\t'); tab2 != std::string_view::npos) {
        const auto src = source_from_string(rest.substr(0, tab2));
        if (!src) throw err("unknown input source '" + std::string(rest.substr(0, tab2)) + "'");
        rec.source = *src;
        rest = rest.substr(tab2 + 1);
      }
      rec.line = std::string(rest);
      script.inputs.push_back(std::move(rec));
      continue;
    }

    if (in_body) throw err("expected 'tick<TAB>line' after the first input row");
    const auto line = normalize_phrase(raw, false);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw err("expected 'key = value' or 'tick<TAB>line'");
    const auto key = normalize_phrase(std::string_view(line).substr(0, eq), false);
    const auto value = normalize_phrase(std::string_view(line).substr(eq + 1), false);
    try {
      if (key == "ticks") {
        const auto t = detail::parse_tick(value);
        if (!t) throw err("ticks: expected a non-negative integer");
        script.ticks = *t;
        have_ticks = true;
      } else if (key == "grammar") {
        if (value == "builtin" || value == "builtin:en") {
          script.config.grammar = default_grammar();
          script.config.grammar_source = "builtin:en";
        } else {
          const auto path = base_dir / value;
          std::string body;
          try {
            body = detail::read_file(path);
          } catch (const std::runtime_error&) {
            throw err("grammar file not found: " + path.string());
          }
          try {
            script.config.grammar = load_grammar(body);
          } catch (const GrammarError& e) {
            throw err(std::string("grammar ") + e.what());
          }
          script.config.grammar_source = value;
        }
      } else if (!apply_setting(script.config, key, value)) {
        throw err("unknown header key '" + key + "'");
      }
    } catch (const ConfigError& e) {
      throw err(e.what());
    }
  }
  if (!have_ticks) throw ScriptError("script header must set 'ticks'");
  validate_script(script);
  return script;
}

inline ScenarioScript load_script(const std::filesystem::path& path) {
  std::string text;
  try {
    text = detail::read_file(path);
  } catch (const std::runtime_error& e) {
    throw ScriptError(e.what());
  }
  return parse_script(text, path.parent_path());
}

// Runs the script on the logical clock, as fast as possible.
inline SessionLog run_scenario(const ScenarioScript& script) {
  validate_script(script);
  Session session(script.config);
  std::size_t next = 0;
  for (std::int64_t k = 0; k < script.ticks; ++k) {
    for (; next < script.inputs.size() && script.inputs[next].tick == k; ++next)
      session.input(script.inputs[next].source, script.inputs[next].line);
    session.advance();
  }
  return session.log();
}

// Script equivalent to a recorded session. The grammar is written out as a
// sibling file by save_script(); in memory the config travels as-is.
inline ScenarioScript script_from_log(const SessionLog& log, const SessionConfig& cfg) {
  return {cfg, log.ticks, log.inputs};
}

// Script text that parse_script() reads back to the same script, provided
// the grammar named by config.grammar_source resolves to the same phrases.
inline std::string script_to_text(const ScenarioScript& script) {
  std::string out = "# recorded session\n";
  out += "ticks = " + std::to_string(script.ticks) + "\n";
  out += "grammar = " + (script.config.grammar_source.empty() ? std::string("builtin") : script.config.grammar_source) + "\n";
  const auto j = config_to_json(script.config);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "grammar") continue;
    out += it.key() + " = " + (it.value().is_string() ? it.value().get<std::string>() : it.value().dump()) + "\n";
  }
  for (const auto& in : script.inputs)
    out += std::to_string(in.tick) + "\t" + std::string(to_string(in.source)) + "\t" + in.line + "\n";
  return out;
}

// --- replay ------------------------------------------------------------------

class LogCorrupt : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Divergence {
  std::size_t line = 0;  // 1-based line in the log
  std::int64_t tick = 0;
  std::string field;
  std::string expected;
  std::string actual;
};

struct ReplayVerdict {
  bool ok = true;
  std::size_t frames_checked = 0;
  std::optional<Divergence> divergence;
};

namespace detail {

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

inline std::optional<nlohmann::ordered_json> try_parse(std::string_view line) {
  auto j = nlohmann::ordered_json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

inline std::int64_t line_tick(const std::optional<nlohmann::ordered_json>& j) {
  if (!j) return 0;
  if (j->contains("tick") && (*j)["tick"].is_number_integer()) return (*j)["tick"].get<std::int64_t>();
  if (j->contains("ticks") && (*j)["ticks"].is_number_integer()) return (*j)["ticks"].get<std::int64_t>();
  return 0;
}

inline std::string first_differing_field(const std::optional<nlohmann::ordered_json>& expected,
                                         const std::optional<nlohmann::ordered_json>& actual) {
  if (!expected || !actual) return "<line>";
  for (auto it = expected->begin(); it != expected->end(); ++it) {
    if (!actual->contains(it.key()) || (*actual)[it.key()] != it.value()) return it.key();
  }
  for (auto it = actual->begin(); it != actual->end(); ++it)
    if (!expected->contains(it.key())) return it.key();
  return "<format>";
}

}  // namespace detail

// Re-runs the inputs recorded in `log_text` under the header's config and
// checks every regenerated line byte-for-byte. Throws LogCorrupt when the
// header or end record cannot be read.
inline ReplayVerdict replay(std::string_view log_text) {
  const auto lines = detail::split_lines(log_text);
  if (lines.empty()) throw LogCorrupt("log is empty");

  const auto header = detail::try_parse(lines.front());
  if (!header || !header->contains("type") || (*header)["type"] != "header" || !header->contains("config"))
    throw LogCorrupt("first line is not a session header");
  SessionConfig cfg;
  std::string version(kVersion);
  try {
    cfg = config_from_json((*header)["config"]);
    if (header->contains("version")) version = (*header)["version"].get<std::string>();
  } catch (const ConfigError& e) {
    throw LogCorrupt(std::string("header config: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw LogCorrupt(std::string("header config: ") + e.what());
  }

  ScenarioScript script{cfg, -1, {}};
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto j = detail::try_parse(lines[i]);
    if (!j || !j->contains("type")) continue;
    const auto& type = (*j)["type"];
    if (type == "input") {
      const auto src = j->contains("source") && (*j)["source"].is_string()
                           ? source_from_string((*j)["source"].get<std::string>())
                           : std::nullopt;
      if (!src || !j->contains("tick") || !(*j)["tick"].is_number_integer() || !j->contains("line") ||
          !(*j)["line"].is_string())
        continue;  // a damaged input line shows up as a divergence below
      script.inputs.push_back({(*j)["tick"].get<std::int64_t>(), *src, (*j)["line"].get<std::string>()});
    } else if (type == "end" && j->contains("ticks") && (*j)["ticks"].is_number_integer()) {
      script.ticks = (*j)["ticks"].get<std::int64_t>();
    }
  }
  if (script.ticks < 0) throw LogCorrupt("log has no end record");
  std::stable_sort(script.inputs.begin(), script.inputs.end(),
                   [](const InputRecord& a, const InputRecord& b) { return a.tick < b.tick; });
  std::erase_if(script.inputs, [&](const InputRecord& r) { return r.tick < 0 || r.tick >= script.ticks; });

  SessionLog regenerated = run_scenario(script);
  regenerated.header = session_header(cfg, version);
  const std::string regen_text = regenerated.to_text();
  const auto expected = detail::split_lines(regen_text);

  ReplayVerdict verdict;
  const std::size_t n = std::max(expected.size(), lines.size());
  for (std::size_t i = 0; i < n; ++i) {
    const bool have_e = i < expected.size();
    const bool have_a = i < lines.size();
    if (have_e && have_a && expected[i] == lines[i]) {
      if (lines[i].starts_with(R"({"type":"telemetry")")) ++verdict.frames_checked;
      continue;
    }
    Divergence d;
    d.line = i + 1;
    if (have_e) d.expected = std::string(expected[i]);
    if (have_a) d.actual = std::string(lines[i]);
    const auto je = have_e ? detail::try_parse(expected[i]) : std::nullopt;
    const auto ja = have_a ? detail::try_parse(lines[i]) : std::nullopt;
    d.tick = have_e ? detail::line_tick(je) : detail::line_tick(ja);
    d.field = !have_e ? "<extra>" : !have_a ? "<missing>" : detail::first_differing_field(je, ja);
    verdict.ok = false;
    verdict.divergence = std::move(d);
    break;
  }
  return verdict;
}

}  // namespace ler
