#pragma once

// Command-line front end: simulate, replay, serve, workspace.
//
// Exit codes:
//   0   success / replay verified
//   2   script error (simulate)
//   3   replay divergence
//   4   log corrupt (replay)
//   5   bad config, scene or limits file
//   64  usage error (unknown subcommand or flag)
//   66  input file missing or output not writable

#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ler/config.hpp"
#include "ler/scene.hpp"
#include "ler/server.hpp"
#include "ler/session.hpp"

namespace ler::cli {

enum ExitCode : int {
  kOk = 0,
  kScriptError = 2,
  kDivergence = 3,
  kLogCorrupt = 4,
  kBadConfig = 5,
  kUsage = 64,
  kNoInput = 66,
};

namespace detail {

inline std::optional<std::string> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// "host:port", ":port" or "port".
inline bool parse_listen(const std::string& s, std::string& host, unsigned short& port) {
  const auto colon = s.rfind(':');
  std::string p = colon == std::string::npos ? s : s.substr(colon + 1);
  host = colon == std::string::npos || colon == 0 ? "127.0.0.1" : s.substr(0, colon);
  if (p.empty()) return false;
  unsigned long v = 0;
  for (char c : p) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + static_cast<unsigned long>(c - '0');
    if (v > 65535) return false;
  }
  port = static_cast<unsigned short>(v);
  return true;
}

}  // namespace detail

struct WorkspaceReport {
  std::uint64_t seed = 1;
  std::size_t samples = 1'000'000;
  JointLimits limits;
  double analytic_volume = 0.0;
  double monte_carlo_volume = 0.0;
  double cone_aperture_deg = 0.0;
  CavityModel cavity;
  double coverage_fraction = 0.0;
  std::vector<TrocarSite> trocars;
  std::vector<Conflict> conflicts;

  [[nodiscard]] std::string to_text() const {
    std::ostringstream o;
    auto row = [&](const char* k, const std::string& v) {
      o << "  " << k << std::string(24 - std::string_view(k).size(), ' ') << v << '\n';
    };
    o << "workspace report\n";
    row("prng", std::string(SampleStream::kName));
    row("seed", std::to_string(seed));
    row("samples", std::to_string(samples));
    row("tilt_max_mdeg", std::to_string(limits.tilt_max.count()));
    row("insertion_max_um", std::to_string(limits.insertion_max.count()));
    row("analytic_volume_mm3", detail::fixed(analytic_volume, 3));
    row("monte_carlo_volume_mm3", detail::fixed(monte_carlo_volume, 3));
    row("monte_carlo_rel_error", detail::fixed((monte_carlo_volume - analytic_volume) / analytic_volume, 6));
    row("cone_aperture_deg", detail::fixed(cone_aperture_deg, 3));
    row("cavity_semi_axes_mm",
        detail::fixed(cavity.ax, 1) + " " + detail::fixed(cavity.ay, 1) + " " + detail::fixed(cavity.az, 1));
    row("cavity_center_mm", detail::fixed(cavity.center.x, 1) + " " + detail::fixed(cavity.center.y, 1) + " " +
                                detail::fixed(cavity.center.z, 1));
    row("coverage_fraction", detail::fixed(coverage_fraction, 6));
    row("clearance_conflicts", std::to_string(conflicts.size()));
    for (const auto& c : conflicts) {
      const auto& name = trocars[c.site].name;
      row("conflict", "site=" + std::to_string(c.site) + (name.empty() ? "" : " name=" + name) +
                          " cause=" + std::string(to_string(c.cause)));
    }
    return o.str();
  }

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["prng"] = SampleStream::kName;
    j["seed"] = seed;
    j["samples"] = samples;
    j["tilt_max_mdeg"] = limits.tilt_max.count();
    j["insertion_max_um"] = limits.insertion_max.count();
    j["analytic_volume_mm3"] = analytic_volume;
    j["monte_carlo_volume_mm3"] = monte_carlo_volume;
    j["cone_aperture_deg"] = cone_aperture_deg;
    j["cavity"] = {{"semi_axes_mm", {cavity.ax, cavity.ay, cavity.az}},
                   {"center_mm", {cavity.center.x, cavity.center.y, cavity.center.z}}};
    j["coverage_fraction"] = coverage_fraction;
    auto conflicts_json = nlohmann::ordered_json::array();
    for (const auto& c : conflicts)
      conflicts_json.push_back({{"site", c.site}, {"name", trocars[c.site].name}, {"cause", to_string(c.cause)}});
    j["clearance_conflicts"] = std::move(conflicts_json);
    return j;
  }
};

inline WorkspaceReport workspace_report(const JointLimits& limits, const Scene& scene, std::size_t samples,
                                        std::uint64_t seed) {
  WorkspaceReport r;
  r.seed = seed;
  r.samples = samples;
  r.limits = limits;
  r.analytic_volume = workspace_volume(limits);
  r.monte_carlo_volume = monte_carlo_workspace_volume(limits, samples, seed);
  r.cone_aperture_deg = sampled_cone_aperture(limits, samples, seed);
  r.cavity = scene.cavity;
  r.coverage_fraction = coverage(scene.cavity, limits, samples, seed);
  r.trocars = scene.trocars;
  r.conflicts = check_clearance(scene.trocars, scene.base);
  return r;
}

inline int cli_run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Deterministic simulator and steering service for a 3-DOF endoscope holder", "ler"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "Run a scenario script and write its session log");
  std::string script_path, out_path;
  simulate->add_option("--script", script_path, "Scenario script")->required();
  simulate->add_option("--out", out_path, "Session log to write")->required();

  auto* replay_cmd = app.add_subcommand("replay", "Verify a session log by re-running its inputs");
  std::string log_path;
  replay_cmd->add_option("--log", log_path, "Session log")->required();

  auto* serve = app.add_subcommand("serve", "Run a live steering session");
  std::string listen = "127.0.0.1:7500", scene_path, serve_limits, grammar_path, record_path;
  double duration_s = 0.0;
  serve->add_option("--listen", listen, "host:port to listen on")->capture_default_str();
  serve->add_option("--scene", scene_path, "Scene description (JSON)");
  serve->add_option("--limits", serve_limits, "Settings file (key = value)");
  serve->add_option("--grammar", grammar_path, "Grammar file (phrase = TOKEN)");
  serve->add_option("--record", record_path, "Write the session log here on exit");
  serve->add_option("--duration", duration_s, "Stop after this many seconds (0 = until interrupted)");

  auto* workspace = app.add_subcommand("workspace", "Workspace volume, coverage and clearance report");
  std::string ws_limits, cavity_path;
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 1;
  bool as_json = false;
  workspace->add_option("--limits", ws_limits, "Settings file (key = value)");
  workspace->add_option("--cavity", cavity_path, "Scene description (JSON): cavity, trocars, base");
  workspace->add_option("--samples", samples, "Monte-Carlo samples")->capture_default_str()->check(CLI::Range(1000ul, 100'000'000ul));
  workspace->add_option("--seed", seed, "PRNG seed")->capture_default_str();
  workspace->add_flag("--json", as_json, "Emit the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  if (*simulate) {
    ScenarioScript script;
    try {
      script = load_script(script_path);
    } catch (const ScriptError& e) {
      err << "script error: " << e.what() << '\n';
      return kScriptError;
    }
    const SessionLog log = run_scenario(script);
    std::ofstream f(out_path, std::ios::binary);
    if (!f) {
      err << "cannot write " << out_path << '\n';
      return kNoInput;
    }
    f << log.to_text();
    out << "simulated " << log.ticks << " ticks, " << log.telemetry_lines().size() << " frames -> " << out_path << '\n';
    return kOk;
  }

  if (*replay_cmd) {
    const auto text = detail::slurp(log_path);
    if (!text) {
      err << "cannot read " << log_path << '\n';
      return kNoInput;
    }
    try {
      const ReplayVerdict v = replay(*text);
      if (v.ok) {
        out << "OK " << v.frames_checked << " frames verified\n";
        return kOk;
      }
      const auto& d = *v.divergence;
      out << "DIVERGED at tick " << d.tick << " field " << d.field << " (line " << d.line << ")\n"
          << "  expected: " << d.expected << "\n"
          << "  actual:   " << d.actual << '\n';
      return kDivergence;
    } catch (const LogCorrupt& e) {
      err << "log corrupt: " << e.what() << '\n';
      return kLogCorrupt;
    }
  }

  if (*serve) {
    ServerOptions opts;
    if (!detail::parse_listen(listen, opts.address, opts.port)) {
      err << "error: --listen expects host:port\n";
      return kUsage;
    }
    try {
      if (!serve_limits.empty()) {
        const auto text = detail::slurp(serve_limits);
        if (!text) {
          err << "cannot read " << serve_limits << '\n';
          return kNoInput;
        }
        opts.session = parse_limits_file(*text);
      }
      if (!grammar_path.empty()) {
        const auto text = detail::slurp(grammar_path);
        if (!text) {
          err << "cannot read " << grammar_path << '\n';
          return kNoInput;
        }
        opts.session.grammar = load_grammar(*text);
        opts.session.grammar_source = grammar_path;
      }
      if (!scene_path.empty()) {
        const auto text = detail::slurp(scene_path);
        if (!text) {
          err << "cannot read " << scene_path << '\n';
          return kNoInput;
        }
        opts.scene = parse_scene(*text);
      }
    } catch (const std::exception& e) {
      err << "config error: " << e.what() << '\n';
      return kBadConfig;
    }
    opts.record = !record_path.empty();
    opts.handle_signals = true;

    std::optional<Server> server;
    try {
      server.emplace(opts);
    } catch (const std::exception& e) {
      err << "cannot listen on " << listen << ": " << e.what() << '\n';
      return kNoInput;
    }
    out << "listening on " << opts.address << ':' << server->port() << std::endl;
    // --duration: stop after the deadline unless a signal got there first.
    std::mutex m;
    std::condition_variable cv;
    bool finished = false;
    std::optional<std::thread> timer;
    if (duration_s > 0.0) {
      timer.emplace([&] {
        std::unique_lock lock(m);
        if (!cv.wait_for(lock, std::chrono::duration<double>(duration_s), [&] { return finished; })) server->stop();
      });
    }
    server->run();
    {
      std::lock_guard lock(m);
      finished = true;
    }
    cv.notify_all();
    if (timer) timer->join();
    if (opts.record) {
      std::ofstream f(record_path, std::ios::binary);
      if (!f) {
        err << "cannot write " << record_path << '\n';
        return kNoInput;
      }
      f << server->log().to_text();
    }
    out << "stopped after " << server->log().ticks << " ticks\n";
    return kOk;
  }

  if (*workspace) {
    JointLimits limits;
    Scene scene;
    try {
      if (!ws_limits.empty()) {
        const auto text = detail::slurp(ws_limits);
        if (!text) {
          err << "cannot read " << ws_limits << '\n';
          return kNoInput;
        }
        limits = parse_limits_file(*text).controller.limits;
      }
      if (!cavity_path.empty()) {
        const auto text = detail::slurp(cavity_path);
        if (!text) {
          err << "cannot read " << cavity_path << '\n';
          return kNoInput;
        }
        scene = parse_scene(*text);
      }
    } catch (const std::exception& e) {
      err << "config error: " << e.what() << '\n';
      return kBadConfig;
    }
    const auto report = workspace_report(limits, scene, samples, seed);
    if (as_json) out << report.to_json().dump(2) << '\n';
    else out << report.to_text();
    return kOk;
  }
  return kUsage;
}

}  // namespace ler::cli
