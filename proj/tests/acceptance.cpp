// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ler/ler.hpp"
#include "oracles.hpp"

namespace {

using namespace ler;
using namespace ler::literals;

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

ScenarioScript load(const char* name) { return load_script(std::string(LER_DATA_DIR "/scenarios/") + name); }

std::int64_t field(const std::string& frame, const char* key) {
  return nlohmann::json::parse(frame)[key].get<std::int64_t>();
}

Verdict speed() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();

  // Ticks of continuous RIGHT until pan has travelled a full turn.
  Session pan(SessionConfig{}, false);
  pan.input(InputSource::Voice, "right");
  std::int64_t travelled = 0, ticks = 0;
  while (travelled < 360'000 && ticks < 10'000) {
    const auto before = pan.state().controller.joints.pan.count();
    pan.advance();
    ++ticks;
    travelled += (pan.state().controller.joints.pan.count() - before + 360'000) % 360'000;
  }
  v.require(ticks == 480 && travelled == 360'000, "pan turn took " + std::to_string(ticks) + " ticks");
  v.require(pan.state().controller.joints.pan == 0_mdeg, "pan did not wrap to 0");

  Session zoom(SessionConfig{}, false);
  zoom.input(InputSource::Voice, "zoom in");
  ticks = 0;
  while (zoom.state().controller.joints.insertion < 200_mm && ticks < 10'000) {
    zoom.advance();
    ++ticks;
  }
  v.require(ticks == 250, "insertion took " + std::to_string(ticks) + " ticks");

  // Same numbers from the shipped scripts, as logged.
  const auto pan_frames = run_scenario(load("pan_360.script")).telemetry_lines();
  v.require(field(pan_frames[478 / 2 - 1], "pan_mdeg") == 358'500 && field(pan_frames[480 / 2 - 1], "pan_mdeg") == 0,
            "pan_360.script frames");
  const auto zoom_frames = run_scenario(load("zoom_full.script")).telemetry_lines();
  v.require(field(zoom_frames[248 / 2 - 1], "ins_um") == 198'400 && field(zoom_frames[250 / 2 - 1], "ins_um") == 200'000,
            "zoom_full.script frames");

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.require(secs < 1.0, "runtime " + std::to_string(secs) + " s");
  if (v.pass) v.detail = "360 deg in 480 ticks, 200 mm in 250 ticks, " + std::to_string(secs).substr(0, 5) + " s";
  return v;
}

Verdict range_fuzz() {
  Verdict v;
  const SessionConfig cfg;
  Session s(cfg, false);
  std::vector<std::string> phrases;
  for (const auto& [phrase, token] : cfg.grammar.phrases) phrases.push_back(phrase);
  const std::vector<std::string> motions{"left", "right", "up", "down", "in", "out"};
  std::mt19937_64 rng(2024);
  std::int64_t max_tilt = 0, max_ins = 0, wraps = 0, ticks = 0;
  for (int i = 0; i < 100'000 && v.pass; ++i) {
    // Bias toward motion so limits and the 0/360 seam are actually hit.
    const auto& line = (rng() % 3 == 0) ? phrases[rng() % phrases.size()] : motions[rng() % motions.size()];
    s.input(static_cast<InputSource>(rng() % 3), line);
    const int n = static_cast<int>(rng() % 120);
    for (int k = 0; k < n; ++k) {
      const auto before = s.state().controller;
      s.advance();
      ++ticks;
      const auto& after = s.state().controller;
      const auto& j = after.joints;
      v.require(j.tilt >= 0_mdeg && j.tilt <= 80_deg, "tilt out of range");
      v.require(j.insertion >= 0_um && j.insertion <= 200_mm, "insertion out of range");
      v.require(j.pan >= 0_mdeg && j.pan < 360_deg, "pan not wrapped");
      if (before.active && before.active->axis == Axis::Pan && (before.mode == ControlMode::Moving)) {
        const auto expect = ((before.joints.pan.count() + before.active->direction * 750) % 360'000 + 360'000) % 360'000;
        v.require(j.pan.count() == expect, "pan step wrong at tick " + std::to_string(s.tick()));
        wraps += std::abs(j.pan.count() - before.joints.pan.count()) > 180'000;
      }
      max_tilt = std::max(max_tilt, j.tilt.count());
      max_ins = std::max(max_ins, j.insertion.count());
    }
  }
  v.require(max_tilt == 80'000 && max_ins == 200'000, "fuzz never reached the limits");
  v.require(wraps > 0, "fuzz never crossed 0/360");
  if (v.pass)
    v.detail = "1e5 commands, " + std::to_string(ticks) + " ticks, limits reached, " + std::to_string(wraps) +
               " seam crossings";
  return v;
}

Verdict fk_ik() {
  Verdict v;
  const JointLimits limits;
  std::mt19937_64 rng(77);
  const int n = 20'000;
  for (int i = 0; i < n && v.pass; ++i) {
    auto j = test::random_joints(rng, limits);
    if (j.tilt.count() == 0) j.tilt = 1_mdeg;
    if (j.insertion.count() == 0) j.insertion = 1_um;
    const auto tip = forward_kinematics(j, limits).tip;
    const auto oracle = test::rotation_oracle_tip(j);
    v.require(std::abs(tip.x - oracle.x) < 1e-9 && std::abs(tip.y - oracle.y) < 1e-9 && std::abs(tip.z - oracle.z) < 1e-9,
              "FK disagrees with rotation oracle");
    const auto r = inverse_kinematics(tip, {}, limits);
    v.require(r.ok(), "IK failed on a reachable tip");
    if (!r) break;
    v.require(test::pan_distance(r->pan, j.pan) <= 1 && std::abs((r->tilt - j.tilt).count()) <= 1 &&
                  std::abs((r->insertion - j.insertion).count()) <= 1,
              "round trip beyond one quantum");
  }
  for (std::int64_t pan : {0, 1, 123'456, 359'999}) {
    const auto r = inverse_kinematics({0, 0, -100}, {Millidegrees(pan), 30_deg, 50_mm}, limits);
    v.require(r.ok() && r->pan.count() == pan && r->tilt == 0_mdeg, "singular axis changed pan");
  }
  if (v.pass) v.detail = std::to_string(n) + " random joints within one quantum, singular pan kept";
  return v;
}

Verdict workspace() {
  Verdict v;
  const JointLimits limits;
  const double analytic = workspace_volume(limits);
  const double mc = monte_carlo_workspace_volume(limits, 1'000'000, 1);
  const double oracle_mc = test::hemisphere_monte_carlo_volume(limits, 1'000'000, 99);
  const double aperture = sampled_cone_aperture(limits, 1'000'000, 1);
  v.require(std::abs(analytic / 1.3845e7 - 1) < 1e-4, "analytic volume " + std::to_string(analytic));
  v.require(std::abs(mc / analytic - 1) < 0.01, "MC volume " + std::to_string(mc));
  v.require(std::abs(oracle_mc / analytic - 1) < 0.01, "oracle MC volume " + std::to_string(oracle_mc));
  v.require(std::abs(aperture - 160.0) <= 0.1, "aperture " + std::to_string(aperture));
  if (v.pass) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "analytic %.1f mm3, MC %+.3f%%, aperture %.3f deg", analytic,
                  100 * (mc / analytic - 1), aperture);
    v.detail = buf;
  }
  return v;
}

Verdict pelvic_depth() {
  Verdict v;
  const JointLimits limits;
  int checked = 0;
  for (int tilt = 0; tilt <= 80; tilt += 10)
    for (int pan = 0; pan < 360; pan += 45) {
      const auto target = forward_kinematics({Millidegrees(pan * 1000), Millidegrees(tilt * 1000), 0_um}).axis;
      const auto r = inverse_kinematics(250.0 * target, {}, limits);
      v.require(!r.ok() && r.error() == UnreachableReason::InsertionOutOfRange,
                "250 mm target not rejected as InsertionOutOfRange");
      ++checked;
    }
  // A pelvic region beyond the insertion limit is never covered.
  v.require(coverage(CavityModel{40, 40, 20, {0, 0, -215}}, limits, 2'000, 1) == 0.0, "deep pelvis reported reachable");
  if (v.pass) v.detail = std::to_string(checked) + " targets at 250 mm -> InsertionOutOfRange";
  return v;
}

Verdict thermal() {
  Verdict v;
  Session s(SessionConfig{}, false);
  s.input(InputSource::Voice, "right");
  while (s.tick() < 6'000) s.advance();
  v.require(s.state().controller.mode == ControlMode::Moving, "faulted at or before 60 s");
  s.advance();
  v.require(s.state().controller.mode == ControlMode::Fault, "no fault after 60 s of motion");
  const std::int64_t fault_tick = s.tick();

  const auto refused = s.input(InputSource::Voice, "left");
  v.require(refused.status == InputOutcome::Status::Rejected && refused.error == ControllerError::RejectedFault,
            "motion accepted during fault");
  const auto wait = ticks_until_clearable(s.state().controller, s.config().controller);
  v.require(wait > 0, "fault clearable immediately");
  while (s.tick() < fault_tick + wait - 1) s.advance();
  const auto early = s.input(InputSource::Voice, "reset");
  v.require(early.status == InputOutcome::Status::Rejected && early.error == ControllerError::FaultNotClearable,
            "reset accepted before cooling");
  s.advance();
  const auto ok = s.input(InputSource::Voice, "reset");
  v.require(ok.status == InputOutcome::Status::Applied && s.state().controller.mode == ControlMode::Idle,
            "reset refused after cooling");
  // The documented decay: heat above half the budget drains at decay_per_s.
  const auto& t = s.config().controller.thermal;
  const std::int64_t expected_wait = (60'010'000 - t.clear_level()) / (t.decay_per_s / 100) + 1;
  v.require(wait == expected_wait, "cool-down " + std::to_string(wait) + " ticks");

  // The shipped script exercises the same path end to end.
  const auto frames = run_scenario(load("thermal.script")).telemetry_lines();
  v.require(nlohmann::json::parse(frames[6'100 / 2 - 1])["mode"] == "FAULT", "thermal.script did not fault");
  v.require(nlohmann::json::parse(frames.back())["mode"] == "IDLE", "thermal.script did not recover");
  if (v.pass)
    v.detail = "FAULT at tick " + std::to_string(fault_tick) + " (60.01 s), reset after " + std::to_string(wait) +
               " idle ticks";
  return v;
}

Verdict determinism() {
  Verdict v;
  std::size_t frames = 0;
  std::string sample;
  for (const char* name : {"pan_360.script", "zoom_full.script", "thermal.script", "mixed.script"}) {
    const auto a = run_scenario(load(name)).to_text();
    const auto b = run_scenario(load(name)).to_text();
    v.require(a == b, std::string(name) + " not byte-identical");
    const auto r = replay(a);
    v.require(r.ok, std::string(name) + " replay diverged");
    frames += r.frames_checked;
    if (std::string(name) == "mixed.script") sample = a;
  }

  // Single-bit flips in telemetry lines must be caught at the tick of the
  // flipped frame: every bit of one frame, plus random bits elsewhere.
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // [begin, end) of telemetry lines
  for (std::size_t pos = 0; pos < sample.size();) {
    const auto nl = sample.find('\n', pos);
    if (sample.compare(pos, 20, R"({"type":"telemetry",)") == 0) spans.emplace_back(pos, nl);
    pos = nl + 1;
  }
  auto tick_of = [&](std::size_t begin) {
    return nlohmann::json::parse(sample.substr(begin, sample.find('\n', begin) - begin))["tick"].get<std::int64_t>();
  };
  std::size_t mutations = 0;
  auto check = [&](std::size_t byte, int bit, std::size_t line_begin) {
    std::string m = sample;
    m[byte] = static_cast<char>(m[byte] ^ (1 << bit));
    ++mutations;
    const auto r = replay(m);
    v.require(!r.ok && r.divergence && r.divergence->tick == tick_of(line_begin),
              "flip at byte " + std::to_string(byte) + " bit " + std::to_string(bit) + " not reported at its tick");
  };
  const auto [b0, e0] = spans[spans.size() / 3];
  for (std::size_t i = b0; i < e0 && v.pass; ++i)
    for (int bit = 0; bit < 8 && v.pass; ++bit) check(i, bit, b0);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1'000 && v.pass; ++i) {
    const auto [b, e] = spans[rng() % spans.size()];
    check(b + rng() % (e - b), static_cast<int>(rng() % 8), b);
  }

  // Damage outside telemetry never crashes replay: it is a divergence, a
  // LogCorrupt verdict, or (for a change replay cannot observe, such as the
  // case of a phrase) OK.
  std::size_t other = 0;
  for (int i = 0; i < 300; ++i) {
    std::size_t byte;
    do byte = rng() % sample.size();
    while (std::any_of(spans.begin(), spans.end(), [&](auto s) { return byte >= s.first && byte < s.second; }));
    std::string m = sample;
    m[byte] = static_cast<char>(m[byte] ^ (1 << (rng() % 8)));
    try {
      (void)replay(m);
    } catch (const LogCorrupt&) {
    }
    ++other;
  }
  if (v.pass)
    v.detail = "4 scripts byte-identical, " + std::to_string(frames) + " frames replayed, " +
               std::to_string(mutations) + " telemetry bit flips located, " + std::to_string(other) +
               " other flips handled";
  return v;
}

Verdict clearance() {
  Verdict v;
  const BaseFootprint base;
  // Layouts from the reported set-up issues: a trocar in the clamp arm's path
  // and trocars placed just outside the 110 mm base.
  const std::vector<TrocarSite> on_arm{{"umbilical", {-150, 0}, 10}, {"right", {150, 0}, 10}, {"left", {0, 120}, 10}};
  v.require(check_clearance(on_arm, base) == std::vector<Conflict>{{1, ConflictCause::ClampArm}}, "clamp-arm layout");
  std::vector<TrocarSite> ring;
  for (int k = 0; k < 12; ++k) {
    const double a = k * std::numbers::pi / 6 + 0.1;
    ring.push_back({"r" + std::to_string(k), {61 * std::cos(a), 61 * std::sin(a)}, 10});
  }
  v.require(check_clearance(ring, base).empty(), "trocars outside the base flagged");
  ring[3].position = {0, 59};
  v.require(check_clearance(ring, base) == std::vector<Conflict>{{3, ConflictCause::Base}}, "trocar inside base");

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-400, 400);
  std::size_t layouts = 0, conflicts = 0;
  for (int trial = 0; trial < 2'000 && v.pass; ++trial) {
    std::vector<TrocarSite> sites;
    for (int i = 0; i < 1 + static_cast<int>(rng() % 6); ++i) sites.push_back({"", {u(rng), u(rng) / 8}, 5 + 0.5 * (rng() % 20)});
    std::vector<Conflict> expected;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      const auto& p = sites[i].position;
      const double r = sites[i].diameter_mm / 2;
      if (std::hypot(p.x, p.y) <= 55 + r) expected.push_back({i, ConflictCause::Base});
      if (test::point_segment_distance(p.x, p.y, 55, 0, 355, 0) <= r) expected.push_back({i, ConflictCause::ClampArm});
    }
    v.require(check_clearance(sites, base) == expected, "random layout disagrees with plane oracle");
    ++layouts;
    conflicts += expected.size();
  }
  if (v.pass)
    v.detail = "3 fixed layouts + " + std::to_string(layouts) + " random layouts (" + std::to_string(conflicts) +
               " conflicts) match the plane oracle";
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"speed reproduction", speed},
      {"range enforcement", range_fuzz},
      {"FK/IK round trip", fk_ik},
      {"workspace volume and aperture", workspace},
      {"pelvic-depth failure", pelvic_depth},
      {"thermal interlock", thermal},
      {"determinism and replay", determinism},
      {"clearance check", clearance},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %-30s %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    failed += !v.pass;
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
