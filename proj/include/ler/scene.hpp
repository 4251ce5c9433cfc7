#pragma once

// Minimal abdominal-cavity and table-setup model: reachability coverage,
// trocar/base clearance and camera visibility.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ler/kinematics.hpp"
#include "ler/sampling.hpp"

namespace ler {

// Half-ellipsoid below the plane z = center.z. The default is centred on the
// pivot's wall point, so the cavity roof is the abdominal wall itself.
struct CavityModel {
  double ax = 150.0;
  double ay = 120.0;
  double az = 120.0;
  Point3 center{0.0, 0.0, 0.0};

  void validate() const {
    if (!(ax > 0.0 && ay > 0.0 && az > 0.0)) throw std::invalid_argument("cavity semi-axes must be positive");
    if (!(center.z <= 0.0)) throw std::invalid_argument("cavity must lie below the abdominal wall (center z <= 0)");
  }

  [[nodiscard]] bool contains(Point3 p) const noexcept {
    const Point3 d = p - center;
    if (d.z > 0.0) return false;
    return (d.x * d.x) / (ax * ax) + (d.y * d.y) / (ay * ay) + (d.z * d.z) / (az * az) <= 1.0;
  }

  [[nodiscard]] double volume() const noexcept { return (2.0 * std::numbers::pi / 3.0) * ax * ay * az; }
};

// Uniform points inside the cavity by rejection from its bounding box.
// Every sample has z < center.z (strictly below the roof).
inline std::vector<Point3> sample_cavity(const CavityModel& cavity, std::size_t count, std::uint64_t seed) {
  SampleStream rng(seed);
  std::vector<Point3> out;
  out.reserve(count);
  while (out.size() < count) {
    const Point3 d{rng.uniform(-cavity.ax, cavity.ax), rng.uniform(-cavity.ay, cavity.ay),
                   -cavity.az * (1.0 - rng.uniform01())};
    const Point3 p = cavity.center + d;
    if (cavity.contains(p)) out.push_back(p);
  }
  return out;
}

inline double coverage(std::span<const Point3> samples, const JointLimits& limits) {
  if (samples.empty()) return 0.0;
  const auto hits = std::count_if(samples.begin(), samples.end(), [&](Point3 p) { return is_reachable(p, limits); });
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

inline constexpr std::size_t kMinCoverageSamples = 1000;

// Fraction of the cavity volume the scope tip can reach. The sample set
// depends only on (cavity, samples, seed), never on the limits.
inline double coverage(const CavityModel& cavity, const JointLimits& limits, std::size_t samples, std::uint64_t seed) {
  if (samples < kMinCoverageSamples) throw std::invalid_argument("coverage needs at least 1000 samples");
  cavity.validate();
  const auto pts = sample_cavity(cavity, samples, seed);
  return coverage(pts, limits);
}

// Monte-Carlo estimate of workspace_volume() over the box [-R,R]^2 x [-R,0).
inline double monte_carlo_workspace_volume(const JointLimits& limits, std::size_t samples, std::uint64_t seed) {
  const double r = to_mm(limits.insertion_max);
  SampleStream rng(seed);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const Point3 p{rng.uniform(-r, r), rng.uniform(-r, r), -r * (1.0 - rng.uniform01())};
    if (is_reachable(p, limits)) ++hits;
  }
  const double box = (2.0 * r) * (2.0 * r) * r;
  return box * static_cast<double>(hits) / static_cast<double>(std::max<std::size_t>(samples, 1));
}

// Full aperture, in degrees, of the reachable cone: twice the largest polar
// angle (from -z) among sampled reachable directions.
inline double sampled_cone_aperture(const JointLimits& limits, std::size_t samples, std::uint64_t seed) {
  const double r = to_mm(limits.insertion_max) / 2.0;
  SampleStream rng(seed);
  double widest = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double cz = 1.0 - rng.uniform01();  // cos of polar angle, (0, 1]
    const double az = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double sz = std::sqrt(std::max(0.0, 1.0 - cz * cz));
    const Point3 p{r * sz * std::cos(az), r * sz * std::sin(az), -r * cz};
    if (is_reachable(p, limits)) widest = std::max(widest, std::acos(cz));
  }
  return 2.0 * widest * 180.0 / std::numbers::pi;
}

// --- table layout ---------------------------------------------------------

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr bool operator==(Point2, Point2) = default;
};

inline double distance(Point2 a, Point2 b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

inline double distance_to_segment(Point2 p, Point2 a, Point2 b) noexcept {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(((p.x - a.x) * vx + (p.y - a.y) * vy) / len2, 0.0, 1.0);
  return distance(p, {a.x + t * vx, a.y + t * vy});
}

struct TrocarSite {
  std::string name;
  Point2 position;
  double diameter_mm = 10.0;
};

struct Segment2 {
  Point2 from;
  Point2 to;
};

struct BaseFootprint {
  Point2 center{0.0, 0.0};
  double diameter_mm = 110.0;
  Segment2 clamp_arm{{55.0, 0.0}, {355.0, 0.0}};
};

enum class ConflictCause : std::uint8_t { Base, ClampArm };

constexpr std::string_view to_string(ConflictCause c) noexcept { return c == ConflictCause::Base ? "BASE" : "CLAMP_ARM"; }

struct Conflict {
  std::size_t site = 0;  // index into the input list
  ConflictCause cause = ConflictCause::Base;

  friend constexpr bool operator==(const Conflict&, const Conflict&) = default;
};

// All site/base and site/clamp-arm overlaps, ordered by site then cause.
// Contact (distance equal to the clearance) counts as a conflict.
inline std::vector<Conflict> check_clearance(std::span<const TrocarSite> sites, const BaseFootprint& base) {
  if (!(base.diameter_mm > 0.0)) throw std::invalid_argument("base diameter must be positive");
  std::vector<Conflict> out;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto& s = sites[i];
    if (!(s.diameter_mm > 0.0)) throw std::invalid_argument("trocar diameter must be positive");
    const double site_r = s.diameter_mm / 2.0;
    if (distance(s.position, base.center) <= base.diameter_mm / 2.0 + site_r) out.push_back({i, ConflictCause::Base});
    if (distance_to_segment(s.position, base.clamp_arm.from, base.clamp_arm.to) <= site_r)
      out.push_back({i, ConflictCause::ClampArm});
  }
  return out;
}

// --- camera visibility ----------------------------------------------------

// Closed cone test. A relative slack of 1e-12 keeps targets constructed at
// exactly the half angle inside despite rounding.
inline bool is_visible(const ViewFrustum& f, Point3 target) noexcept {
  const Vec3 d = target - f.apex;
  const double along = dot(d, f.axis) / norm(f.axis);
  if (!(along > 0.0)) return false;
  const double cos_half = std::cos(f.half_angle_deg * std::numbers::pi / 180.0);
  return along >= norm(d) * cos_half * (1.0 - 1e-12);
}

inline std::vector<Point3> visible_targets(const ViewFrustum& f, std::span<const Point3> targets) {
  std::vector<Point3> out;
  std::copy_if(targets.begin(), targets.end(), std::back_inserter(out), [&](Point3 t) { return is_visible(f, t); });
  return out;
}

// --- scene description file ----------------------------------------------

class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Scene {
  CavityModel cavity;
  BaseFootprint base;
  std::vector<TrocarSite> trocars;
  std::vector<Point3> targets;
};

namespace detail {

inline Point2 read_point2(const nlohmann::json& j, std::string_view what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw SceneError(std::string(what) + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Point3 read_point3(const nlohmann::json& j, std::string_view what) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number())
    throw SceneError(std::string(what) + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline double read_number(const nlohmann::json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw SceneError(std::string(key) + ": expected a number");
  return obj[key].get<double>();
}

}  // namespace detail

// Parses the JSON scene description. Every section is optional; missing
// fields keep their defaults. See README for the schema.
inline Scene parse_scene(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SceneError(std::string("scene is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SceneError("scene must be a JSON object");

  Scene scene;
  if (doc.contains("cavity")) {
    const auto& c = doc["cavity"];
    if (!c.is_object()) throw SceneError("cavity: expected an object");
    if (c.contains("semi_axes_mm")) {
      const Point3 a = detail::read_point3(c["semi_axes_mm"], "cavity.semi_axes_mm");
      scene.cavity.ax = a.x;
      scene.cavity.ay = a.y;
      scene.cavity.az = a.z;
    }
    if (c.contains("center_mm")) scene.cavity.center = detail::read_point3(c["center_mm"], "cavity.center_mm");
  }
  if (doc.contains("base")) {
    const auto& b = doc["base"];
    if (!b.is_object()) throw SceneError("base: expected an object");
    if (b.contains("center_mm")) scene.base.center = detail::read_point2(b["center_mm"], "base.center_mm");
    scene.base.diameter_mm = detail::read_number(b, "diameter_mm", scene.base.diameter_mm);
    if (b.contains("clamp_arm")) {
      const auto& arm = b["clamp_arm"];
      if (!arm.is_object() || !arm.contains("from_mm") || !arm.contains("to_mm"))
        throw SceneError("base.clamp_arm: expected {from_mm, to_mm}");
      scene.base.clamp_arm = {detail::read_point2(arm["from_mm"], "clamp_arm.from_mm"),
                              detail::read_point2(arm["to_mm"], "clamp_arm.to_mm")};
    }
  }
  if (doc.contains("trocars")) {
    if (!doc["trocars"].is_array()) throw SceneError("trocars: expected an array");
    for (const auto& t : doc["trocars"]) {
      if (!t.is_object() || !t.contains("position_mm")) throw SceneError("trocar: expected {position_mm, ...}");
      TrocarSite site;
      site.position = detail::read_point2(t["position_mm"], "trocar.position_mm");
      site.diameter_mm = detail::read_number(t, "diameter_mm", site.diameter_mm);
      if (t.contains("name")) {
        if (!t["name"].is_string()) throw SceneError("trocar.name: expected a string");
        site.name = t["name"].get<std::string>();
      }
      scene.trocars.push_back(std::move(site));
    }
  }
  if (doc.contains("targets")) {
    if (!doc["targets"].is_array()) throw SceneError("targets: expected an array");
    for (const auto& p : doc["targets"]) scene.targets.push_back(detail::read_point3(p, "target"));
  }

  try {
    scene.cavity.validate();
    if (!(scene.base.diameter_mm > 0.0)) throw std::invalid_argument("base diameter must be positive");
    for (const auto& t : scene.trocars)
      if (!(t.diameter_mm > 0.0)) throw std::invalid_argument("trocar diameter must be positive");
  } catch (const std::invalid_argument& e) {
    throw SceneError(e.what());
  }
  return scene;
}

inline nlohmann::ordered_json scene_to_json(const Scene& s) {
  nlohmann::ordered_json j;
  j["cavity"] = {{"semi_axes_mm", {s.cavity.ax, s.cavity.ay, s.cavity.az}},
                 {"center_mm", {s.cavity.center.x, s.cavity.center.y, s.cavity.center.z}}};
  j["base"] = {{"center_mm", {s.base.center.x, s.base.center.y}},
               {"diameter_mm", s.base.diameter_mm},
               {"clamp_arm",
                {{"from_mm", {s.base.clamp_arm.from.x, s.base.clamp_arm.from.y}},
                 {"to_mm", {s.base.clamp_arm.to.x, s.base.clamp_arm.to.y}}}}};
  auto trocars = nlohmann::ordered_json::array();
  for (const auto& t : s.trocars)
    trocars.push_back({{"name", t.name}, {"position_mm", {t.position.x, t.position.y}}, {"diameter_mm", t.diameter_mm}});
  j["trocars"] = std::move(trocars);
  auto targets = nlohmann::ordered_json::array();
  for (const auto& p : s.targets) targets.push_back({p.x, p.y, p.z});
  j["targets"] = std::move(targets);
  return j;
}

}  // namespace ler
