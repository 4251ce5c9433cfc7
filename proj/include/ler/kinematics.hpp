#pragma once

// Remote-center-of-motion geometry for the three-joint endoscope holder.
//
// Patient frame: origin at the trocar pivot, +z out of the abdomen toward the
// robot base, x/y spanning the abdominal-wall plane. Intra-cavity points have
// z < 0. Tilt is the polar angle of the scope axis measured from -z; pan is
// the azimuth of the axis about z, measured from +x toward +y.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string_view>

#include "ler/result.hpp"
#include "ler/units.hpp"

namespace ler {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend constexpr Point3 operator+(Point3 a, Point3 b) noexcept { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Point3 operator-(Point3 a, Point3 b) noexcept { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Point3 operator*(double k, Point3 a) noexcept { return {k * a.x, k * a.y, k * a.z}; }
  friend constexpr bool operator==(Point3, Point3) = default;
};

// Direction vectors share the representation.
using Vec3 = Point3;

constexpr double dot(Vec3 a, Vec3 b) noexcept { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 a) noexcept { return std::sqrt(dot(a, a)); }

struct JointLimits {
  Millidegrees tilt_max{80'000};
  Micrometers insertion_max{200'000};
  MillidegreesPerSecond pan_speed_max{75'000};
  MillidegreesPerSecond tilt_speed_max{75'000};
  MicrometersPerSecond insertion_speed_max{80'000};

  // Throws std::invalid_argument naming the offending field.
  void validate() const {
    if (tilt_max.count() <= 0 || tilt_max.count() > 90'000)
      throw std::invalid_argument("tilt_max must be in (0, 90000] mdeg");
    if (insertion_max.count() <= 0) throw std::invalid_argument("insertion_max must be positive");
    if (pan_speed_max.count() <= 0) throw std::invalid_argument("pan_speed_max must be positive");
    if (tilt_speed_max.count() <= 0) throw std::invalid_argument("tilt_speed_max must be positive");
    if (insertion_speed_max.count() <= 0) throw std::invalid_argument("insertion_speed_max must be positive");
  }

  friend bool operator==(const JointLimits&, const JointLimits&) = default;
};

struct JointVector {
  Millidegrees pan{0};
  Millidegrees tilt{0};
  Micrometers insertion{0};

  friend constexpr bool operator==(const JointVector&, const JointVector&) = default;
};

constexpr Millidegrees wrap_pan(Millidegrees pan) noexcept {
  auto v = pan.count() % kFullTurn.count();
  if (v < 0) v += kFullTurn.count();
  return Millidegrees(v);
}

// Wraps pan into [0, 360000) and saturates tilt and insertion into range.
constexpr JointVector normalized(JointVector j, const JointLimits& limits) noexcept {
  j.pan = wrap_pan(j.pan);
  j.tilt = std::clamp(j.tilt, Millidegrees(0), limits.tilt_max);
  j.insertion = std::clamp(j.insertion, Micrometers(0), limits.insertion_max);
  return j;
}

constexpr bool satisfies_limits(const JointVector& j, const JointLimits& limits) noexcept {
  return j == normalized(j, limits);
}

struct ScopePose {
  Point3 tip;  // mm
  Vec3 axis;   // unit, pivot toward tip
};

inline Vec3 scope_axis(Millidegrees pan, Millidegrees tilt) noexcept {
  const double theta = to_radians(pan);
  const double phi = to_radians(tilt);
  return {std::sin(phi) * std::cos(theta), std::sin(phi) * std::sin(theta), -std::cos(phi)};
}

inline ScopePose forward_kinematics(const JointVector& j, const JointLimits& = {}) noexcept {
  const Vec3 axis = scope_axis(j.pan, j.tilt);
  return {to_mm(j.insertion) * axis, axis};
}

enum class UnreachableReason { TiltOutOfRange, InsertionOutOfRange, OutsideCavity };

constexpr std::string_view to_string(UnreachableReason r) noexcept {
  switch (r) {
    case UnreachableReason::TiltOutOfRange: return "TiltOutOfRange";
    case UnreachableReason::InsertionOutOfRange: return "InsertionOutOfRange";
    case UnreachableReason::OutsideCavity: return "OutsideCavity";
  }
  return "?";
}

// Joint configuration that places the tip on `target`, quantized to the
// fixed-point grid. On the vertical axis the azimuth is undefined and the
// current pan is kept, so a pure depth change never swings the base.
inline Result<JointVector, UnreachableReason> inverse_kinematics(Point3 target, const JointVector& current,
                                                                 const JointLimits& limits) {
  if (!(target.z < 0.0)) return fail(UnreachableReason::OutsideCavity);

  const double range_mm = norm(target);
  // Anything beyond a kilometre is out of range long before llround overflows.
  if (!(range_mm * 1000.0 <= static_cast<double>(limits.insertion_max.count()) + 1.0))
    return fail(UnreachableReason::InsertionOutOfRange);
  const Micrometers insertion(std::llround(range_mm * 1000.0));
  if (insertion > limits.insertion_max) return fail(UnreachableReason::InsertionOutOfRange);

  const double lateral = std::hypot(target.x, target.y);
  const double phi_deg = std::atan2(lateral, -target.z) * (180.0 / std::numbers::pi);
  const Millidegrees tilt(std::llround(phi_deg * 1000.0));
  if (tilt > limits.tilt_max) return fail(UnreachableReason::TiltOutOfRange);

  JointVector out{current.pan, tilt, insertion};
  if (tilt.count() > 0) {
    const double theta_deg = std::atan2(target.y, target.x) * (180.0 / std::numbers::pi);
    out.pan = wrap_pan(Millidegrees(std::llround(theta_deg * 1000.0)));
  }
  out.pan = wrap_pan(out.pan);
  return out;
}

inline bool is_reachable(Point3 target, const JointLimits& limits) {
  return inverse_kinematics(target, JointVector{}, limits).ok();
}

// Volume of the spherical sector swept by the scope tip, in mm^3.
inline double workspace_volume(const JointLimits& limits) noexcept {
  const double r = to_mm(limits.insertion_max);
  const double phi = to_radians(limits.tilt_max);
  return (2.0 * std::numbers::pi / 3.0) * r * r * r * (1.0 - std::cos(phi));
}

struct ViewFrustum {
  Point3 apex;
  Vec3 axis;
  double half_angle_deg = 35.0;
};

inline constexpr double kDefaultFovDeg = 70.0;

inline ViewFrustum view_frustum(const JointVector& j, const JointLimits& limits, double fov_deg = kDefaultFovDeg) {
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw std::invalid_argument("fov must be in (0, 180) degrees");
  const ScopePose pose = forward_kinematics(j, limits);
  return {pose.tip, pose.axis, fov_deg / 2.0};
}

}  // namespace ler
