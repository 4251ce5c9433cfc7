#pragma once

// Tick-driven, velocity-limited motion controller.
//
// One axis moves at a time, at its full rated speed (rectangular velocity
// profile). CONTINUOUS motion runs until stopped or preempted; STEP motion
// covers a fixed distance and returns to IDLE. Each motor has a synthetic
// thermal accumulator that charges while it drives and decays otherwise;
// exceeding the budget latches a THERMAL fault.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "ler/kinematics.hpp"
#include "ler/result.hpp"
#include "ler/units.hpp"

namespace ler {

// PAN is motor 2, TILT is motor 3, INSERTION is motor 1 on the device.
enum class Axis : std::uint8_t { Pan = 0, Tilt = 1, Insertion = 2 };
inline constexpr std::array<Axis, 3> kAllAxes{Axis::Pan, Axis::Tilt, Axis::Insertion};

constexpr std::string_view to_string(Axis a) noexcept {
  switch (a) {
    case Axis::Pan: return "PAN";
    case Axis::Tilt: return "TILT";
    case Axis::Insertion: return "INSERTION";
  }
  return "?";
}

constexpr int motor_number(Axis a) noexcept {
  switch (a) {
    case Axis::Insertion: return 1;
    case Axis::Pan: return 2;
    case Axis::Tilt: return 3;
  }
  return 0;
}

enum class MotionMode : std::uint8_t { Continuous, Step };

constexpr std::string_view to_string(MotionMode m) noexcept {
  return m == MotionMode::Continuous ? "CONTINUOUS" : "STEP";
}

struct MotionRequest {
  Axis axis = Axis::Pan;
  int direction = +1;  // +1 or -1
  MotionMode mode = MotionMode::Continuous;

  friend constexpr bool operator==(const MotionRequest&, const MotionRequest&) = default;
};

enum class ControlMode : std::uint8_t { Idle, Moving, Stepping, Manual, Fault };

constexpr std::string_view to_string(ControlMode m) noexcept {
  switch (m) {
    case ControlMode::Idle: return "IDLE";
    case ControlMode::Moving: return "MOVING";
    case ControlMode::Stepping: return "STEPPING";
    case ControlMode::Manual: return "MANUAL";
    case ControlMode::Fault: return "FAULT";
  }
  return "?";
}

enum class FaultCause : std::uint8_t { Thermal };

constexpr std::string_view to_string(FaultCause) noexcept { return "THERMAL"; }

struct StepSizes {
  Millidegrees angular{2'000};
  Micrometers insertion{5'000};

  friend bool operator==(const StepSizes&, const StepSizes&) = default;
};

// Thermal accumulators are kept in micro-units so that the per-tick charge
// and decay stay integral at a 10 ms tick. The constants are synthetic: a
// full-speed run of budget/charge seconds (60 s by default) trips the fault.
struct ThermalModel {
  std::int64_t charge_per_s = 1'000'000;
  std::int64_t decay_per_s = 250'000;
  std::int64_t budget = 60'000'000;

  // Fault may be cleared once the faulted motor is strictly below this level.
  [[nodiscard]] constexpr std::int64_t clear_level() const noexcept { return budget / 2; }

  friend bool operator==(const ThermalModel&, const ThermalModel&) = default;
};

struct ControllerConfig {
  JointLimits limits;
  StepSizes steps;
  ThermalModel thermal;
  Milliseconds dt{10};

  // Every per-tick increment must be an exact integer; throws otherwise.
  void validate() const {
    limits.validate();
    if (dt.count() <= 0) throw std::invalid_argument("dt must be positive");
    auto exact = [&](std::int64_t rate, const char* what) {
      if ((rate * dt.count()) % 1000 != 0)
        throw std::invalid_argument(std::string(what) + " does not divide into whole fixed-point units per tick");
    };
    exact(limits.pan_speed_max.count(), "pan_speed_max");
    exact(limits.tilt_speed_max.count(), "tilt_speed_max");
    exact(limits.insertion_speed_max.count(), "insertion_speed_max");
    if (steps.angular.count() <= 0 || steps.angular.count() > 10'000)
      throw std::invalid_argument("angular step must be in (0, 10000] mdeg");
    if (steps.insertion.count() <= 0) throw std::invalid_argument("insertion step must be positive");
    if (thermal.charge_per_s <= 0 || thermal.decay_per_s <= 0 || thermal.budget <= 0)
      throw std::invalid_argument("thermal constants must be positive");
    exact(thermal.charge_per_s, "thermal charge rate");
    exact(thermal.decay_per_s, "thermal decay rate");
  }

  [[nodiscard]] std::int64_t speed_per_tick(Axis a) const noexcept {
    switch (a) {
      case Axis::Pan: return per_tick<MillidegreesPerSecond, Millidegrees>(limits.pan_speed_max, dt).count();
      case Axis::Tilt: return per_tick<MillidegreesPerSecond, Millidegrees>(limits.tilt_speed_max, dt).count();
      case Axis::Insertion:
        return per_tick<MicrometersPerSecond, Micrometers>(limits.insertion_speed_max, dt).count();
    }
    return 0;
  }
  [[nodiscard]] std::int64_t step_size(Axis a) const noexcept {
    return a == Axis::Insertion ? steps.insertion.count() : steps.angular.count();
  }
  [[nodiscard]] std::int64_t charge_per_tick() const noexcept { return thermal.charge_per_s * dt.count() / 1000; }
  [[nodiscard]] std::int64_t decay_per_tick() const noexcept { return thermal.decay_per_s * dt.count() / 1000; }

  friend bool operator==(const ControllerConfig&, const ControllerConfig&) = default;
};

struct ControllerState {
  JointVector joints;
  ControlMode mode = ControlMode::Idle;
  std::optional<MotionRequest> active;
  std::int64_t step_remaining = 0;
  std::array<std::int64_t, 3> thermal{0, 0, 0};
  std::optional<FaultCause> fault_cause;
  std::optional<Axis> fault_axis;

  [[nodiscard]] std::int64_t heat(Axis a) const noexcept { return thermal[static_cast<std::size_t>(a)]; }

  friend bool operator==(const ControllerState&, const ControllerState&) = default;
};

enum class ControllerError : std::uint8_t {
  RejectedFault,     // CommandRejected(FAULT)
  RejectedManual,    // CommandRejected(MANUAL)
  NotInManualMode,
  FaultNotClearable,
};

constexpr std::string_view to_string(ControllerError e) noexcept {
  switch (e) {
    case ControllerError::RejectedFault: return "CommandRejected(FAULT)";
    case ControllerError::RejectedManual: return "CommandRejected(MANUAL)";
    case ControllerError::NotInManualMode: return "NotInManualMode";
    case ControllerError::FaultNotClearable: return "FaultNotClearable";
  }
  return "?";
}

using ControllerResult = Result<ControllerState, ControllerError>;

namespace detail {

inline JointVector advance_axis(JointVector j, Axis axis, std::int64_t delta, const JointLimits& limits) noexcept {
  switch (axis) {
    case Axis::Pan: j.pan += Millidegrees(delta); break;
    case Axis::Tilt: j.tilt += Millidegrees(delta); break;
    case Axis::Insertion: j.insertion += Micrometers(delta); break;
  }
  return normalized(j, limits);
}

inline void cancel_motion(ControllerState& s) noexcept {
  s.active.reset();
  s.step_remaining = 0;
}

}  // namespace detail

// Advances the controller by one fixed timestep.
inline ControllerState tick(ControllerState s, const ControllerConfig& cfg) noexcept {
  const std::int64_t decay = cfg.decay_per_tick();
  std::optional<Axis> driving;

  if ((s.mode == ControlMode::Moving || s.mode == ControlMode::Stepping) && s.active) {
    const MotionRequest req = *s.active;
    std::int64_t travel = cfg.speed_per_tick(req.axis);
    if (s.mode == ControlMode::Stepping) travel = std::min(travel, s.step_remaining);
    s.joints = detail::advance_axis(s.joints, req.axis, req.direction * travel, cfg.limits);
    driving = req.axis;
    if (s.mode == ControlMode::Stepping) {
      s.step_remaining -= travel;
      if (s.step_remaining <= 0) {
        detail::cancel_motion(s);
        s.mode = ControlMode::Idle;
      }
    }
  }

  for (Axis a : kAllAxes) {
    auto& heat = s.thermal[static_cast<std::size_t>(a)];
    if (driving == a) {
      heat += cfg.charge_per_tick();
    } else {
      heat = std::max<std::int64_t>(0, heat - decay);
    }
  }

  if (s.mode != ControlMode::Fault) {
    for (Axis a : kAllAxes) {
      if (s.heat(a) > cfg.thermal.budget) {
        detail::cancel_motion(s);
        s.mode = ControlMode::Fault;
        s.fault_cause = FaultCause::Thermal;
        s.fault_axis = a;
        break;
      }
    }
  }
  return s;
}

// Starts a motion; any motion in flight is replaced.
inline ControllerResult command(ControllerState s, const MotionRequest& req, const ControllerConfig& cfg) {
  if (s.mode == ControlMode::Fault) return fail(ControllerError::RejectedFault);
  if (s.mode == ControlMode::Manual) return fail(ControllerError::RejectedManual);
  if (req.direction != 1 && req.direction != -1) throw std::invalid_argument("direction must be +1 or -1");
  s.active = req;
  if (req.mode == MotionMode::Continuous) {
    s.mode = ControlMode::Moving;
    s.step_remaining = 0;
  } else {
    s.mode = ControlMode::Stepping;
    s.step_remaining = cfg.step_size(req.axis);
  }
  return s;
}

inline ControllerState stop(ControllerState s) noexcept {
  if (s.mode == ControlMode::Moving || s.mode == ControlMode::Stepping) {
    detail::cancel_motion(s);
    s.mode = ControlMode::Idle;
  }
  return s;
}

// Motors off (back-driveable joints) or back on. A pending fault survives a
// trip through MANUAL: switching the motors back on returns to FAULT.
inline ControllerState set_manual(ControllerState s, bool on) noexcept {
  if (on) {
    detail::cancel_motion(s);
    s.mode = ControlMode::Manual;
  } else if (s.mode == ControlMode::Manual) {
    s.mode = s.fault_cause ? ControlMode::Fault : ControlMode::Idle;
  }
  return s;
}

inline ControllerResult set_joints_manual(ControllerState s, const JointVector& j, const JointLimits& limits) {
  if (s.mode != ControlMode::Manual) return fail(ControllerError::NotInManualMode);
  s.joints = normalized(j, limits);
  return s;
}

inline ControllerResult reset_fault(ControllerState s, const ThermalModel& thermal) {
  if (s.mode != ControlMode::Fault) return s;
  const Axis axis = s.fault_axis.value_or(Axis::Pan);
  if (s.heat(axis) >= thermal.clear_level()) return fail(ControllerError::FaultNotClearable);
  s.mode = ControlMode::Idle;
  s.fault_cause.reset();
  s.fault_axis.reset();
  return s;
}

// Idle ticks needed before reset_fault succeeds from the given state.
inline std::int64_t ticks_until_clearable(const ControllerState& s, const ControllerConfig& cfg) noexcept {
  if (s.mode != ControlMode::Fault || !s.fault_axis) return 0;
  const std::int64_t excess = s.heat(*s.fault_axis) - cfg.thermal.clear_level();
  if (excess < 0) return 0;
  return excess / cfg.decay_per_tick() + 1;
}

}  // namespace ler
