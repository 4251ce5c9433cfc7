#pragma once

#include <compare>
#include <cstdint>
#include <numbers>

namespace ler {

// Integer fixed-point quantity tagged with its unit. Joint state is carried
// in these so that every controller update is exact integer arithmetic and
// a replayed session reproduces the same bits on any platform.
template <class Tag>
class Quantity {
 public:
  using rep = std::int64_t;

  constexpr Quantity() = default;
  constexpr explicit Quantity(rep count) : count_(count) {}

  [[nodiscard]] constexpr rep count() const noexcept { return count_; }

  constexpr Quantity& operator+=(Quantity o) noexcept {
    count_ += o.count_;
    return *this;
  }
  constexpr Quantity& operator-=(Quantity o) noexcept {
    count_ -= o.count_;
    return *this;
  }
  friend constexpr Quantity operator+(Quantity a, Quantity b) noexcept { return a += b; }
  friend constexpr Quantity operator-(Quantity a, Quantity b) noexcept { return a -= b; }
  friend constexpr Quantity operator-(Quantity a) noexcept { return Quantity(-a.count_); }
  friend constexpr Quantity operator*(Quantity a, rep k) noexcept { return Quantity(a.count_ * k); }
  friend constexpr Quantity operator*(rep k, Quantity a) noexcept { return Quantity(a.count_ * k); }
  friend constexpr auto operator<=>(Quantity, Quantity) = default;

 private:
  rep count_ = 0;
};

using Millidegrees = Quantity<struct MillidegreeTag>;
using Micrometers = Quantity<struct MicrometerTag>;
using MillidegreesPerSecond = Quantity<struct MillidegreePerSecondTag>;
using MicrometersPerSecond = Quantity<struct MicrometerPerSecondTag>;
using Milliseconds = Quantity<struct MillisecondTag>;

inline namespace literals {
constexpr Millidegrees operator""_mdeg(unsigned long long v) { return Millidegrees(static_cast<std::int64_t>(v)); }
constexpr Millidegrees operator""_deg(unsigned long long v) { return Millidegrees(static_cast<std::int64_t>(v) * 1000); }
constexpr Micrometers operator""_um(unsigned long long v) { return Micrometers(static_cast<std::int64_t>(v)); }
constexpr Micrometers operator""_mm(unsigned long long v) { return Micrometers(static_cast<std::int64_t>(v) * 1000); }
constexpr Milliseconds operator""_ms(unsigned long long v) { return Milliseconds(static_cast<std::int64_t>(v)); }
}  // namespace literals

inline constexpr Millidegrees kFullTurn{360'000};

constexpr double to_degrees(Millidegrees a) noexcept { return static_cast<double>(a.count()) / 1000.0; }
constexpr double to_radians(Millidegrees a) noexcept {
  return static_cast<double>(a.count()) * (std::numbers::pi / 180'000.0);
}
constexpr double to_mm(Micrometers l) noexcept { return static_cast<double>(l.count()) / 1000.0; }

// Amount covered in `dt` at `rate` units per second. Callers validate that the
// product divides evenly (see ControllerConfig::validate).
template <class Rate, class Out>
constexpr Out per_tick(Rate rate, Milliseconds dt) noexcept {
  return Out(rate.count() * dt.count() / 1000);
}

}  // namespace ler
