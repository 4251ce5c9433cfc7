#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ler {

// Seeded generator whose output sequence is fixed by the C++ standard.
// std::uniform_real_distribution is implementation-defined, so reals are
// built directly from the top 53 bits of each draw.
class SampleStream {
 public:
  static constexpr std::string_view kName = "mt19937_64";

  explicit SampleStream(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform01() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ler
