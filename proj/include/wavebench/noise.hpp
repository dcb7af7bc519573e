#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "wavebench/error.hpp"

namespace wavebench {

struct NoiseSpec {
  double std_dev = 0.1;  ///< [m/s^2]
  std::uint64_t seed = 0;
};

inline void validate(const NoiseSpec& n) {
  detail::require(n.std_dev >= 0, "noise.std_dev", "must be >= 0");
}

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

/// Stateless hash of (seed, key) to a 64-bit value.
constexpr std::uint64_t hash_key(std::uint64_t seed, std::uint64_t key) {
  return splitmix64(seed ^ splitmix64(key));
}

}  // namespace detail

/// Standard normal variate addressed by (seed, position). Counter based, so any
/// position can be drawn in any order with the same result on every platform.
inline double standard_normal_at(std::uint64_t seed, std::uint64_t position) {
  const std::uint64_t h1 = detail::hash_key(seed, position);
  const std::uint64_t h2 = detail::splitmix64(h1);
  const double u1 = 1.0 - detail::to_unit(h1);  // (0, 1]
  const double u2 = detail::to_unit(h2);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Zero-mean Gaussian acceleration noise.
inline double sample_accel_noise(const NoiseSpec& spec, std::uint64_t stream_position) {
  if (spec.std_dev == 0) return 0.0;
  return spec.std_dev * standard_normal_at(spec.seed, stream_position);
}

/// Sequential view over the same counter-based stream.
class NoiseStream {
public:
  explicit NoiseStream(NoiseSpec spec) : spec_(spec) {}

  double next() { return sample_accel_noise(spec_, position_++); }
  std::uint64_t position() const noexcept { return position_; }
  const NoiseSpec& spec() const noexcept { return spec_; }

private:
  NoiseSpec spec_;
  std::uint64_t position_ = 0;
};

}  // namespace wavebench
