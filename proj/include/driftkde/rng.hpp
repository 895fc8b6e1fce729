#pragma once

#include <cmath>
#include <cstdint>

namespace driftkde {

/// Counter-based 64-bit generator with explicit state. Output i of stream
/// `key` is the splitmix64 finalizer applied to key + (i+1) * golden ratio,
/// which is exactly the splitmix64 sequence seeded with `key`. State is two
/// words, copyable, and bit-exact across platforms. Normal variates use the
/// Box-Muller transform of two uniforms, no library distributions involved.
struct CounterRng {
  std::uint64_t key = 0;
  std::uint64_t counter = 0;

  explicit CounterRng(std::uint64_t k = 0) : key(k) {}

  /// Independent replica stream: key = base_seed XOR replica_index.
  static CounterRng replica_stream(std::uint64_t base_seed,
                                   std::uint64_t replica_index) {
    return CounterRng(base_seed ^ replica_index);
  }

  std::uint64_t next_u64() {
    std::uint64_t z = key + (++counter) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1] (safe as a log argument).
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes two uniforms per variate.
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
};

}  // namespace driftkde
