#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace alpr {

std::uint64_t splitmix64(std::uint64_t x);

/// Seeded generator with a fixed, platform-independent output stream.
///
/// Raw bits come from std::mt19937_64, whose sequence the standard pins down.
/// All distributions are mapped here rather than through <random>'s
/// distribution classes, whose algorithms differ between standard libraries.
///
/// Stream splitting: item `i` of a run seeded with `s` draws from
/// `Rng(splitmix64(s ^ splitmix64(i + 1)))`, so per-item work can run in any
/// order or on any thread and still reproduce.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(splitmix64(seed ^ splitmix64(index + 1)));
  }

  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform on [-magnitude, magnitude).
  double symmetric(double magnitude) { return uniform(-magnitude, magnitude); }
  /// True with probability p. p = 0 never fires, p = 1 always does.
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  double normal();
  double gamma(double shape);
  double beta(double a, double b);

 private:
  std::mt19937_64 engine_;
};

}  // namespace alpr
