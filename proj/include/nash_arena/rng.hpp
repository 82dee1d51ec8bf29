#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace nash_arena {

// Counter-based splittable generator. Output word i of stream `key` is
// mix64(key + (i+1)*GAMMA), i.e. the SplitMix64 sequence seeded at `key`.
// Streams derived via child() are decorrelated by remixing the key, so
// parallel sweeps can hand out independent deterministic streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix64(seed + kGamma)) {}

  // Independent stream addressed by (this stream, index).
  Rng child(std::uint64_t index) const {
    Rng r(0);
    r.key_ = mix64(key_ ^ mix64(index + kGamma));
    r.counter_ = 0;
    return r;
  }

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGamma); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; never returns 0 so logs and divisions are safe.
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Box-Muller; consumes two words per draw (no cached second value, so the
  // word stream position stays a pure function of the draw count).
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * kPi * u2);
  }

  std::vector<double> normal_vector(std::size_t n) {
    std::vector<double> out(n);
    for (auto& x : out) x = normal();
    return out;
  }

  // Symmetric Dirichlet with concentration 1 (uniform on the simplex),
  // via normalized exponential spacings.
  std::vector<double> dirichlet_uniform(std::size_t n) {
    std::vector<double> out(n);
    double total = 0.0;
    for (auto& x : out) {
      x = -std::log(uniform_pos());
      total += x;
    }
    for (auto& x : out) x /= total;
    return out;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static constexpr double kPi = 3.141592653589793238462643383279502884;

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace nash_arena
