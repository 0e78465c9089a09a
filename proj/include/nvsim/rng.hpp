#pragma once

#include <cmath>
#include <cstdint>

namespace nvsim {

// Counter-style deterministic RNG built on SplitMix64.
//
// All randomness in a run flows from one master seed. Shot i uses the
// stream Rng::stream(master, i); independent sub-streams (dynamics,
// detection, gates, ...) are derived with fork(tag). Streams depend only
// on (master, index, tags), never on execution order, so results are
// identical at any level of parallelism.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9E3779B97F4A7C15ull * (b + 1);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  // Per-shot stream derivation.
  static Rng stream(std::uint64_t master, std::uint64_t index) {
    return Rng(mix(master, index));
  }

  // Derived sub-stream; does not advance this generator.
  Rng fork(std::uint64_t tag) const { return Rng(mix(state_ ^ 0xA5A5A5A5A5A5A5A5ull, tag)); }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Exponential waiting time with the given rate (rate > 0).
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  std::uint32_t uniform_int(std::uint32_t n) {
    // Lemire-style bounded draw; n is tiny here, modulo bias is irrelevant,
    // but the multiply trick is branch-free anyway.
    return static_cast<std::uint32_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  std::uint32_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::uint32_t total = 0;
    // Split large means so exp(-chunk) stays away from underflow.
    while (mean > 32.0) {
      total += poisson_knuth(32.0);
      mean -= 32.0;
    }
    return total + poisson_knuth(mean);
  }

 private:
  std::uint32_t poisson_knuth(double mean) {
    const double limit = std::exp(-mean);
    std::uint32_t k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

  std::uint64_t state_;
};

}  // namespace nvsim
