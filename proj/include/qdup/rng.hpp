#pragma once

// Counter-based random streams.
//
// Every random draw in the simulator is a pure function of
// (master seed, component, stage, block, counter). A stream is identified by
// a 64-bit key derived from the first four; the counter advances per draw.
// Output is the SplitMix64 finalizer applied to key + counter * gamma, so any
// block can be regenerated independently of the others.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace qdup::rng {

inline constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Component ids for sub-seed derivation. Appending a new component never
// changes the keys of existing ones.
enum class Component : std::uint64_t {
  kEmitter = 1,
  kUpconversion = 2,
  kBeamsplitter = 3,
  kDetectorSi = 4,
  kDetectorInGaAs = 5,
  kSpectrum = 6,
  kScenario = 7,
};

constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t a) {
  return mix64(mix64(seed) ^ mix64(a * kGamma + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive(derive(seed, a), b);
}

constexpr std::uint64_t derive(std::uint64_t seed, Component c, std::uint64_t stage) {
  return derive(seed, static_cast<std::uint64_t>(c), stage);
}

// Satisfies UniformRandomBitGenerator, so std distributions can sit on top.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key, std::uint64_t counter = 0)
      : key_(key), counter_(counter) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() { return mix64(key_ + (++counter_) * kGamma); }

  // Stateless access: the value this stream yields at position `counter`.
  static constexpr result_type at(std::uint64_t key, std::uint64_t counter) {
    return mix64(key + (counter + 1) * kGamma);
  }

  // Uniform in [0, 1) with 53 bits.
  double uniform() { return to_unit((*this)()); }
  // Uniform in (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }

  double exponential(double mean) { return -mean * std::log(uniform_pos()); }

  // Box-Muller; draws two uniforms per call and discards the sine branch so
  // the counter advance is fixed.
  double normal(double mean, double sigma) {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return mean + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  static constexpr double to_unit(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

// Uniform in [0, 1) from the stateless (key, counter) form.
constexpr double uniform_at(std::uint64_t key, std::uint64_t counter) {
  return CounterRng::to_unit(CounterRng::at(key, counter));
}

}  // namespace qdup::rng
