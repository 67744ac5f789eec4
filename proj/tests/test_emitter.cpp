#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "qdup/emitter.hpp"

using namespace qdup;

namespace {

// Kolmogorov-Smirnov statistic of `xs` against Exponential(mean).
double ks_exponential(std::vector<double> xs, double mean) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = 1.0 - std::exp(-xs[i] / mean);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

// Emission indicators by pulse, recovered from a stream generated with no
// jitter and a negligible lifetime.
std::vector<char> emitted_pulses(const EventStream& s, std::uint64_t n, double period_ps) {
  std::vector<char> e(n, 0);
  for (const auto& ev : s.events) {
    const auto k = static_cast<std::uint64_t>(std::floor(static_cast<double>(ev.time) / period_ps));
    if (k < n) e[k] = 1;
  }
  return e;
}

// Normalized lag correlation P(e_k e_{k+l}) / p^2 - 1.
std::vector<double> lag_correlation(const std::vector<char>& e, int max_lag) {
  const double n = static_cast<double>(e.size());
  double p = 0.0;
  for (char x : e) p += x;
  p /= n;
  std::vector<double> r;
  for (int l = 1; l <= max_lag; ++l) {
    double both = 0.0;
    for (std::size_t k = 0; k + static_cast<std::size_t>(l) < e.size(); ++k) both += e[k] && e[k + static_cast<std::size_t>(l)];
    both /= n - l;
    r.push_back(both / (p * p) - 1.0);
  }
  return r;
}

// Direct simulation of the per-pulse recursion: emit with p_sat (1 - d m),
// m = 1 after an emitting pulse, then decaying by exp(-T / mem_tau).
std::vector<char> markov_oracle(double p_sat, double depth, double decay_per_pulse, std::uint64_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<char> e(n, 0);
  double m = 0.0;
  for (std::uint64_t k = 0; k < n; ++k) {
    m *= decay_per_pulse;
    if (u(g) < p_sat * (1.0 - depth * m)) {
      e[k] = 1;
      m = 1.0;
    }
  }
  return e;
}

}  // namespace

TEST(Emitter, NothingToEmitGivesEmptyStream) {
  EmitterParams p;
  p.p_emit_sat = 0.0;
  p.uncorr_fraction = 0.0;
  const EventStream s = generate_emission(p, 1.0, 3);
  EXPECT_TRUE(s.empty());
  EXPECT_EQ(s.duration, seconds_to_ps(1.0));
}

TEST(Emitter, DefaultFluxInTenSeconds) {
  const EventStream s = generate_emission(EmitterParams{}, 10.0, 11);
  EXPECT_NEAR(static_cast<double>(s.size()), 1e5, 4 * std::sqrt(1e5));
  EXPECT_TRUE(s.is_valid());
}

TEST(Emitter, UncorrelatedShareMatchesFraction) {
  const EmitterParams p;
  const EventStream s = generate_emission(p, 20.0, 5);
  const double n = static_cast<double>(s.size());
  const double u = static_cast<double>(s.count(Origin::kUncorrelated));
  EXPECT_NEAR(u / n, p.uncorr_fraction, 4 * std::sqrt(p.uncorr_fraction * (1 - p.uncorr_fraction) / n));
}

TEST(Emitter, AtMostOnePhotonPerPulse) {
  EmitterParams p;
  p.p_emit_sat = 1.0;
  p.mem_depth = 0.0;
  p.uncorr_fraction = 0.0;
  p.pulse_width_ps = 0.0;
  p.lifetime_ns = 0.001;
  const EventStream s = generate_emission(p, 1e-3, 9);
  std::map<std::int64_t, int> per_pulse;
  for (const auto& e : s.events) ++per_pulse[e.time / 20000];
  EXPECT_EQ(per_pulse.size(), 50000u);
  for (const auto& [k, n] : per_pulse) ASSERT_EQ(n, 1) << "pulse " << k;
}

TEST(Emitter, NoSamePulseQdPairsWithMemory) {
  EmitterParams p;
  p.p_emit_sat = 0.6;
  p.mem_depth = 0.5;
  p.uncorr_fraction = 0.3;
  p.pulse_width_ps = 0.0;
  p.lifetime_ns = 0.001;
  const EventStream s = generate_emission(p, 2e-3, 4);
  std::map<std::int64_t, int> qd_per_pulse;
  for (const auto& e : s.events) {
    if (e.origin == Origin::kQd) ++qd_per_pulse[e.time / 20000];
  }
  for (const auto& [k, n] : qd_per_pulse) ASSERT_EQ(n, 1) << "pulse " << k;
}

TEST(Emitter, SameSeedSameStream) {
  const EmitterParams p;
  EXPECT_EQ(generate_emission(p, 2.0, 77), generate_emission(p, 2.0, 77));
  EXPECT_NE(generate_emission(p, 2.0, 77), generate_emission(p, 2.0, 78));
}

TEST(Emitter, DelayAfterPulseIsExponential) {
  EmitterParams p;
  p.p_emit_sat = 0.1;
  p.mem_depth = 0.0;
  p.uncorr_fraction = 0.0;
  p.pulse_width_ps = 0.0;
  const EventStream s = generate_emission(p, 0.2, 21);
  ASSERT_GE(s.size(), 900000u);
  std::vector<double> delay;
  delay.reserve(s.size());
  for (const auto& e : s.events) delay.push_back(static_cast<double>(e.time % 20000) / 1e3);
  const double crit = 1.63 / std::sqrt(static_cast<double>(delay.size()));
  EXPECT_LT(ks_exponential(delay, p.lifetime_ns), crit);
}

TEST(Emitter, MemoryCorrelationMatchesMarkovOracle) {
  EmitterParams p;
  p.p_emit_sat = 0.5;
  p.mem_depth = 0.5;
  p.mem_tau_ns = 40.0;
  p.uncorr_fraction = 0.0;
  p.pulse_width_ps = 0.0;
  p.lifetime_ns = 0.001;
  const std::uint64_t n = 2'000'000;
  const EventStream s = generate_emission(p, static_cast<double>(n) / p.rep_rate_hz, 8);
  const auto sim = lag_correlation(emitted_pulses(s, n, p.period_ps()), 8);
  const auto ref = lag_correlation(markov_oracle(0.5, 0.5, std::exp(-20.0 / 40.0), n, 8), 8);
  EXPECT_LT(sim[0], 0.0);  // emission suppresses the next pulse
  for (std::size_t l = 0; l < sim.size(); ++l) {
    EXPECT_NEAR(sim[l], ref[l], 6e-3) << "lag " << l + 1;
  }
  // Recovery with the memory time constant: the suppression shrinks by
  // roughly exp(-T / mem_tau) per pulse.
  EXPECT_LT(std::abs(sim[5]), std::abs(sim[0]) * 0.3);
}

TEST(Emitter, TrueG2) {
  EmitterParams p;
  p.uncorr_fraction = 0.0;
  EXPECT_DOUBLE_EQ(true_g2_zero(p), 0.0);
  p.uncorr_fraction = 1.0;
  EXPECT_DOUBLE_EQ(true_g2_zero(p), 1.0);
  p.uncorr_fraction = 0.0861;
  EXPECT_NEAR(true_g2_zero(p), 0.165, 1e-3);
  EXPECT_NEAR(uncorr_fraction_for_g2(0.165), 0.0862167, 1e-6);
}

TEST(Emitter, RejectsBadParameters) {
  EmitterParams p;
  p.lifetime_ns = 0.0;
  EXPECT_THROW(generate_emission(p, 1.0, 1), DomainError);
  p = {};
  p.mem_depth = 1.0;
  EXPECT_THROW(generate_emission(p, 1.0, 1), DomainError);
  EXPECT_THROW(generate_emission(EmitterParams{}, 1e8, 1), RangeError);
}

TEST(Emitter, CwBackgroundIsUnsynchronized) {
  EmitterParams p;
  p.p_emit_sat = 0.0;
  p.uncorr_fraction = 1.0;
  p.uncorr_cw = true;
  p.target_flux_fiber = 1e5;
  const EventStream s = generate_emission(p, 2.0, 3);
  EXPECT_NEAR(static_cast<double>(s.size()), 2e5, 4 * std::sqrt(2e5));
  // Phase within the laser period is flat.
  std::vector<int> bins(10, 0);
  for (const auto& e : s.events) ++bins[static_cast<std::size_t>((e.time % 20000) / 2000)];
  for (int b : bins) EXPECT_NEAR(b, 2e4, 4 * std::sqrt(2e4));
}
