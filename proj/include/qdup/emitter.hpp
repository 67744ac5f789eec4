#pragma once

// Pulsed quantum-dot emitter: at most one QD photon per excitation pulse,
// exponential radiative decay, a one-variable pulse-to-pulse memory and an
// uncorrelated Poissonian background.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "qdup/core.hpp"
#include "qdup/rng.hpp"

namespace qdup {

struct EmitterParams {
  double rep_rate_hz = 5e7;
  double pulse_width_ps = 50.0;  // sigma of the Gaussian excitation jitter
  double lifetime_ns = 1.38;
  // Per-pulse emission probability with the memory fully relaxed. When unset
  // it is derived from target_flux_fiber.
  std::optional<double> p_emit_sat;
  double uncorr_fraction = 0.0861;
  double mem_depth = 0.12;
  double mem_tau_ns = 100.0;
  double target_flux_fiber = 1e4;  // photons/s in fiber, all origins
  bool uncorr_cw = false;          // CW instead of pulse-synchronized background
  std::uint8_t channel = static_cast<std::uint8_t>(Channel::kSignal);

  void validate() const {
    if (!(rep_rate_hz > 0.0) || !std::isfinite(rep_rate_hz)) throw DomainError("rep_rate must be positive");
    if (!(lifetime_ns > 0.0)) throw DomainError("lifetime_tau must be positive");
    if (!(pulse_width_ps >= 0.0)) throw DomainError("pulse_width must be nonnegative");
    if (!(mem_tau_ns > 0.0)) throw DomainError("mem_tau must be positive");
    if (!(mem_depth >= 0.0 && mem_depth < 1.0)) throw DomainError("mem_depth must lie in [0, 1)");
    check_fraction(uncorr_fraction, "uncorr_fraction");
    if (!(target_flux_fiber >= 0.0)) throw DomainError("target_flux_fiber must be nonnegative");
    if (p_emit_sat) check_fraction(*p_emit_sat, "p_emit_sat");
  }

  double period_ps() const { return 1e12 / rep_rate_hz; }

  // Mean QD photons per pulse and mean uncorrelated photons per pulse.
  double qd_mean_per_pulse() const { return target_flux_fiber * (1.0 - uncorr_fraction) / rep_rate_hz; }
  double uncorr_mean_per_pulse() const { return target_flux_fiber * uncorr_fraction / rep_rate_hz; }

  // Relaxed emission probability. The memory lowers the mean by
  // mem_depth * E[m]; for rare emissions E[m] ~ p * sum_l exp(-l T / mem_tau).
  double emission_probability() const {
    if (p_emit_sat) return *p_emit_sat;
    const double p = qd_mean_per_pulse();
    const double a = period_ps() / (mem_tau_ns * 1e3);
    const double tail = std::exp(-a) / (1.0 - std::exp(-a));
    const double sat = p / (1.0 - mem_depth * std::min(1.0, p * tail));
    return std::clamp(sat, 0.0, 1.0);
  }
};

// g2(0) of single photons mixed with Poissonian light: with purity
// p = 1 - uncorr_fraction the zero-delay pairs come only from the background,
// giving 1 - p^2.
inline double true_g2_zero(const EmitterParams& params) {
  params.validate();
  const double purity = 1.0 - params.uncorr_fraction;
  return 1.0 - purity * purity;
}

// Inverse of true_g2_zero.
inline double uncorr_fraction_for_g2(double g2_zero) {
  check_fraction(g2_zero, "g2_zero");
  return 1.0 - std::sqrt(1.0 - g2_zero);
}

namespace detail {

inline constexpr std::uint64_t kEmitterBlockPulses = std::uint64_t{1} << 20;

enum EmitterStage : std::uint64_t { kQdCandidates = 1, kUncorrPulsed = 2, kUncorrCw = 3 };

inline TimePs pulse_time(std::uint64_t k, long double period_ps) {
  return static_cast<TimePs>(std::llround(static_cast<long double>(k) * period_ps));
}

// Geometric number of failures before the next success.
inline std::uint64_t geometric_gap(rng::CounterRng& g, double log1m_p) {
  const double u = g.uniform_pos();
  const double gap = std::floor(std::log(u) / log1m_p);
  if (!(gap < 9e18)) return std::numeric_limits<std::uint64_t>::max() / 2;
  return static_cast<std::uint64_t>(gap);
}

}  // namespace detail

// Simulates `duration_s` seconds of emission into the collection fiber.
//
// Pulse k fires at k / rep_rate. A pulse is a QD candidate with probability
// p_sat; a candidate emits with probability 1 - mem_depth * m_k, so the pulse
// emits with p_k = p_sat (1 - mem_depth m_k). The memory m_k is 1 right after
// an emitting pulse and relaxes as exp(-dt / mem_tau). Candidate draws are
// keyed by (seed, pulse block), so blocks can be produced independently; the
// memory is applied in a sequential pass over the candidates.
inline EventStream generate_emission(const EmitterParams& params, double duration_s, std::uint64_t seed) {
  params.validate();
  if (!(duration_s >= 0.0)) throw DomainError("duration must be nonnegative");
  EventStream out;
  out.duration = seconds_to_ps(duration_s);
  if (out.duration == 0) return out;

  const long double period = 1e12L / static_cast<long double>(params.rep_rate_hz);
  const auto n_pulses = static_cast<std::uint64_t>(std::ceil(static_cast<long double>(out.duration) / period));
  const std::uint64_t n_blocks = (n_pulses + detail::kEmitterBlockPulses - 1) / detail::kEmitterBlockPulses;
  const double tau_ps = params.lifetime_ns * 1e3;
  const double mem_tau_ps = params.mem_tau_ns * 1e3;

  auto push = [&](TimePs t, Origin origin) {
    if (t >= 0 && t <= out.duration) out.events.push_back({t, params.channel, origin});
  };

  // QD photons.
  const double p_sat = params.emission_probability();
  if (p_sat > 0.0) {
    const double log1m = p_sat < 1.0 ? std::log1p(-p_sat) : -std::numeric_limits<double>::infinity();
    bool have_last = false;
    std::uint64_t last_emit = 0;
    for (std::uint64_t b = 0; b < n_blocks; ++b) {
      rng::CounterRng g(rng::derive(seed, rng::Component::kEmitter, detail::kQdCandidates * 1'000'003ULL + b));
      const std::uint64_t begin = b * detail::kEmitterBlockPulses;
      const std::uint64_t end = std::min(n_pulses, begin + detail::kEmitterBlockPulses);
      std::uint64_t k = begin + (p_sat < 1.0 ? detail::geometric_gap(g, log1m) : 0);
      while (k < end) {
        const double accept_u = g.uniform();
        const double jitter = g.normal(0.0, params.pulse_width_ps);
        const double decay = g.exponential(tau_ps);
        double accept = 1.0;
        if (params.mem_depth > 0.0 && have_last) {
          const double dt = static_cast<double>((k - last_emit)) * static_cast<double>(period);
          accept = 1.0 - params.mem_depth * std::exp(-dt / mem_tau_ps);
        }
        if (accept_u < accept) {
          have_last = true;
          last_emit = k;
          push(detail::pulse_time(k, period) + static_cast<TimePs>(std::llround(jitter + decay)), Origin::kQd);
        }
        k += 1 + (p_sat < 1.0 ? detail::geometric_gap(g, log1m) : 0);
      }
    }
  }

  // Uncorrelated background.
  const double mu_u = params.uncorr_mean_per_pulse();
  if (mu_u > 0.0 && !params.uncorr_cw) {
    // Poisson process in continuous pulse-index coordinate; the photon belongs
    // to pulse floor(x). Multiple photons per pulse are allowed.
    for (std::uint64_t b = 0; b < n_blocks; ++b) {
      rng::CounterRng g(rng::derive(seed, rng::Component::kEmitter, detail::kUncorrPulsed * 1'000'003ULL + b));
      const auto begin = static_cast<double>(b * detail::kEmitterBlockPulses);
      const auto end = static_cast<double>(std::min(n_pulses, (b + 1) * detail::kEmitterBlockPulses));
      double x = begin + g.exponential(1.0 / mu_u);
      while (x < end) {
        const auto k = static_cast<std::uint64_t>(x);
        const double jitter = g.normal(0.0, params.pulse_width_ps);
        const double decay = g.exponential(tau_ps);
        push(detail::pulse_time(k, period) + static_cast<TimePs>(std::llround(jitter + decay)),
             Origin::kUncorrelated);
        x += g.exponential(1.0 / mu_u);
      }
    }
  } else if (mu_u > 0.0) {
    const double rate_per_ps = params.target_flux_fiber * params.uncorr_fraction / 1e12;
    const TimePs block_ps = static_cast<TimePs>(1e12);  // 1 s buckets
    for (TimePs b0 = 0, bi = 0; b0 < out.duration; b0 += block_ps, ++bi) {
      rng::CounterRng g(rng::derive(seed, rng::Component::kEmitter,
                                    detail::kUncorrCw * 1'000'003ULL + static_cast<std::uint64_t>(bi)));
      const TimePs b1 = std::min(out.duration, b0 + block_ps);
      double t = static_cast<double>(b0) + g.exponential(1.0 / rate_per_ps);
      while (t < static_cast<double>(b1)) {
        push(static_cast<TimePs>(t), Origin::kUncorrelated);
        t += g.exponential(1.0 / rate_per_ps);
      }
    }
  }

  std::stable_sort(out.events.begin(), out.events.end(), time_less);
  return out;
}

}  // namespace qdup
