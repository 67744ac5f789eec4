#pragma once

// Click detectors: free-running Si SPAD, gated InGaAs SPAD and the
// non-polarizing beamsplitter in front of the HBT pair.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <queue>
#include <utility>
#include <vector>

#include "qdup/core.hpp"
#include "qdup/rng.hpp"

namespace qdup {

enum class DeadTimeMode : std::uint8_t { kNonParalyzable, kParalyzable };

struct SiSpadParams {
  double qe = 0.70;
  double dead_time_ns = 50.0;
  double dark_rate = 100.0;  // 1/s
  double jitter_fwhm_ps = 40.0;
  DeadTimeMode dead_mode = DeadTimeMode::kNonParalyzable;
  std::uint8_t channel = static_cast<std::uint8_t>(Channel::kSignal);

  void validate() const {
    check_fraction(qe, "qe");
    if (!(dead_time_ns >= 0.0)) throw DomainError("dead_time must be nonnegative");
    if (!(dark_rate >= 0.0)) throw DomainError("dark_rate must be nonnegative");
    if (!(jitter_fwhm_ps >= 0.0)) throw DomainError("jitter_fwhm must be nonnegative");
  }
};

struct InGaAsSpadParams {
  double det_prob = 0.20;
  double dead_time_us = 10.0;
  double gate_width_ns = 20.0;
  double trigger_rate_mhz = 4.3;
  double gate_delay_ns = 0.0;
  // Observed dark clicks per wall-clock second under this gating (after
  // dead-time losses).
  double dark_rate_wall = 12'500.0;
  double qe_osc_amp = 0.5;
  double qe_osc_period_ns = 1.0;
  double qe_osc_decay_ns = 3.0;
  double afterpulse_prob = 0.05;
  double afterpulse_tau_us = 5.0;
  // When positive, each gate opens on the first sync tick at or after
  // k / trigger_rate (delay generator triggered from the laser clock).
  double sync_period_ps = 0.0;
  DeadTimeMode dead_mode = DeadTimeMode::kNonParalyzable;
  std::uint8_t channel = static_cast<std::uint8_t>(Channel::kSignal);

  double duty_cycle() const { return gate_width_ns * 1e-9 * trigger_rate_mhz * 1e6; }

  void validate() const {
    check_fraction(det_prob, "det_prob");
    check_fraction(afterpulse_prob, "afterpulse_prob");
    if (!(dead_time_us >= 0.0)) throw DomainError("dead_time must be nonnegative");
    if (!(gate_width_ns > 0.0)) throw DomainError("gate_width must be positive");
    if (!(trigger_rate_mhz > 0.0)) throw DomainError("trigger_rate must be positive");
    if (!(dark_rate_wall >= 0.0)) throw DomainError("dark_rate_wall must be nonnegative");
    if (!(qe_osc_period_ns > 0.0) || !(qe_osc_decay_ns > 0.0)) {
      throw DomainError("qe oscillation period and decay must be positive");
    }
    if (!(afterpulse_tau_us > 0.0)) throw DomainError("afterpulse_tau must be positive");
    if (duty_cycle() > 1.0) {
      throw ConfigError("ingaas.gate_width_ns", "gate duty cycle " + std::to_string(duty_cycle()) + " exceeds 1");
    }
    if (dark_rate_wall * dead_time_us * 1e-6 >= 1.0) {
      throw ConfigError("ingaas.dark_rate_wall", "dark rate saturates the dead time");
    }
  }
};

namespace detail {

enum DetectorStage : std::uint64_t { kQeThin = 1, kDark = 2, kJitter = 3, kAfterpulse = 4, kSplit = 5 };

// Homogeneous Poisson arrivals on [0, duration) in one-second buckets, each
// bucket keyed separately.
template <typename Emit>
void poisson_process(double rate_per_s, TimePs duration, std::uint64_t key, Emit&& emit) {
  if (rate_per_s <= 0.0 || duration <= 0) return;
  const double mean_gap = 1e12 / rate_per_s;
  const TimePs bucket = static_cast<TimePs>(1e12);
  for (TimePs b0 = 0, bi = 0; b0 < duration; b0 += bucket, ++bi) {
    rng::CounterRng g(rng::derive(key, static_cast<std::uint64_t>(bi)));
    const TimePs b1 = std::min(duration, b0 + bucket);
    double t = static_cast<double>(b0) + g.exponential(mean_gap);
    while (t < static_cast<double>(b1)) {
      emit(static_cast<TimePs>(t));
      t += g.exponential(mean_gap);
    }
  }
}

}  // namespace detail

// Routes each event to arm A with probability `ratio`; events keep their
// channel and origin so the union of the arms is the input.
inline std::pair<EventStream, EventStream> beamsplit(const EventStream& input, double ratio, std::uint64_t seed) {
  check_fraction(ratio, "ratio");
  std::pair<EventStream, EventStream> arms;
  arms.first.duration = arms.second.duration = input.duration;
  const std::uint64_t key = rng::derive(seed, rng::Component::kBeamsplitter, detail::kSplit);
  for (std::size_t i = 0; i < input.size(); ++i) {
    auto& arm = rng::uniform_at(key, i) < ratio ? arms.first : arms.second;
    arm.events.push_back(input.events[i]);
  }
  return arms;
}

// Free-running Si SPAD: QE thinning, dark clicks, Gaussian timing jitter,
// then dead time on the jittered times. Output spans the input's duration.
inline EventStream detect_si(const EventStream& input, const SiSpadParams& params, std::uint64_t seed) {
  require_sorted(input, "detect_si");
  params.validate();

  std::vector<PhotonEvent> cand;
  const std::uint64_t qe_key = rng::derive(seed, rng::Component::kDetectorSi, detail::kQeThin);
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (rng::uniform_at(qe_key, i) < params.qe) cand.push_back({input.events[i].time, params.channel, input.events[i].origin});
  }
  std::vector<PhotonEvent> dark;
  detail::poisson_process(params.dark_rate, input.duration,
                          rng::derive(seed, rng::Component::kDetectorSi, detail::kDark),
                          [&](TimePs t) { dark.push_back({t, params.channel, Origin::kDark}); });
  std::vector<PhotonEvent> merged(cand.size() + dark.size());
  std::merge(cand.begin(), cand.end(), dark.begin(), dark.end(), merged.begin(), time_less);

  if (params.jitter_fwhm_ps > 0.0) {
    const double sigma = params.jitter_fwhm_ps / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
    rng::CounterRng g(rng::derive(seed, rng::Component::kDetectorSi, detail::kJitter));
    for (auto& e : merged) {
      const TimePs t = e.time + static_cast<TimePs>(std::llround(g.normal(0.0, sigma)));
      e.time = std::clamp<TimePs>(t, 0, input.duration);
    }
    std::stable_sort(merged.begin(), merged.end(), time_less);
  }

  EventStream out;
  out.duration = input.duration;
  const auto dead = static_cast<TimePs>(std::llround(params.dead_time_ns * 1e3));
  bool have = false;
  TimePs blocked_until = 0;
  for (const auto& e : merged) {
    if (have && e.time < blocked_until) {
      if (params.dead_mode == DeadTimeMode::kParalyzable) blocked_until = e.time + dead;
      continue;
    }
    out.events.push_back(e);
    have = true;
    blocked_until = e.time + dead;
  }
  return out;
}

// Gate geometry of a triggered detector.
class GateSchedule {
 public:
  explicit GateSchedule(const InGaAsSpadParams& p)
      : period_(1e6L / static_cast<long double>(p.trigger_rate_mhz)),
        width_(static_cast<TimePs>(std::llround(p.gate_width_ns * 1e3))),
        delay_(static_cast<TimePs>(std::llround(p.gate_delay_ns * 1e3))),
        sync_(p.sync_period_ps) {}

  TimePs width() const { return width_; }

  TimePs start(std::int64_t k) const {
    const long double nominal = static_cast<long double>(k) * period_;
    TimePs t = static_cast<TimePs>(std::llround(nominal));
    if (sync_ > 0.0) {
      const long double ticks = std::ceil(nominal / static_cast<long double>(sync_) - 1e-12L);
      t = static_cast<TimePs>(std::llround(ticks * static_cast<long double>(sync_)));
    }
    return t + delay_;
  }

  // Offset of `t` inside its gate, if `t` falls in one.
  std::optional<TimePs> offset_in_gate(TimePs t) const {
    const auto k = static_cast<std::int64_t>(std::floor(static_cast<long double>(t - delay_) / period_));
    for (std::int64_t j = k; j >= k - 1; --j) {
      const TimePs s = start(j);
      if (t >= s && t < s + width_) return t - s;
    }
    return std::nullopt;
  }

  // Number of gates opening in [0, duration).
  std::int64_t count(TimePs duration) const {
    auto n = static_cast<std::int64_t>(std::ceil(static_cast<long double>(duration - delay_) / period_));
    n = std::max<std::int64_t>(n, 0);
    while (n > 0 && start(n - 1) >= duration) --n;
    while (start(n) < duration) ++n;
    return n;
  }

 private:
  long double period_;
  TimePs width_;
  TimePs delay_;
  double sync_;
};

// Relative detection efficiency at `offset_ps` into a gate.
inline double ingaas_gate_efficiency(const InGaAsSpadParams& p, TimePs offset_ps) {
  const double x = static_cast<double>(offset_ps) * 1e-3;  // ns
  const double m = 1.0 + p.qe_osc_amp * std::cos(2.0 * std::numbers::pi * x / p.qe_osc_period_ns) *
                             std::exp(-x / p.qe_osc_decay_ns);
  return std::clamp(p.det_prob * m, 0.0, 1.0);
}

// Gated InGaAs SPAD. Photons outside gates are lost; inside, detection
// probability follows the decaying QE oscillation. Dark clicks occur only in
// gates. Every accepted click may spawn an afterpulse, which is itself
// subject to gating and dead time. The dead time spans gates.
inline EventStream detect_ingaas(const EventStream& input, const InGaAsSpadParams& params, std::uint64_t seed) {
  require_sorted(input, "detect_ingaas");
  params.validate();
  const GateSchedule gates(params);
  const auto dead = static_cast<TimePs>(std::llround(params.dead_time_us * 1e6));

  struct Candidate {
    TimePs time;
    Origin origin;
  };
  std::vector<Candidate> cand;
  const std::uint64_t qe_key = rng::derive(seed, rng::Component::kDetectorInGaAs, detail::kQeThin);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const auto& e = input.events[i];
    const auto off = gates.offset_in_gate(e.time);
    if (!off) continue;
    if (rng::uniform_at(qe_key, i) < ingaas_gate_efficiency(params, *off)) cand.push_back({e.time, e.origin});
  }

  // Dark clicks: Poisson in gated time. The raw rate is raised so that the
  // observed rate after non-paralyzable dead time equals dark_rate_wall.
  std::vector<Candidate> dark;
  const double tau_s = params.dead_time_us * 1e-6;
  const double raw_wall = params.dark_rate_wall / (1.0 - params.dark_rate_wall * tau_s);
  const std::int64_t n_gates = gates.count(input.duration);
  const TimePs gated_total = n_gates * gates.width();
  const double gated_rate = raw_wall / params.duty_cycle();  // per gated second
  detail::poisson_process(gated_rate, gated_total, rng::derive(seed, rng::Component::kDetectorInGaAs, detail::kDark),
                          [&](TimePs u) {
                            const std::int64_t k = u / gates.width();
                            const TimePs t = gates.start(k) + (u - k * gates.width());
                            if (t <= input.duration) dark.push_back({t, Origin::kDark});
                          });
  std::vector<Candidate> merged(cand.size() + dark.size());
  std::merge(cand.begin(), cand.end(), dark.begin(), dark.end(), merged.begin(),
             [](const Candidate& a, const Candidate& b) { return a.time < b.time; });

  EventStream out;
  out.duration = input.duration;
  rng::CounterRng ap(rng::derive(seed, rng::Component::kDetectorInGaAs, detail::kAfterpulse));
  std::priority_queue<TimePs, std::vector<TimePs>, std::greater<>> pending;
  const double ap_tau_ps = params.afterpulse_tau_us * 1e6;

  bool have = false;
  TimePs blocked_until = 0;
  std::size_t next = 0;
  while (next < merged.size() || !pending.empty()) {
    Candidate c;
    if (!pending.empty() && (next >= merged.size() || pending.top() < merged[next].time)) {
      c = {pending.top(), Origin::kAfterpulse};
      pending.pop();
    } else {
      c = merged[next++];
    }
    if (have && c.time < blocked_until) {
      if (params.dead_mode == DeadTimeMode::kParalyzable) blocked_until = c.time + dead;
      continue;
    }
    out.events.push_back({c.time, params.channel, c.origin});
    have = true;
    blocked_until = c.time + dead;
    // Fixed two draws per accepted click.
    const double u = ap.uniform();
    const double delay = ap.exponential(ap_tau_ps);
    if (u < params.afterpulse_prob) {
      const TimePs t = c.time + std::max<TimePs>(1, static_cast<TimePs>(std::llround(delay)));
      if (t <= input.duration && gates.offset_in_gate(t)) pending.push(t);
    }
  }
  return out;
}

}  // namespace qdup
