#pragma once

// Units, photon events and the closed-form efficiency/energy arithmetic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qdup/error.hpp"

namespace qdup {

// Planck constant times speed of light [J m].
inline constexpr double kPlanckTimesC = 1.98645e-25;

// Integer picoseconds. Timestamps count from scenario start.
using TimePs = std::int64_t;

inline constexpr TimePs kPsPerNs = 1000;
inline constexpr TimePs kPsPerUs = 1000 * kPsPerNs;
inline constexpr double kPsPerS = 1e12;

// Converts seconds to picoseconds, rejecting values that do not fit.
inline TimePs seconds_to_ps(double seconds) {
  if (!std::isfinite(seconds) || seconds < 0.0) {
    throw DomainError("duration must be finite and nonnegative");
  }
  const long double ps = static_cast<long double>(seconds) * 1e12L;
  if (ps >= static_cast<long double>(std::numeric_limits<TimePs>::max())) {
    throw RangeError("duration of " + std::to_string(seconds) + " s overflows 64-bit picoseconds");
  }
  return static_cast<TimePs>(std::llround(ps));
}

inline double ps_to_seconds(TimePs t) { return static_cast<double>(t) / kPsPerS; }

class WavelengthNm {
 public:
  explicit WavelengthNm(double nm) : nm_(nm) {
    if (!std::isfinite(nm) || nm <= 0.0) {
      throw DomainError("wavelength must be finite and positive, got " + std::to_string(nm));
    }
  }

  double nm() const noexcept { return nm_; }
  double meters() const noexcept { return nm_ * 1e-9; }

  friend bool operator==(const WavelengthNm&, const WavelengthNm&) = default;
  friend auto operator<=>(const WavelengthNm&, const WavelengthNm&) = default;

 private:
  double nm_;
};

enum class Channel : std::uint8_t { kSignal = 0, kArmA = 1, kArmB = 2, kSync = 3 };

// Simulation bookkeeping only; analysis consumes stripped TimeStreams.
enum class Origin : std::uint8_t { kQd = 0, kUncorrelated = 1, kAsr = 2, kDark = 3, kAfterpulse = 4 };

inline constexpr std::uint8_t kOriginCount = 5;

struct PhotonEvent {
  TimePs time = 0;
  std::uint8_t channel = 0;
  Origin origin = Origin::kQd;

  friend bool operator==(const PhotonEvent&, const PhotonEvent&) = default;
};

inline bool time_less(const PhotonEvent& a, const PhotonEvent& b) { return a.time < b.time; }

// Time-sorted photon records over [0, duration].
struct EventStream {
  std::vector<PhotonEvent> events;
  TimePs duration = 0;

  std::size_t size() const noexcept { return events.size(); }
  bool empty() const noexcept { return events.empty(); }

  bool is_valid() const {
    if (duration < 0) return false;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const TimePs t = events[i].time;
      if (t < 0 || t > duration) return false;
      if (i > 0 && t < events[i - 1].time) return false;
    }
    return true;
  }

  std::size_t count(Origin o) const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [o](const PhotonEvent& e) { return e.origin == o; }));
  }

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

inline void require_sorted(const EventStream& s, const char* what) {
  if (!std::is_sorted(s.events.begin(), s.events.end(), time_less)) {
    throw PreconditionError(std::string(what) + ": event stream is not time-sorted");
  }
}

// Stable merge of two sorted streams. On equal timestamps `a` comes first.
inline EventStream merge_streams(const EventStream& a, const EventStream& b) {
  EventStream out;
  out.duration = std::max(a.duration, b.duration);
  out.events.resize(a.size() + b.size());
  std::merge(a.events.begin(), a.events.end(), b.events.begin(), b.events.end(), out.events.begin(),
             time_less);
  return out;
}

// Timestamps only. Every analysis entry point takes this type, so the hidden
// origin labels can never leak into a measured quantity.
struct TimeStream {
  std::vector<TimePs> times;
  TimePs duration = 0;

  std::size_t size() const noexcept { return times.size(); }
  std::span<const TimePs> span() const noexcept { return times; }
};

inline TimeStream strip(const EventStream& s) {
  TimeStream out;
  out.duration = s.duration;
  out.times.reserve(s.size());
  for (const auto& e : s.events) out.times.push_back(e.time);
  return out;
}

// Output wavelength of sum-frequency mixing: 1/out = 1/signal + 1/pump.
inline WavelengthNm sum_frequency(WavelengthNm signal, WavelengthNm pump) {
  return WavelengthNm(1.0 / (1.0 / signal.nm() + 1.0 / pump.nm()));
}

// Pump wavelength that mixes `signal` up to `output`.
inline WavelengthNm pump_for_output(WavelengthNm signal, WavelengthNm output) {
  const double inv = 1.0 / output.nm() - 1.0 / signal.nm();
  if (inv <= 0.0) throw DomainError("output must be shorter than the signal wavelength");
  return WavelengthNm(1.0 / inv);
}

// Optical power [W] carried by a photon flux [1/s] at the given wavelength.
inline double flux_to_power(double rate, WavelengthNm wavelength) {
  if (!(rate >= 0.0)) throw DomainError("photon rate must be nonnegative");
  return rate * kPlanckTimesC / wavelength.meters();
}

// Multiplicative loss chain of the upconversion detector.
struct EfficiencyBudget {
  double eta_wdm = 0.95;
  double eta_ppln_coupling = 0.61;
  double eta_bs_mirrors = 0.81;
  double eta_bf = 0.85;
  double eta_spad = 0.70;
  double eta_internal_peak = 0.752;
  double collection_ftw = 0.001;

  void validate() const {
    const double fields[] = {eta_wdm, eta_bs_mirrors, eta_bf, eta_ppln_coupling,
                             eta_spad, eta_internal_peak, collection_ftw};
    for (double f : fields) {
      if (!(f >= 0.0 && f <= 1.0)) throw DomainError("efficiency factors must lie in [0, 1]");
    }
  }

  // Every factor except the internal conversion efficiency.
  double loss_product() const {
    return eta_wdm * eta_ppln_coupling * eta_bs_mirrors * eta_bf * eta_spad;
  }

  // Pre-detector transmission (everything before the SPAD quantum efficiency).
  double pre_detector_product(double eta_internal) const {
    return eta_wdm * eta_ppln_coupling * eta_internal * eta_bs_mirrors * eta_bf;
  }
};

inline void check_fraction(double f, const char* name) {
  if (!(f >= 0.0 && f <= 1.0)) throw DomainError(std::string(name) + " must lie in [0, 1]");
}

inline double overall_detection_efficiency(const EfficiencyBudget& budget, double eta_internal) {
  budget.validate();
  check_fraction(eta_internal, "eta_internal");
  return budget.eta_wdm * budget.eta_ppln_coupling * eta_internal * budget.eta_bs_mirrors *
         budget.eta_bf * budget.eta_spad;
}

// Internal conversion efficiency implied by a measured overall efficiency.
inline double internal_from_overall(double overall, const EfficiencyBudget& budget) {
  budget.validate();
  check_fraction(overall, "overall");
  const double losses = budget.loss_product();
  if (losses <= 0.0) throw DomainError("loss product must be positive");
  const double internal = overall / losses;
  if (internal > 1.0) {
    throw InconsistencyError("measured efficiency " + std::to_string(overall) +
                             " exceeds the loss-chain bound " + std::to_string(losses));
  }
  return internal;
}

inline double end_to_end_efficiency(const EfficiencyBudget& budget, double overall) {
  budget.validate();
  check_fraction(overall, "overall");
  return budget.collection_ftw * overall;
}

}  // namespace qdup
