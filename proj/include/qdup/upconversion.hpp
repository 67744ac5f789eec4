#pragma once

// Sum-frequency upconversion stage: quasi-phase-matching acceptance,
// pump-power dependent internal efficiency, pre-detector losses and
// anti-Stokes Raman noise.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>

#include "qdup/core.hpp"
#include "qdup/rng.hpp"

namespace qdup {

struct QpmParams {
  double pump_wavelength_nm = 1556.8;
  double qpm_center_at_ref_nm = 1302.6;  // phase-matched signal when pump = pump_ref
  double pump_ref_nm = 1556.8;
  double center_slope = -1.0;  // d(center)/d(pump)
  double acceptance_fwhm_nm = 0.35;
  double pump_power_mw = 85.0;
  double p_peak_mw = 85.0;
  double eta_internal_peak = 0.752;
  double asr_coeff = 11.2;  // counts/s/mW at the detector behind a 20 nm filter
  double filter_bandwidth_nm = 20.0;
  double min_pump_mw = 25.0;
  double max_pump_mw = 120.0;

  void validate() const {
    WavelengthNm{pump_wavelength_nm};
    WavelengthNm{qpm_center_at_ref_nm};
    WavelengthNm{pump_ref_nm};
    if (!(acceptance_fwhm_nm > 0.0)) throw DomainError("acceptance_fwhm must be positive");
    if (!(p_peak_mw > 0.0)) throw DomainError("p_peak must be positive");
    check_fraction(eta_internal_peak, "eta_internal_peak");
    if (!(asr_coeff >= 0.0)) throw DomainError("asr_coeff must be nonnegative");
    if (!(filter_bandwidth_nm > 0.0)) throw DomainError("filter_bandwidth must be positive");
    if (!(pump_power_mw >= min_pump_mw && pump_power_mw <= max_pump_mw)) {
      throw DomainError("pump_power " + std::to_string(pump_power_mw) + " mW outside [" +
                        std::to_string(min_pump_mw) + ", " + std::to_string(max_pump_mw) + "] mW");
    }
  }

  // Signal wavelength phase-matched at the given pump wavelength.
  double center_for_pump(double pump_nm) const {
    return qpm_center_at_ref_nm + center_slope * (pump_nm - pump_ref_nm);
  }
  double center() const { return center_for_pump(pump_wavelength_nm); }

  // Pump wavelength whose phase-matched signal is `signal_nm`.
  double pump_for_center(double signal_nm) const {
    if (center_slope == 0.0) throw DomainError("center_slope of zero has no inverse");
    return pump_ref_nm + (signal_nm - qpm_center_at_ref_nm) / center_slope;
  }
};

// x at which sinc^2(x) = 1/2.
inline constexpr double kSincHalfMaxX = 1.39156;

// sinc^2 spectral acceptance, scaled so its full width at half maximum is
// `acceptance_fwhm_nm`.
inline double qpm_transfer(double detuning_nm, double acceptance_fwhm_nm) {
  if (!(acceptance_fwhm_nm > 0.0)) throw DomainError("acceptance_fwhm must be positive");
  const double x = (2.0 * kSincHalfMaxX / acceptance_fwhm_nm) * detuning_nm;
  if (x == 0.0) return 1.0;
  const double s = std::sin(x) / x;
  return s * s;
}

// Undepleted-pump sum-frequency law eta_peak * sin^2(pi/2 * sqrt(P / P_peak)).
inline double internal_efficiency(double pump_power_mw, const QpmParams& params) {
  if (!(pump_power_mw >= 0.0)) throw DomainError("pump_power must be nonnegative");
  const double s = std::sin(0.5 * std::numbers::pi * std::sqrt(pump_power_mw / params.p_peak_mw));
  return params.eta_internal_peak * s * s;
}

// Detected ASR counts per second (after the SPAD quantum efficiency).
inline double asr_background_rate(double pump_power_mw, const QpmParams& params) {
  if (!(pump_power_mw >= 0.0)) throw DomainError("pump_power must be nonnegative");
  return params.asr_coeff * pump_power_mw * (params.filter_bandwidth_nm / 20.0);
}

// Detected signal over detected background (ASR + detector dark). Returns
// +infinity when the background vanishes.
inline double signal_to_background(double pump_power_mw, double signal_flux_fiber, const QpmParams& params,
                                   const EfficiencyBudget& budget, double dark_rate = 100.0) {
  const double signal = signal_flux_fiber *
                        overall_detection_efficiency(budget, internal_efficiency(pump_power_mw, params)) *
                        qpm_transfer(0.0, params.acceptance_fwhm_nm);
  const double background = asr_background_rate(pump_power_mw, params) + dark_rate;
  if (background <= 0.0) return std::numeric_limits<double>::infinity();
  return signal / background;
}

using LineMap = std::map<std::uint8_t, WavelengthNm>;

namespace detail {
enum UpconversionStage : std::uint64_t { kThinning = 1, kAsr = 2 };
}

// Thins each event by the full pre-detector transmission at its line's
// detuning and injects ASR photons as a homogeneous Poisson process. The ASR
// rate is referred back through the detector quantum efficiency so that the
// efficiency is applied once, at detection.
inline EventStream convert_stream(const EventStream& input, const QpmParams& params,
                                  const EfficiencyBudget& budget, const LineMap& lines, std::uint64_t seed) {
  require_sorted(input, "convert_stream");
  budget.validate();

  const double eta_int = internal_efficiency(params.pump_power_mw, params);
  const double chain = budget.pre_detector_product(eta_int);
  const double center = params.center();

  // Survival probability per channel.
  std::map<std::uint8_t, double> survive;
  for (const auto& e : input.events) {
    if (survive.count(e.channel)) continue;
    const auto it = lines.find(e.channel);
    if (it == lines.end()) {
      throw ConfigError("line_wavelengths", "no wavelength mapped for channel " + std::to_string(e.channel));
    }
    survive[e.channel] = chain * qpm_transfer(it->second.nm() - center, params.acceptance_fwhm_nm);
  }

  EventStream kept;
  kept.duration = input.duration;
  const std::uint64_t thin_key = rng::derive(seed, rng::Component::kUpconversion, detail::kThinning);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const auto& e = input.events[i];
    if (rng::uniform_at(thin_key, i) < survive[e.channel]) kept.events.push_back(e);
  }

  const double asr_rate = budget.eta_spad > 0.0
                              ? asr_background_rate(params.pump_power_mw, params) / budget.eta_spad
                              : 0.0;
  if (asr_rate <= 0.0 || input.duration == 0) return kept;

  EventStream asr;
  asr.duration = input.duration;
  const double mean_gap_ps = 1e12 / asr_rate;
  const TimePs bucket = static_cast<TimePs>(1e12);
  for (TimePs b0 = 0, bi = 0; b0 < input.duration; b0 += bucket, ++bi) {
    rng::CounterRng g(rng::derive(seed, rng::Component::kUpconversion,
                                  detail::kAsr * 1'000'003ULL + static_cast<std::uint64_t>(bi)));
    const TimePs b1 = std::min(input.duration, b0 + bucket);
    double t = static_cast<double>(b0) + g.exponential(mean_gap_ps);
    while (t < static_cast<double>(b1)) {
      asr.events.push_back({static_cast<TimePs>(t), static_cast<std::uint8_t>(Channel::kSignal), Origin::kAsr});
      t += g.exponential(mean_gap_ps);
    }
  }
  return merge_streams(kept, asr);
}

}  // namespace qdup
