#pragma once

// End-to-end measurement chains: emitter -> upconversion -> detectors ->
// correlator -> analysis. Each run takes one master seed; every stage gets a
// sub-seed derived from it by a fixed stage id.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "qdup/core.hpp"
#include "qdup/detector.hpp"
#include "qdup/emitter.hpp"
#include "qdup/g2.hpp"
#include "qdup/lifetime.hpp"
#include "qdup/rng.hpp"
#include "qdup/spectrum.hpp"
#include "qdup/tcspc.hpp"
#include "qdup/upconversion.hpp"

namespace qdup {

enum Stage : std::uint64_t {
  kStageEmission = 1,
  kStageConversion = 2,
  kStageSplit = 3,
  kStageArmA = 4,
  kStageArmB = 5,
  kStageDetector = 6,
  kStageDarkEmission = 7,
  kStageDarkConversion = 8,
  kStageDarkDetector = 9,
  kStagePathLoss = 10,
  kStageDarkPathLoss = 11,
  kStageSpectrum = 12,
  kStageResponseLaser = 13,
  kStageResponseDark = 14,
  kStageRepetition = 100,
  kStagePowerPoint = 101,
};

inline std::uint64_t stage_seed(std::uint64_t master, std::uint64_t stage) {
  return rng::derive(master, rng::Component::kScenario, stage);
}

// Seed of repetition `r` of a pooled run.
inline std::uint64_t repetition_seed(std::uint64_t master, std::uint64_t r) {
  return rng::derive(stage_seed(master, kStageRepetition), r);
}

// Seed of one power point of a sweep, keyed by the power in microwatts so a
// point's randomness does not depend on the other points in the list.
inline std::uint64_t power_seed(std::uint64_t master, double power_mw) {
  return rng::derive(stage_seed(master, kStagePowerPoint), static_cast<std::uint64_t>(std::llround(power_mw * 1e3)));
}

// Independent thinning with survival probability `eta`.
inline EventStream attenuate(const EventStream& input, double eta, std::uint64_t seed) {
  check_fraction(eta, "path efficiency");
  if (eta == 1.0) return input;
  EventStream out;
  out.duration = input.duration;
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (rng::uniform_at(seed, i) < eta) out.events.push_back(input.events[i]);
  }
  return out;
}

inline TimePs laser_period_ps(const EmitterParams& e) {
  const double p = e.period_ps();
  const auto r = static_cast<TimePs>(std::llround(p));
  if (r <= 0 || std::abs(p - static_cast<double>(r)) > 1e-6) {
    throw DomainError("laser period must be a whole number of picoseconds");
  }
  return r;
}

// ---------------------------------------------------------------- HBT / g2

struct HbtSetup {
  EmitterParams emitter;
  QpmParams qpm;
  EfficiencyBudget budget;
  SiSpadParams si;
  double split_ratio = 0.5;
  WavelengthNm line{1302.6};
};

struct HbtClicks {
  EventStream arm_a;
  EventStream arm_b;
};

inline HbtClicks simulate_hbt(const HbtSetup& s, double duration_s, std::uint64_t seed) {
  EmitterParams em = s.emitter;
  em.channel = static_cast<std::uint8_t>(Channel::kSignal);
  const EventStream pl = generate_emission(em, duration_s, stage_seed(seed, kStageEmission));
  const LineMap lines{{em.channel, s.line}};
  const EventStream up = convert_stream(pl, s.qpm, s.budget, lines, stage_seed(seed, kStageConversion));
  const auto [to_a, to_b] = beamsplit(up, s.split_ratio, stage_seed(seed, kStageSplit));
  SiSpadParams da = s.si, db = s.si;
  da.channel = static_cast<std::uint8_t>(Channel::kArmA);
  db.channel = static_cast<std::uint8_t>(Channel::kArmB);
  return {detect_si(to_a, da, stage_seed(seed, kStageArmA)), detect_si(to_b, db, stage_seed(seed, kStageArmB))};
}

inline HistogramConfig default_g2_histogram() {
  return {250, -310 * kPsPerNs, 310 * kPsPerNs, HistogramMode::kAllPairs};
}

struct G2Run {
  CorrelationHistogram pooled{default_g2_histogram()};
  std::vector<CorrelationHistogram> per_seed;
  std::optional<G2Result> result;                 // pooled histogram
  std::vector<std::optional<G2Result>> per_seed_result;
  std::uint64_t clicks_a = 0;
  std::uint64_t clicks_b = 0;
  std::optional<HbtClicks> first_clicks;  // repetition 0, when requested
};

// Runs `repetitions` independent HBT experiments of `duration_s` each and
// pools their coincidence histograms. Analysis is skipped (nullopt) for a
// histogram without counts.
inline G2Run run_g2(const HbtSetup& s, double duration_s, int repetitions, const HistogramConfig& hcfg,
                    const G2Options& opt, std::uint64_t seed, bool keep_clicks = false) {
  if (repetitions < 1) throw DomainError("repetitions must be at least 1");
  G2Run run;
  run.pooled = CorrelationHistogram(hcfg);
  for (int r = 0; r < repetitions; ++r) {
    HbtClicks clicks = simulate_hbt(s, duration_s, repetition_seed(seed, static_cast<std::uint64_t>(r)));
    run.clicks_a += clicks.arm_a.size();
    run.clicks_b += clicks.arm_b.size();
    auto h = coincidence_histogram(strip(clicks.arm_a), strip(clicks.arm_b), hcfg);
    run.pooled = merge(run.pooled, h);
    run.per_seed_result.push_back(h.total() > 0 ? std::optional(extract_g2(h, opt)) : std::nullopt);
    run.per_seed.push_back(std::move(h));
    if (keep_clicks && r == 0) run.first_clicks = std::move(clicks);
  }
  if (run.pooled.total() > 0) run.result = extract_g2(run.pooled, opt);
  return run;
}

struct PowerPoint {
  double power_mw = 0.0;
  G2Run run;
};

struct PowerSweep {
  std::vector<PowerPoint> points;
  std::optional<std::size_t> best;  // index of the smallest g2_zero
};

// g2 at each pump power. Points run on up to `threads` workers; each uses
// power_seed(seed, P), so results do not depend on the worker count.
inline PowerSweep g2_vs_power(const std::vector<double>& powers_mw, const HbtSetup& s, double duration_s,
                              int repetitions, const HistogramConfig& hcfg, const G2Options& opt, std::uint64_t seed,
                              unsigned threads = 1, bool keep_clicks = false) {
  if (powers_mw.empty()) throw DomainError("power list is empty");
  for (double p : powers_mw) {
    if (!(p >= s.qpm.min_pump_mw && p <= s.qpm.max_pump_mw)) {
      throw DomainError("sweep power " + std::to_string(p) + " mW outside the configured pump range");
    }
  }
  PowerSweep sweep;
  sweep.points.resize(powers_mw.size());
  auto one = [&](std::size_t i) {
    HbtSetup local = s;
    local.qpm.pump_power_mw = powers_mw[i];
    sweep.points[i] = {powers_mw[i], run_g2(local, duration_s, repetitions, hcfg, opt, power_seed(seed, powers_mw[i]), keep_clicks)};
  };
  threads = std::max(1U, threads);
  for (std::size_t start = 0; start < powers_mw.size(); start += threads) {
    std::vector<std::future<void>> jobs;
    const std::size_t stop = std::min(powers_mw.size(), start + threads);
    for (std::size_t i = start; i < stop; ++i) {
      if (threads == 1) {
        one(i);
      } else {
        jobs.push_back(std::async(std::launch::async, one, i));
      }
    }
    for (auto& j : jobs) j.get();
  }
  for (std::size_t i = 0; i < sweep.points.size(); ++i) {
    const auto& r = sweep.points[i].run.result;
    if (!r) continue;
    if (!sweep.best || r->g2_zero < sweep.points[*sweep.best].run.result->g2_zero) sweep.best = i;
  }
  return sweep;
}

// ---------------------------------------------------------------- lifetime

enum class LifetimeDetector : std::uint8_t { kSi, kInGaAs };

struct LifetimeSetup {
  EmitterParams emitter;
  QpmParams qpm;
  EfficiencyBudget budget;
  SiSpadParams si;
  InGaAsSpadParams ingaas;
  WavelengthNm line{1302.6};
  double ingaas_path_efficiency = 1.0;  // fiber to InGaAs SPAD
  HistogramConfig histogram{256, 0, 19968, HistogramMode::kAllPairs};
  // Phase of the histogram's start clock relative to the laser pulses. For
  // the Si path the pulse then sits at delay -phase; for the gated path the
  // clock ticks at gate opening.
  TimePs sync_phase = -864;
  FitWindow floor{15 * kPsPerNs, 19968};
  std::optional<FitWindow> fit_window;  // default: maximum bin to range end
};

// Setup for the gated InGaAs measurement: gates slaved to the laser clock,
// histogram clock at gate opening.
inline LifetimeSetup ingaas_defaults(LifetimeSetup s) {
  s.ingaas.gate_delay_ns = 17.0;
  s.sync_phase = 17 * kPsPerNs;
  return s;
}

struct LifetimeRun {
  LifetimeDetector detector = LifetimeDetector::kSi;
  CorrelationHistogram signal{HistogramConfig{}};
  CorrelationHistogram dark{HistogramConfig{}};
  ValueHistogram subtracted;
  std::optional<FitResult> fit;
  std::string fit_error;
  double dynamic_range = 0.0;
  EventStream signal_clicks;
};

namespace detail {

inline EventStream lifetime_clicks(const LifetimeSetup& s, LifetimeDetector det, const EmitterParams& em,
                                   double duration_s, std::uint64_t seed, bool dark) {
  const EventStream pl = generate_emission(em, duration_s, stage_seed(seed, dark ? kStageDarkEmission : kStageEmission));
  if (det == LifetimeDetector::kSi) {
    const LineMap lines{{em.channel, s.line}};
    const EventStream up =
        convert_stream(pl, s.qpm, s.budget, lines, stage_seed(seed, dark ? kStageDarkConversion : kStageConversion));
    return detect_si(up, s.si, stage_seed(seed, dark ? kStageDarkDetector : kStageDetector));
  }
  InGaAsSpadParams p = s.ingaas;
  p.sync_period_ps = static_cast<double>(laser_period_ps(em));
  const EventStream in = attenuate(pl, s.ingaas_path_efficiency, stage_seed(seed, dark ? kStageDarkPathLoss : kStagePathLoss));
  return detect_ingaas(in, p, stage_seed(seed, dark ? kStageDarkDetector : kStageDetector));
}

}  // namespace detail

// Time-resolved PL against the laser clock, with a second run of equal
// length with the emitter off for the dark trace. The lifetime is fitted on
// the difference; the dynamic range is taken on the raw signal trace.
inline LifetimeRun run_lifetime(const LifetimeSetup& s, LifetimeDetector det, double duration_s, std::uint64_t seed,
                                bool keep_clicks = false) {
  LifetimeRun run;
  run.detector = det;
  EmitterParams em = s.emitter;
  em.channel = static_cast<std::uint8_t>(Channel::kSignal);
  EmitterParams off = em;
  off.target_flux_fiber = 0.0;
  off.p_emit_sat.reset();

  const TimePs period = laser_period_ps(em);
  EventStream clicks = detail::lifetime_clicks(s, det, em, duration_s, seed, false);
  const EventStream dark_clicks = detail::lifetime_clicks(s, det, off, duration_s, seed, true);
  run.signal = sync_histogram(strip(clicks), period, s.sync_phase, s.histogram);
  run.dark = sync_histogram(strip(dark_clicks), period, s.sync_phase, s.histogram);
  run.subtracted = difference_histogram(run.signal, run.dark);
  if (keep_clicks) run.signal_clicks = std::move(clicks);

  if (run.signal.total() > 0) {
    run.dynamic_range = dynamic_range(run.signal, s.floor);
    try {
      run.fit = fit_lifetime(run.subtracted, s.fit_window.value_or(default_fit_window(run.subtracted)));
    } catch (const FitError& e) {
      run.fit_error = e.what();
    }
  }
  return run;
}

// ---------------------------------------------------------------- spectra

struct SpectrumSetup {
  std::vector<SpectralLine> lines{{WavelengthNm{1302.6}, 1e4}, {WavelengthNm{1301.6}, 5e3}};
  ScanGrid grid;
  QpmParams qpm;
  EfficiencyBudget budget;
  double dwell_s = 1.0;
  double dark_rate = 100.0;  // detector dark counts/s
  int deconvolve_iterations = 50;
};

struct SpectrumRun {
  SpectrumScan scan;
  SpectrumScan deconvolved;
  double background_rate = 0.0;
};

// Pump-wavelength scan of the QD lines at fixed pump power; background is
// ASR at that power plus detector dark counts.
inline SpectrumRun run_spectrum(const SpectrumSetup& s, std::uint64_t seed) {
  SpectrumRun run;
  run.background_rate = asr_background_rate(s.qpm.pump_power_mw, s.qpm) + s.dark_rate;
  SpectrumOptions opt{s.dwell_s, run.background_rate, true, stage_seed(seed, kStageSpectrum)};
  run.scan = assemble_spectrum(s.lines, s.grid, s.qpm, s.budget, opt);
  const double step_signal = std::abs(s.qpm.center_slope) * s.grid.step_nm;
  if (step_signal <= 0.0) throw DomainError("scan step maps to zero signal step");
  const auto half = static_cast<std::size_t>(std::ceil(3.0 * s.qpm.acceptance_fwhm_nm / step_signal));
  run.deconvolved = deconvolve(run.scan, sampled_response(s.qpm.acceptance_fwhm_nm, step_signal, 2 * half + 1),
                               s.deconvolve_iterations);
  return run;
}

struct ResponseSetup {
  WavelengthNm laser{1302.6};  // narrow-line test laser
  double flux = 1e6;           // photons/s in fiber
  double span_nm = 1.2;        // pump scanned over pump_ref +- span
  double step_nm = 0.005;
  double dwell_s = 1.0;
  QpmParams qpm;
  EfficiencyBudget budget;
  double dark_rate = 100.0;
};

struct ResponseRun {
  SpectrumScan laser_scan;
  SpectrumScan dark_scan;
  std::vector<double> detuning_nm;  // laser minus phase-matched wavelength, ascending
  std::vector<double> net;          // laser scan minus pump-only scan, same order
  std::vector<std::size_t> scan_index;  // position of each entry in the scans
  ResponseMetrics metrics;
};

// Instrument response: scan a narrow line through the acceptance, subtract a
// pump-only scan, then read off width and sidelobes.
inline ResponseRun run_response(const ResponseSetup& s, std::uint64_t seed) {
  if (!(s.span_nm > 0.0) || !(s.step_nm > 0.0)) throw DomainError("response span and step must be positive");
  const ScanGrid grid{s.qpm.pump_ref_nm - s.span_nm, s.qpm.pump_ref_nm + s.span_nm, s.step_nm};
  const double bg = asr_background_rate(s.qpm.pump_power_mw, s.qpm) + s.dark_rate;
  ResponseRun run;
  run.laser_scan = assemble_spectrum({{s.laser, s.flux}}, grid, s.qpm, s.budget,
                                     {s.dwell_s, bg, true, stage_seed(seed, kStageResponseLaser)});
  run.dark_scan = assemble_spectrum({}, grid, s.qpm, s.budget, {s.dwell_s, bg, true, stage_seed(seed, kStageResponseDark)});
  std::vector<std::size_t> order(run.laser_scan.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return s.laser.nm() - run.laser_scan.signal_nm[a] < s.laser.nm() - run.laser_scan.signal_nm[b];
  });
  run.scan_index = order;
  for (auto i : order) {
    run.detuning_nm.push_back(s.laser.nm() - run.laser_scan.signal_nm[i]);
    run.net.push_back(run.laser_scan.counts[i] - run.dark_scan.counts[i]);
  }
  run.metrics = measure_response(run.detuning_nm, run.net);
  return run;
}

}  // namespace qdup
