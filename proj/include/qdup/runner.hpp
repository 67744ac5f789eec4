#pragma once

// Runs one configured scenario and writes its artifacts into the output
// directory. Outputs depend only on the effective config (which includes
// the seed), so two runs of the same config produce identical bytes.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "qdup/config.hpp"
#include "qdup/phes.hpp"
#include "qdup/pipeline.hpp"
#include "qdup/report.hpp"

namespace qdup {

struct RunOutput {
  Json summary;
  std::vector<std::filesystem::path> files;  // relative to the output directory
};

namespace detail {

class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path dir, std::string hash) : dir_(std::move(dir)), hash_(std::move(hash)) {
    std::filesystem::create_directories(dir_);
  }

  const std::string& hash() const { return hash_; }

  void text(const std::string& name, const std::string& body) {
    write_text(dir_ / name, body);
    files_.push_back(name);
  }
  void histogram(const std::string& stem, const CorrelationHistogram& h) {
    write_histogram(dir_, stem, h, hash_);
    files_.push_back(stem + ".csv");
    files_.push_back(stem + ".json");
  }
  void events(const std::string& name, const EventStream& s, std::uint64_t seed) {
    write_events(dir_ / name, s, seed);
    files_.push_back(name);
  }
  void json(const std::string& name, const Json& j) {
    write_json(dir_ / name, j);
    files_.push_back(name);
  }

  std::vector<std::filesystem::path> files() const { return files_; }
  Json file_list() const {
    Json out = Json::array();
    for (const auto& f : files_) out.push_back(f.generic_string());
    return out;
  }

 private:
  std::filesystem::path dir_;
  std::string hash_;
  std::vector<std::filesystem::path> files_;
};

// Table with a header row; every cell is rendered by format_number.
inline std::string csv_table(const std::string& header, const std::vector<std::vector<double>>& rows) {
  std::string out = header + "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_number(row[i]);
    }
    out += '\n';
  }
  return out;
}

inline Json optional_json(const std::optional<G2Result>& r) { return r ? to_json(*r) : Json(nullptr); }

inline std::string power_label(double p) { return format_number(p) + "mW"; }

inline Json run_budget(const ScenarioConfig& c, ArtifactWriter& w) {
  const auto& q = c.qpm;
  const auto& b = c.budget;
  const double eta_peak = internal_efficiency(q.p_peak_mw, q);
  const double overall_peak = overall_detection_efficiency(b, eta_peak);
  const double measured = c.budget_report.measured_overall;
  const WavelengthNm signal{c.budget_report.signal_nm};
  const WavelengthNm pump{q.pump_wavelength_nm};

  std::vector<std::vector<double>> rows;
  Json points = Json::array();
  for (double p : c.budget_report.snr_powers_mw) {
    const double eta = internal_efficiency(p, q);
    const double overall = overall_detection_efficiency(b, eta);
    const double asr = asr_background_rate(p, q);
    const double sig = c.emitter.target_flux_fiber * overall;
    const double snr = signal_to_background(p, c.emitter.target_flux_fiber, q, b, c.si.dark_rate);
    rows.push_back({p, eta, overall, sig, asr, snr});
    points.push_back({{"pump_power_mw", p},
                      {"eta_internal", eta},
                      {"overall", overall},
                      {"signal_rate", sig},
                      {"asr_rate", asr},
                      {"signal_to_background", number(snr)}});
  }
  w.text("efficiency_vs_power.csv",
         csv_table("pump_power_mw,eta_internal,overall,signal_rate,asr_rate,signal_to_background", rows));
  return {{"loss_product", b.loss_product()},
          {"overall_at_peak_power", overall_peak},
          {"internal_from_measured_overall", internal_from_overall(measured, b)},
          {"end_to_end", end_to_end_efficiency(b, measured)},
          {"fiber_power_w", flux_to_power(c.emitter.target_flux_fiber, signal)},
          {"output_wavelength_nm", sum_frequency(signal, pump).nm()},
          {"true_g2_zero", true_g2_zero(c.emitter)},
          {"by_power", points}};
}

// Local maxima standing `sigmas` Poisson deviations above the background.
inline Json spectrum_peaks(const SpectrumScan& s, double background, double sigmas) {
  Json out = Json::array();
  const double thr = background + sigmas * std::sqrt(std::max(background, 1.0));
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (s.counts[i] > thr && s.counts[i] > s.counts[i - 1] && s.counts[i] >= s.counts[i + 1]) {
      out.push_back({{"pump_nm", s.pump_nm[i]}, {"signal_nm", s.signal_nm[i]}, {"counts", s.counts[i]}});
    }
  }
  return out;
}

inline Json run_spectrum_scenario(const ScenarioConfig& c, ArtifactWriter& w) {
  const SpectrumRun r = run_spectrum(spectrum_setup(c), c.seed);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < r.scan.size(); ++i) {
    rows.push_back({r.scan.pump_nm[i], r.scan.signal_nm[i], r.scan.counts[i], r.deconvolved.counts[i]});
  }
  w.text("spectrum.csv", csv_table("pump_nm,signal_nm,counts,deconvolved", rows));
  const double bg = r.background_rate * r.scan.dwell_s;
  return {{"background_rate", r.background_rate},
          {"total_counts", r.scan.total()},
          {"peaks", spectrum_peaks(r.scan, bg, 5.0)},
          {"deconvolved_peaks", spectrum_peaks(r.deconvolved, bg, 5.0)}};
}

inline Json run_response_scenario(const ScenarioConfig& c, ArtifactWriter& w) {
  const ResponseSetup setup = response_setup(c);
  const ResponseRun r = run_response(setup, c.seed);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < r.detuning_nm.size(); ++i) {
    const std::size_t k = r.scan_index[i];
    rows.push_back({r.detuning_nm[i], r.laser_scan.pump_nm[k], r.laser_scan.counts[k], r.dark_scan.counts[k], r.net[i]});
  }
  w.text("response.csv", csv_table("detuning_nm,pump_nm,laser_counts,dark_counts,net", rows));
  return {{"metrics", to_json(r.metrics)}, {"points", r.detuning_nm.size()}};
}

inline Json run_lifetime_scenario(const ScenarioConfig& c, ArtifactWriter& w) {
  const auto det = c.scenario == Scenario::kLifetimeInGaAs ? LifetimeDetector::kInGaAs : LifetimeDetector::kSi;
  const LifetimeRun r = run_lifetime(lifetime_setup(c), det, c.duration_s, c.seed, c.emit_events);
  w.histogram("signal_histogram", r.signal);
  w.histogram("dark_histogram", r.dark);
  w.text("subtracted.csv", value_histogram_csv(r.subtracted));
  if (c.emit_events) w.events("events.phes", r.signal_clicks, c.seed);
  Json out = {{"detector", det == LifetimeDetector::kSi ? "si" : "ingaas"},
              {"signal_counts", r.signal.total()},
              {"dark_counts", r.dark.total()},
              {"dynamic_range", r.signal.total() ? number(r.dynamic_range) : Json(nullptr)},
              {"fit", r.fit ? to_json(*r.fit) : Json(nullptr)}};
  if (!r.fit_error.empty()) out["fit_error"] = r.fit_error;
  return out;
}

inline Json g2_run_json(const G2Run& r) {
  Json per_seed = Json::array();
  for (const auto& s : r.per_seed_result) per_seed.push_back(optional_json(s));
  return {{"pooled", optional_json(r.result)},
          {"per_seed", per_seed},
          {"clicks_a", r.clicks_a},
          {"clicks_b", r.clicks_b},
          {"coincidences", r.pooled.total()}};
}

inline EventStream merged_arms(const HbtClicks& c) { return merge_streams(c.arm_a, c.arm_b); }

inline Json run_g2_scenario(const ScenarioConfig& c, ArtifactWriter& w) {
  const G2Run r = run_g2(hbt_setup(c), c.duration_s, c.repetitions, c.histogram, g2_options(c), c.seed, c.emit_events);
  w.histogram("g2_histogram", r.pooled);
  if (c.emit_events && r.first_clicks) w.events("events.phes", merged_arms(*r.first_clicks), c.seed);
  return g2_run_json(r);
}

inline Json run_sweep_scenario(const ScenarioConfig& c, ArtifactWriter& w) {
  const PowerSweep s = g2_vs_power(c.sweep_powers_mw, hbt_setup(c), c.duration_s, c.repetitions, c.histogram,
                                   g2_options(c), c.seed, c.threads, c.emit_events);
  std::vector<std::vector<double>> rows;
  Json points = Json::array();
  for (const auto& p : s.points) {
    const auto& g = p.run.result;
    const double nan = std::nan("");
    rows.push_back({p.power_mw, g ? g->g2_zero : nan, g ? g->err : nan, g ? g->raw_suppression : nan,
                    g ? g->raw_err : nan});
    Json pj = g2_run_json(p.run);
    pj["pump_power_mw"] = p.power_mw;
    points.push_back(pj);
    w.histogram("g2_histogram_" + power_label(p.power_mw), p.run.pooled);
    if (c.emit_events && p.run.first_clicks) {
      w.events("events_" + power_label(p.power_mw) + ".phes", merged_arms(*p.run.first_clicks), c.seed);
    }
  }
  w.text("sweep.csv", csv_table("pump_power_mw,g2_zero,err,raw_suppression,raw_err", rows));
  return {{"points", points}, {"best_power_mw", s.best ? Json(s.points[*s.best].power_mw) : Json(nullptr)}};
}

}  // namespace detail

// Runs `c` and writes summary.json plus scenario artifacts into `c.out_dir`.
inline RunOutput run_scenario(const ScenarioConfig& c) {
  const Json effective = effective_config(c);
  const std::string hash = config_hash(effective);
  detail::ArtifactWriter w(c.out_dir, hash);
  Json results;
  switch (c.scenario) {
    case Scenario::kBudget: results = detail::run_budget(c, w); break;
    case Scenario::kSpectrum: results = detail::run_spectrum_scenario(c, w); break;
    case Scenario::kInstrumentResponse: results = detail::run_response_scenario(c, w); break;
    case Scenario::kLifetimeSi:
    case Scenario::kLifetimeInGaAs: results = detail::run_lifetime_scenario(c, w); break;
    case Scenario::kG2: results = detail::run_g2_scenario(c, w); break;
    case Scenario::kG2PowerSweep: results = detail::run_sweep_scenario(c, w); break;
  }
  RunOutput out;
  out.summary = {{"scenario", to_string(c.scenario)},
                 {"seed", c.seed},
                 {"config_hash", hash},
                 {"config", effective},
                 {"results", results},
                 {"files", w.file_list()}};
  w.json("summary.json", out.summary);
  out.files = w.files();
  return out;
}

}  // namespace qdup
