#pragma once

// Scenario configuration: strict JSON parsing (unknown keys and wrong types
// are errors naming the key) and the canonical effective-config document
// that is hashed into every output.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdup/pipeline.hpp"
#include "qdup/report.hpp"

namespace qdup {

enum class Scenario : std::uint8_t {
  kBudget,
  kSpectrum,
  kLifetimeSi,
  kLifetimeInGaAs,
  kG2,
  kG2PowerSweep,
  kInstrumentResponse,
};

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::kBudget: return "budget";
    case Scenario::kSpectrum: return "spectrum";
    case Scenario::kLifetimeSi: return "lifetime_si";
    case Scenario::kLifetimeInGaAs: return "lifetime_ingaas";
    case Scenario::kG2: return "g2";
    case Scenario::kG2PowerSweep: return "g2_power_sweep";
    case Scenario::kInstrumentResponse: return "instrument_response";
  }
  return "?";
}

inline std::optional<Scenario> scenario_from_string(const std::string& s) {
  for (auto v : {Scenario::kBudget, Scenario::kSpectrum, Scenario::kLifetimeSi, Scenario::kLifetimeInGaAs,
                 Scenario::kG2, Scenario::kG2PowerSweep, Scenario::kInstrumentResponse}) {
    if (s == to_string(v)) return v;
  }
  return std::nullopt;
}

struct G2Knobs {
  double peak_half_window_ns = 1.5;
  double far_peak_min_delay_ns = 60.0;
  double bg_exclusion_ns = 8.2;
  double split_ratio = 0.5;
  double line_nm = 1302.6;
};

struct LifetimeKnobs {
  double line_nm = 1302.6;
  double ingaas_path_efficiency = 1.0;
  TimePs si_sync_phase_ps = -864;
  TimePs floor_start_ps = 15 * kPsPerNs;
  TimePs floor_end_ps = 19968;
  std::optional<TimePs> fit_start_ps;
  std::optional<TimePs> fit_end_ps;
};

struct BudgetKnobs {
  double measured_overall = 0.210;
  double signal_nm = 1302.6;
  std::vector<double> snr_powers_mw{25.0, 55.0, 85.0, 120.0};
};

struct ScenarioConfig {
  Scenario scenario = Scenario::kBudget;
  std::uint64_t seed = 0;
  double duration_s = 600.0;  // per repetition
  int repetitions = 1;
  unsigned threads = 1;

  EmitterParams emitter;
  QpmParams qpm;
  EfficiencyBudget budget;
  SiSpadParams si;
  InGaAsSpadParams ingaas;
  HistogramConfig histogram;

  G2Knobs g2;
  std::vector<double> sweep_powers_mw{25.0, 85.0, 120.0};
  LifetimeKnobs lifetime;
  SpectrumSetup spectrum;
  ResponseSetup response;
  BudgetKnobs budget_report;

  std::filesystem::path out_dir = "out";
  bool emit_events = false;
};

inline HistogramConfig default_histogram(Scenario s) {
  if (s == Scenario::kLifetimeSi || s == Scenario::kLifetimeInGaAs) {
    return {256, 0, 19968, HistogramMode::kAllPairs};
  }
  return default_g2_histogram();
}

namespace detail {

inline TimePs ns_to_ps(double ns) { return static_cast<TimePs>(std::llround(ns * 1e3)); }

// One JSON object; remembers which keys were read so leftovers can be
// reported.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "$" : path_, "must be a JSON object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k); }

  const Json* find(const std::string& k) {
    seen_.insert(k);
    const auto it = j_.find(k);
    return it == j_.end() ? nullptr : &*it;
  }

  // Real number in [lo, hi] (lo excluded when `open_lo`).
  void number(const std::string& k, double& out, double lo = -INFINITY, double hi = INFINITY, bool open_lo = false) {
    const Json* v = find(k);
    if (!v) return;
    if (!v->is_number()) throw ConfigError(key(k), "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) throw ConfigError(key(k), "must be finite");
    if (open_lo ? !(x > lo) : !(x >= lo)) {
      throw ConfigError(key(k), "must be " + std::string(open_lo ? "> " : ">= ") + format_number(lo));
    }
    if (!(x <= hi)) throw ConfigError(key(k), "must be <= " + format_number(hi));
    out = x;
  }
  void positive(const std::string& k, double& out) { number(k, out, 0.0, INFINITY, true); }
  void nonneg(const std::string& k, double& out) { number(k, out, 0.0); }
  void fraction(const std::string& k, double& out) { number(k, out, 0.0, 1.0); }

  void integer(const std::string& k, std::int64_t& out, std::int64_t lo, std::int64_t hi) {
    const Json* v = find(k);
    if (!v) return;
    if (!v->is_number_integer()) throw ConfigError(key(k), "expected an integer");
    if (v->is_number_unsigned() && v->get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      throw ConfigError(key(k), "out of range");
    }
    const auto x = v->get<std::int64_t>();
    if (x < lo || x > hi) {
      throw ConfigError(key(k), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    out = x;
  }

  void boolean(const std::string& k, bool& out) {
    const Json* v = find(k);
    if (!v) return;
    if (!v->is_boolean()) throw ConfigError(key(k), "expected true or false");
    out = v->get<bool>();
  }

  void string(const std::string& k, std::string& out) {
    const Json* v = find(k);
    if (!v) return;
    if (!v->is_string()) throw ConfigError(key(k), "expected a string");
    out = v->get<std::string>();
  }

  void number_list(const std::string& k, std::vector<double>& out, double lo, double hi) {
    const Json* v = find(k);
    if (!v) return;
    if (!v->is_array() || v->empty()) throw ConfigError(key(k), "expected a non-empty array of numbers");
    std::vector<double> xs;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto& e = (*v)[i];
      const std::string ek = key(k) + "[" + std::to_string(i) + "]";
      if (!e.is_number()) throw ConfigError(ek, "expected a number");
      const double x = e.get<double>();
      if (!(x >= lo && x <= hi)) throw ConfigError(ek, "must lie in [" + format_number(lo) + ", " + format_number(hi) + "]");
      xs.push_back(x);
    }
    out = std::move(xs);
  }

  std::optional<Section> child(const std::string& k) {
    const Json* v = find(k);
    if (!v) return std::nullopt;
    return Section(*v, key(k));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(key(it.key()), "unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Runs a component's own validation and reports failures against `key`.
template <class F>
void validated(const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

inline void parse_emitter(Section s, EmitterParams& p) {
  s.positive("rep_rate_hz", p.rep_rate_hz);
  s.nonneg("pulse_width_ps", p.pulse_width_ps);
  s.positive("lifetime_ns", p.lifetime_ns);
  if (s.has("p_emit_sat")) {
    double v = 0.0;
    s.fraction("p_emit_sat", v);
    p.p_emit_sat = v;
  } else {
    s.find("p_emit_sat");
  }
  s.fraction("uncorr_fraction", p.uncorr_fraction);
  s.number("mem_depth", p.mem_depth, 0.0, 0.999999);
  s.positive("mem_tau_ns", p.mem_tau_ns);
  s.nonneg("target_flux_fiber", p.target_flux_fiber);
  s.boolean("uncorr_cw", p.uncorr_cw);
  s.finish();
  validated(s.key("rep_rate_hz"), [&] { laser_period_ps(p); });
}

inline void parse_qpm(Section s, QpmParams& p) {
  s.positive("pump_wavelength_nm", p.pump_wavelength_nm);
  s.positive("qpm_center_at_ref_nm", p.qpm_center_at_ref_nm);
  s.positive("pump_ref_nm", p.pump_ref_nm);
  s.number("center_slope", p.center_slope);
  s.positive("acceptance_fwhm_nm", p.acceptance_fwhm_nm);
  s.nonneg("min_pump_mw", p.min_pump_mw);
  s.nonneg("max_pump_mw", p.max_pump_mw);
  s.nonneg("pump_power_mw", p.pump_power_mw);
  s.positive("p_peak_mw", p.p_peak_mw);
  s.fraction("eta_internal_peak", p.eta_internal_peak);
  s.nonneg("asr_coeff", p.asr_coeff);
  s.positive("filter_bandwidth_nm", p.filter_bandwidth_nm);
  s.finish();
  if (p.min_pump_mw > p.max_pump_mw) throw ConfigError(s.key("min_pump_mw"), "exceeds max_pump_mw");
  validated(s.key("pump_power_mw"), [&] { p.validate(); });
}

inline void parse_budget(Section s, EfficiencyBudget& b) {
  s.fraction("eta_wdm", b.eta_wdm);
  s.fraction("eta_ppln_coupling", b.eta_ppln_coupling);
  s.fraction("eta_bs_mirrors", b.eta_bs_mirrors);
  s.fraction("eta_bf", b.eta_bf);
  s.fraction("eta_spad", b.eta_spad);
  s.fraction("eta_internal_peak", b.eta_internal_peak);
  s.fraction("collection_ftw", b.collection_ftw);
  s.finish();
}

inline DeadTimeMode parse_dead_mode(Section& s, DeadTimeMode current) {
  std::string m = current == DeadTimeMode::kParalyzable ? "paralyzable" : "non_paralyzable";
  s.string("dead_time_mode", m);
  if (m == "paralyzable") return DeadTimeMode::kParalyzable;
  if (m == "non_paralyzable") return DeadTimeMode::kNonParalyzable;
  throw ConfigError(s.key("dead_time_mode"), "expected \"non_paralyzable\" or \"paralyzable\"");
}

inline void parse_si(Section s, SiSpadParams& p) {
  s.fraction("qe", p.qe);
  s.nonneg("dead_time_ns", p.dead_time_ns);
  s.nonneg("dark_rate", p.dark_rate);
  s.nonneg("jitter_fwhm_ps", p.jitter_fwhm_ps);
  p.dead_mode = parse_dead_mode(s, p.dead_mode);
  s.finish();
}

inline void parse_ingaas(Section s, InGaAsSpadParams& p) {
  s.fraction("det_prob", p.det_prob);
  s.nonneg("dead_time_us", p.dead_time_us);
  s.positive("gate_width_ns", p.gate_width_ns);
  s.positive("trigger_rate_mhz", p.trigger_rate_mhz);
  s.nonneg("gate_delay_ns", p.gate_delay_ns);
  s.nonneg("dark_rate_wall", p.dark_rate_wall);
  s.fraction("qe_osc_amp", p.qe_osc_amp);
  s.positive("qe_osc_period_ns", p.qe_osc_period_ns);
  s.positive("qe_osc_decay_ns", p.qe_osc_decay_ns);
  s.fraction("afterpulse_prob", p.afterpulse_prob);
  s.positive("afterpulse_tau_us", p.afterpulse_tau_us);
  p.dead_mode = parse_dead_mode(s, p.dead_mode);
  s.finish();
  validated(s.key("gate_width_ns"), [&] { p.validate(); });
}

inline void parse_histogram(Section s, HistogramConfig& h) {
  constexpr std::int64_t kBig = std::int64_t{1} << 50;
  s.integer("bin_width_ps", h.bin_width, 1, kBig);
  s.integer("range_start_ps", h.range_start, -kBig, kBig);
  s.integer("range_end_ps", h.range_end, -kBig, kBig);
  std::string mode = to_string(h.mode);
  s.string("mode", mode);
  if (mode == "all_pairs") {
    h.mode = HistogramMode::kAllPairs;
  } else if (mode == "first_stop") {
    h.mode = HistogramMode::kFirstStop;
  } else {
    throw ConfigError(s.key("mode"), "expected \"all_pairs\" or \"first_stop\"");
  }
  s.finish();
  if (h.range_end <= h.range_start) throw ConfigError(s.key("range_end_ps"), "must exceed range_start_ps");
  if (h.bins() > 10'000'000) throw ConfigError(s.key("bin_width_ps"), "more than 10^7 bins");
}

inline void parse_g2(Section s, G2Knobs& g) {
  s.positive("peak_half_window_ns", g.peak_half_window_ns);
  s.positive("far_peak_min_delay_ns", g.far_peak_min_delay_ns);
  s.positive("bg_exclusion_ns", g.bg_exclusion_ns);
  s.fraction("split_ratio", g.split_ratio);
  s.positive("line_nm", g.line_nm);
  s.finish();
}

inline void parse_lifetime(Section s, LifetimeKnobs& l) {
  constexpr std::int64_t kBig = std::int64_t{1} << 50;
  s.positive("line_nm", l.line_nm);
  s.fraction("ingaas_path_efficiency", l.ingaas_path_efficiency);
  s.integer("si_sync_phase_ps", l.si_sync_phase_ps, -kBig, kBig);
  s.integer("floor_start_ps", l.floor_start_ps, -kBig, kBig);
  s.integer("floor_end_ps", l.floor_end_ps, -kBig, kBig);
  if (s.has("fit_start_ps") != s.has("fit_end_ps")) {
    throw ConfigError(s.key(s.has("fit_start_ps") ? "fit_end_ps" : "fit_start_ps"),
                      "fit_start_ps and fit_end_ps must be given together");
  }
  if (s.has("fit_start_ps")) {
    TimePs a = 0, b = 0;
    s.integer("fit_start_ps", a, -kBig, kBig);
    s.integer("fit_end_ps", b, -kBig, kBig);
    if (b <= a) throw ConfigError(s.key("fit_end_ps"), "must exceed fit_start_ps");
    l.fit_start_ps = a;
    l.fit_end_ps = b;
  } else {
    s.find("fit_start_ps");
    s.find("fit_end_ps");
  }
  s.finish();
  if (l.floor_end_ps <= l.floor_start_ps) throw ConfigError(s.key("floor_end_ps"), "must exceed floor_start_ps");
}

inline void parse_scan(Section s, ScanGrid& g) {
  s.positive("start_nm", g.start_nm);
  s.positive("stop_nm", g.stop_nm);
  s.positive("step_nm", g.step_nm);
  s.finish();
  if (g.stop_nm < g.start_nm) throw ConfigError(s.key("stop_nm"), "must not be below start_nm");
  if ((g.stop_nm - g.start_nm) / g.step_nm > 1e6) throw ConfigError(s.key("step_nm"), "more than 10^6 scan points");
}

inline void parse_spectrum(Section s, SpectrumSetup& sp) {
  if (auto lines = s.find("lines")) {
    if (!lines->is_array()) throw ConfigError(s.key("lines"), "expected an array");
    std::vector<SpectralLine> out;
    for (std::size_t i = 0; i < lines->size(); ++i) {
      Section l((*lines)[i], s.key("lines") + "[" + std::to_string(i) + "]");
      double nm = 1302.6, flux = 0.0;
      l.positive("wavelength_nm", nm);
      l.nonneg("flux", flux);
      if (!l.has("wavelength_nm")) throw ConfigError(l.key("wavelength_nm"), "required");
      l.finish();
      out.push_back({WavelengthNm{nm}, flux});
    }
    sp.lines = std::move(out);
  }
  if (auto g = s.child("scan")) parse_scan(*g, sp.grid);
  s.positive("dwell_s", sp.dwell_s);
  std::int64_t it = sp.deconvolve_iterations;
  s.integer("deconvolve_iterations", it, 0, 100000);
  sp.deconvolve_iterations = static_cast<int>(it);
  s.finish();
}

inline void parse_response(Section s, ResponseSetup& r) {
  double nm = r.laser.nm();
  s.positive("laser_nm", nm);
  r.laser = WavelengthNm{nm};
  s.nonneg("flux", r.flux);
  s.positive("span_nm", r.span_nm);
  s.positive("step_nm", r.step_nm);
  s.positive("dwell_s", r.dwell_s);
  s.finish();
  if (r.span_nm / r.step_nm > 1e6) throw ConfigError(s.key("step_nm"), "more than 10^6 scan points");
}

inline void parse_budget_report(Section s, BudgetKnobs& b) {
  s.fraction("measured_overall", b.measured_overall);
  s.positive("signal_nm", b.signal_nm);
  s.number_list("snr_powers_mw", b.snr_powers_mw, 0.0, 1e6);
  s.finish();
}

}  // namespace detail

// Parses a scenario document. `fallback` supplies the scenario when the
// document has none; `seed_override` replaces (or supplies) the seed.
inline ScenarioConfig parse_config(const Json& doc, std::optional<Scenario> fallback = std::nullopt,
                                   std::optional<std::uint64_t> seed_override = std::nullopt) {
  detail::Section root(doc, "");
  ScenarioConfig c;

  std::string scenario;
  root.string("scenario", scenario);
  if (root.has("scenario")) {
    const auto s = scenario_from_string(scenario);
    if (!s) throw ConfigError("scenario", "unknown scenario \"" + scenario + "\"");
    c.scenario = *s;
  } else if (fallback) {
    c.scenario = *fallback;
  } else {
    throw ConfigError("scenario", "required");
  }

  if (const Json* seed = root.find("seed")) {
    if (!seed->is_number_integer() || (seed->is_number_integer() && !seed->is_number_unsigned() && seed->get<std::int64_t>() < 0)) {
      throw ConfigError("seed", "expected an unsigned 64-bit integer");
    }
    c.seed = seed->get<std::uint64_t>();
  } else if (!seed_override) {
    throw ConfigError("seed", "required (in the config or via --seed)");
  }
  if (seed_override) c.seed = *seed_override;

  if (c.scenario == Scenario::kG2 || c.scenario == Scenario::kG2PowerSweep) c.repetitions = 6;
  c.ingaas.gate_delay_ns = 17.0;
  c.histogram = default_histogram(c.scenario);

  root.number("duration_s", c.duration_s, 0.0, 1e4);
  std::int64_t reps = c.repetitions;
  root.integer("repetitions", reps, 1, 10000);
  c.repetitions = static_cast<int>(reps);
  std::int64_t threads = c.threads;
  root.integer("threads", threads, 1, 256);
  c.threads = static_cast<unsigned>(threads);

  if (auto s = root.child("emitter")) detail::parse_emitter(*s, c.emitter);
  if (auto s = root.child("qpm")) detail::parse_qpm(*s, c.qpm);
  if (auto s = root.child("budget")) detail::parse_budget(*s, c.budget);
  if (auto s = root.child("si")) detail::parse_si(*s, c.si);
  if (auto s = root.child("ingaas")) detail::parse_ingaas(*s, c.ingaas);
  if (auto s = root.child("histogram")) detail::parse_histogram(*s, c.histogram);
  if (auto s = root.child("g2")) detail::parse_g2(*s, c.g2);
  if (auto s = root.child("sweep")) {
    s->number_list("powers_mw", c.sweep_powers_mw, c.qpm.min_pump_mw, c.qpm.max_pump_mw);
    s->finish();
  }
  if (auto s = root.child("lifetime")) detail::parse_lifetime(*s, c.lifetime);
  if (auto s = root.child("spectrum")) detail::parse_spectrum(*s, c.spectrum);
  if (auto s = root.child("response")) detail::parse_response(*s, c.response);
  if (auto s = root.child("budget_report")) detail::parse_budget_report(*s, c.budget_report);
  if (auto s = root.child("output")) {
    std::string dir = c.out_dir.string();
    s->string("dir", dir);
    c.out_dir = dir;
    s->boolean("emit_events", c.emit_events);
    s->finish();
  }
  root.finish();

  if (c.g2.peak_half_window_ns * 2e3 >= c.emitter.period_ps()) {
    throw ConfigError("g2.peak_half_window_ns", "must be below half the laser period");
  }
  const EmitterParams& em = c.emitter;
  detail::validated("emitter", [&] { em.validate(); });
  detail::validated("budget", [&] { c.budget.validate(); });
  detail::validated("si", [&] { c.si.validate(); });
  return c;
}

inline ScenarioConfig parse_config_text(const std::string& text, std::optional<Scenario> fallback = std::nullopt,
                                        std::optional<std::uint64_t> seed_override = std::nullopt) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc, fallback, seed_override);
}

inline ScenarioConfig load_config(const std::filesystem::path& path, std::optional<Scenario> fallback = std::nullopt,
                                  std::optional<std::uint64_t> seed_override = std::nullopt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("$", "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), fallback, seed_override);
}

// Effective configuration (defaults filled in). Output location and worker
// count are left out: they do not change results.
inline Json effective_config(const ScenarioConfig& c) {
  const auto& e = c.emitter;
  Json emitter = {{"rep_rate_hz", e.rep_rate_hz},         {"pulse_width_ps", e.pulse_width_ps},
                  {"lifetime_ns", e.lifetime_ns},         {"uncorr_fraction", e.uncorr_fraction},
                  {"mem_depth", e.mem_depth},             {"mem_tau_ns", e.mem_tau_ns},
                  {"target_flux_fiber", e.target_flux_fiber}, {"uncorr_cw", e.uncorr_cw}};
  if (e.p_emit_sat) emitter["p_emit_sat"] = *e.p_emit_sat;
  const auto& q = c.qpm;
  Json qpm = {{"pump_wavelength_nm", q.pump_wavelength_nm}, {"qpm_center_at_ref_nm", q.qpm_center_at_ref_nm},
              {"pump_ref_nm", q.pump_ref_nm},               {"center_slope", q.center_slope},
              {"acceptance_fwhm_nm", q.acceptance_fwhm_nm}, {"pump_power_mw", q.pump_power_mw},
              {"p_peak_mw", q.p_peak_mw},                   {"eta_internal_peak", q.eta_internal_peak},
              {"asr_coeff", q.asr_coeff},                   {"filter_bandwidth_nm", q.filter_bandwidth_nm},
              {"min_pump_mw", q.min_pump_mw},               {"max_pump_mw", q.max_pump_mw}};
  const auto& b = c.budget;
  Json budget = {{"eta_wdm", b.eta_wdm},   {"eta_ppln_coupling", b.eta_ppln_coupling},
                 {"eta_bs_mirrors", b.eta_bs_mirrors}, {"eta_bf", b.eta_bf},
                 {"eta_spad", b.eta_spad}, {"eta_internal_peak", b.eta_internal_peak},
                 {"collection_ftw", b.collection_ftw}};
  auto mode = [](DeadTimeMode m) { return m == DeadTimeMode::kParalyzable ? "paralyzable" : "non_paralyzable"; };
  Json si = {{"qe", c.si.qe},
             {"dead_time_ns", c.si.dead_time_ns},
             {"dark_rate", c.si.dark_rate},
             {"jitter_fwhm_ps", c.si.jitter_fwhm_ps},
             {"dead_time_mode", mode(c.si.dead_mode)}};
  const auto& g = c.ingaas;
  Json ingaas = {{"det_prob", g.det_prob},
                 {"dead_time_us", g.dead_time_us},
                 {"gate_width_ns", g.gate_width_ns},
                 {"trigger_rate_mhz", g.trigger_rate_mhz},
                 {"gate_delay_ns", g.gate_delay_ns},
                 {"dark_rate_wall", g.dark_rate_wall},
                 {"qe_osc_amp", g.qe_osc_amp},
                 {"qe_osc_period_ns", g.qe_osc_period_ns},
                 {"qe_osc_decay_ns", g.qe_osc_decay_ns},
                 {"afterpulse_prob", g.afterpulse_prob},
                 {"afterpulse_tau_us", g.afterpulse_tau_us},
                 {"dead_time_mode", mode(g.dead_mode)}};
  Json g2 = {{"peak_half_window_ns", c.g2.peak_half_window_ns},
             {"far_peak_min_delay_ns", c.g2.far_peak_min_delay_ns},
             {"bg_exclusion_ns", c.g2.bg_exclusion_ns},
             {"split_ratio", c.g2.split_ratio},
             {"line_nm", c.g2.line_nm}};
  const auto& l = c.lifetime;
  Json lifetime = {{"line_nm", l.line_nm},
                   {"ingaas_path_efficiency", l.ingaas_path_efficiency},
                   {"si_sync_phase_ps", l.si_sync_phase_ps},
                   {"floor_start_ps", l.floor_start_ps},
                   {"floor_end_ps", l.floor_end_ps}};
  if (l.fit_start_ps) {
    lifetime["fit_start_ps"] = *l.fit_start_ps;
    lifetime["fit_end_ps"] = *l.fit_end_ps;
  }
  Json lines = Json::array();
  for (const auto& line : c.spectrum.lines) lines.push_back({{"wavelength_nm", line.wavelength.nm()}, {"flux", line.flux}});
  Json spectrum = {{"lines", lines},
                   {"scan",
                    {{"start_nm", c.spectrum.grid.start_nm},
                     {"stop_nm", c.spectrum.grid.stop_nm},
                     {"step_nm", c.spectrum.grid.step_nm}}},
                   {"dwell_s", c.spectrum.dwell_s},
                   {"deconvolve_iterations", c.spectrum.deconvolve_iterations}};
  Json response = {{"laser_nm", c.response.laser.nm()},
                   {"flux", c.response.flux},
                   {"span_nm", c.response.span_nm},
                   {"step_nm", c.response.step_nm},
                   {"dwell_s", c.response.dwell_s}};
  Json budget_report = {{"measured_overall", c.budget_report.measured_overall},
                        {"signal_nm", c.budget_report.signal_nm},
                        {"snr_powers_mw", c.budget_report.snr_powers_mw}};
  return {{"scenario", to_string(c.scenario)},
          {"seed", c.seed},
          {"duration_s", c.duration_s},
          {"repetitions", c.repetitions},
          {"emitter", emitter},
          {"qpm", qpm},
          {"budget", budget},
          {"si", si},
          {"ingaas", ingaas},
          {"histogram", to_json(c.histogram)},
          {"g2", g2},
          {"sweep", {{"powers_mw", c.sweep_powers_mw}}},
          {"lifetime", lifetime},
          {"spectrum", spectrum},
          {"response", response},
          {"budget_report", budget_report}};
}

// Setups for the pipelines, assembled from the shared sections.
inline HbtSetup hbt_setup(const ScenarioConfig& c) {
  HbtSetup s;
  s.emitter = c.emitter;
  s.qpm = c.qpm;
  s.budget = c.budget;
  s.si = c.si;
  s.split_ratio = c.g2.split_ratio;
  s.line = WavelengthNm{c.g2.line_nm};
  return s;
}

inline G2Options g2_options(const ScenarioConfig& c) {
  G2Options o;
  o.rep_period = laser_period_ps(c.emitter);
  o.peak_half_window = detail::ns_to_ps(c.g2.peak_half_window_ns);
  o.far_peak_min_delay = detail::ns_to_ps(c.g2.far_peak_min_delay_ns);
  o.bg_exclusion = detail::ns_to_ps(c.g2.bg_exclusion_ns);
  return o;
}

inline LifetimeSetup lifetime_setup(const ScenarioConfig& c) {
  LifetimeSetup s;
  s.emitter = c.emitter;
  s.qpm = c.qpm;
  s.budget = c.budget;
  s.si = c.si;
  s.ingaas = c.ingaas;
  s.line = WavelengthNm{c.lifetime.line_nm};
  s.ingaas_path_efficiency = c.lifetime.ingaas_path_efficiency;
  s.histogram = c.histogram;
  s.sync_phase = c.scenario == Scenario::kLifetimeInGaAs ? detail::ns_to_ps(c.ingaas.gate_delay_ns)
                                                         : c.lifetime.si_sync_phase_ps;
  s.floor = {c.lifetime.floor_start_ps, c.lifetime.floor_end_ps};
  if (c.lifetime.fit_start_ps) s.fit_window = FitWindow{*c.lifetime.fit_start_ps, *c.lifetime.fit_end_ps};
  return s;
}

inline SpectrumSetup spectrum_setup(const ScenarioConfig& c) {
  SpectrumSetup s = c.spectrum;
  s.qpm = c.qpm;
  s.budget = c.budget;
  s.dark_rate = c.si.dark_rate;
  return s;
}

inline ResponseSetup response_setup(const ScenarioConfig& c) {
  ResponseSetup s = c.response;
  s.qpm = c.qpm;
  s.budget = c.budget;
  s.dark_rate = c.si.dark_rate;
  return s;
}

}  // namespace qdup
