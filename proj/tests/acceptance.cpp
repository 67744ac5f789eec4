// Acceptance checks. One line per criterion; exit status is the number of
// failures. Tolerances are fixed here and never read from configs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qdup/config.hpp"
#include "qdup/lifetime.hpp"
#include "qdup/pipeline.hpp"
#include "qdup/runner.hpp"
#include "qdup/tcspc.hpp"
#include "qdup/upconversion.hpp"

using namespace qdup;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kMasterSeed = 2026;
const fs::path kConfigDir = QDUP_CONFIG_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

template <typename... T>
std::string fmtn(const char* f, T... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

bool within(double x, double target, double tol) { return std::abs(x - target) <= tol; }

ScenarioConfig shipped(const std::string& name) { return load_config(kConfigDir / name, std::nullopt, kMasterSeed); }

// ---------------------------------------------------------------- 1, 2

Outcome efficiency_arithmetic() {
  const EfficiencyBudget b;
  const double internal = internal_from_overall(0.21, b);
  const double e2e = end_to_end_efficiency(b, 0.21);
  return {within(internal, 0.752, 0.010) && within(e2e, 2.1e-4, 1e-5),
          fmtn("internal=%.5f (0.752+-0.010) end_to_end=%.4e (2.1e-4+-1e-5)", internal, e2e)};
}

Outcome photon_energy() {
  const double p = flux_to_power(1e4, WavelengthNm{1302.6});
  const double out = sum_frequency(WavelengthNm{1302.6}, WavelengthNm{1556.8}).nm();
  return {std::abs(p - 1.5e-15) <= 0.05 * 1.5e-15 && within(out, 709.20, 0.01),
          fmtn("power=%.4e W (1.5e-15 +-5%%) sum_frequency=%.4f nm (709.20+-0.01)", p, out)};
}

// ---------------------------------------------------------------- 3

Outcome qpm_response() {
  const ScenarioConfig c = shipped("response.json");
  const ResponseRun r = run_response(response_setup(c), c.seed);
  const auto& m = r.metrics;
  return {within(m.fwhm, 0.35, 0.01) && within(m.sidelobe, 0.047, 0.005),
          fmtn("fwhm=%.4f nm (0.35+-0.01) sidelobe=%.4f (0.047+-0.005, left %.4f right %.4f)", m.fwhm, m.sidelobe,
               m.sidelobe_left, m.sidelobe_right)};
}

// ---------------------------------------------------------------- 4, 5

Outcome lifetime_si() {
  const ScenarioConfig c = shipped("lifetime_si.json");
  const LifetimeSetup s = lifetime_setup(c);
  const LifetimeRun full = run_lifetime(s, LifetimeDetector::kSi, 600.0, c.seed);
  if (!full.fit) return {false, "600 s fit failed: " + full.fit_error};
  const double half = full.fit->ci_half_width();
  const double tau = full.fit->tau_ns;

  int covered = 0, failed = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const LifetimeRun r = run_lifetime(s, LifetimeDetector::kSi, 10.0, repetition_seed(c.seed, i));
    if (!r.fit) {
      ++failed;
      continue;
    }
    if (r.fit->ci95_low <= 1.38 && 1.38 <= r.fit->ci95_high) ++covered;
  }
  return {half <= 0.05 && within(tau, 1.38, 0.05) && covered >= 90,
          fmtn("600 s: tau=%.4f ns half_width=%.4f (<=0.05); 10 s coverage %d/100 (>=90), %d fits failed", tau, half,
               covered, failed)};
}

Outcome dynamic_range_ratio() {
  const ScenarioConfig si = shipped("lifetime_si.json");
  const ScenarioConfig in = shipped("lifetime_ingaas.json");
  const LifetimeRun a = run_lifetime(lifetime_setup(si), LifetimeDetector::kSi, si.duration_s, si.seed);
  const LifetimeRun b = run_lifetime(lifetime_setup(in), LifetimeDetector::kInGaAs, in.duration_s, in.seed);
  const double ratio = a.dynamic_range / b.dynamic_range;
  return {ratio > 10.0, fmtn("Si=%.1f InGaAs=%.2f ratio=%.2f (>10)", a.dynamic_range, b.dynamic_range, ratio)};
}

// ---------------------------------------------------------------- 6, 7

Outcome g2_reproduction() {
  const ScenarioConfig c = shipped("g2.json");
  const G2Run run = run_g2(hbt_setup(c), c.duration_s, c.repetitions, c.histogram, g2_options(c), c.seed);
  if (!run.result) return {false, "empty pooled histogram"};
  double worst = 0.0;
  bool all_below = true;
  for (const auto& r : run.per_seed_result) {
    if (!r) {
      all_below = false;
      continue;
    }
    worst = std::max(worst, r->g2_zero);
    all_below = all_below && r->g2_zero < 0.5;
  }
  const auto& p = *run.result;
  return {within(p.raw_suppression, 0.37, 0.05) && within(p.g2_zero, 0.165, 0.02) && all_below,
          fmtn("%d x %.0f s pooled: raw=%.4f+-%.4f (0.37+-0.05) g2=%.4f+-%.4f (0.165+-0.02) worst seed g2=%.4f (<0.5)",
               c.repetitions, c.duration_s, p.raw_suppression, p.raw_err, p.g2_zero, p.err, worst)};
}

Outcome power_sweep() {
  const ScenarioConfig c = shipped("sweep.json");
  const PowerSweep s =
      g2_vs_power(c.sweep_powers_mw, hbt_setup(c), c.duration_s, c.repetitions, c.histogram, g2_options(c), c.seed);
  std::string pts;
  for (const auto& p : s.points) {
    pts += fmtn(" %.0fmW:%.4f+-%.4f", p.power_mw, p.run.result ? p.run.result->g2_zero : NAN,
                p.run.result ? p.run.result->err : NAN);
  }
  const double best = s.best ? s.points[*s.best].power_mw : NAN;
  return {s.best && best == 85.0, fmtn("argmin=%.0f mW (85);", best) + pts};
}

// ---------------------------------------------------------------- 8, 9

TimeStream random_stream(std::mt19937_64& g, std::size_t n, TimePs duration) {
  std::uniform_int_distribution<TimePs> u(0, duration);
  std::vector<TimePs> t(n);
  for (auto& x : t) x = u(g);
  std::sort(t.begin(), t.end());
  return {t, duration};
}

std::vector<std::uint64_t> brute_force(const TimeStream& a, const TimeStream& b, const HistogramConfig& cfg) {
  std::vector<std::uint64_t> c(cfg.bins(), 0);
  for (TimePs s : a.times) {
    TimePs best = std::numeric_limits<TimePs>::max();
    for (TimePs t : b.times) {
      const TimePs dt = t - s;
      if (!cfg.in_range(dt)) continue;
      if (cfg.mode == HistogramMode::kAllPairs) {
        ++c[cfg.bin_of(dt)];
      } else {
        best = std::min(best, dt);
      }
    }
    if (cfg.mode == HistogramMode::kFirstStop && best != std::numeric_limits<TimePs>::max()) ++c[cfg.bin_of(best)];
  }
  return c;
}

Outcome correlator_correctness() {
  std::mt19937_64 g(kMasterSeed);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const TimePs dur = 1'000'000 + static_cast<TimePs>(g() % 50'000'000);
    const auto a = random_stream(g, g() % 1001, dur);
    const auto b = random_stream(g, g() % 1001, dur);
    const TimePs width = 1 + static_cast<TimePs>(g() % 2000);
    const TimePs lo = -static_cast<TimePs>(g() % 200'000);
    const TimePs hi = lo + width + static_cast<TimePs>(g() % 400'000);
    const HistogramConfig cfg{width, lo, hi, trial % 2 ? HistogramMode::kFirstStop : HistogramMode::kAllPairs};
    const auto h = start_stop_histogram(a, b, cfg);
    if (std::vector<std::uint64_t>(h.counts().begin(), h.counts().end()) != brute_force(a, b, cfg)) ++mismatches;
  }

  const auto a = random_stream(g, 1000, 5'000'000);
  const auto b = random_stream(g, 1000, 5'000'000);
  const HistogramConfig cfg{250, -310'000, 310'000, HistogramMode::kAllPairs};
  const auto serial = start_stop_histogram(a, b, cfg);
  std::string blocks;
  int split_mismatches = 0;
  for (int i = 0; i < 5; ++i) {
    const std::size_t block = 1 + g() % 1000;
    blocks += " " + std::to_string(block);
    if (!(start_stop_histogram_blocked(a, b, cfg, block, 1 + static_cast<unsigned>(i % 2)) == serial)) {
      ++split_mismatches;
    }
  }
  return {mismatches == 0 && split_mismatches == 0,
          fmtn("brute force mismatches %d/200; block sizes", mismatches) + blocks +
              fmtn(" mismatches %d/5", split_mismatches)};
}

// Poisson stream at `rate` per second with `n` events.
TimeStream poisson_events(std::mt19937_64& g, double rate, std::size_t n) {
  std::exponential_distribution<double> gap(rate * 1e-12);
  std::vector<TimePs> t(n);
  double x = 0.0;
  for (auto& v : t) {
    x += gap(g);
    v = static_cast<TimePs>(x);
  }
  return {t, t.empty() ? 0 : t.back() + 1};
}

Outcome correlator_performance() {
  std::mt19937_64 g(kMasterSeed + 9);
  // Two arms at 3e3 clicks/s, 5e6 events each.
  auto a = poisson_events(g, 3e3, 5'000'000);
  auto b = poisson_events(g, 3e3, 5'000'000);
  b.duration = a.duration = std::max(a.duration, b.duration);
  const HistogramConfig cfg{250, -310'000, 310'000, HistogramMode::kAllPairs};
  const auto t0 = std::chrono::steady_clock::now();
  const auto h = coincidence_histogram(a, b, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {secs <= 5.0, fmtn("1e7 events, %llu coincidences in %.3f s (<=5)",
                            static_cast<unsigned long long>(h.total()), secs)};
}

// ---------------------------------------------------------------- 10

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream is(e.path(), std::ios::binary);
    out[fs::relative(e.path(), dir).generic_string()] = {std::istreambuf_iterator<char>(is), {}};
  }
  return out;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "qdup_acceptance";
  fs::remove_all(root);
  int compared = 0, differing = 0;
  std::string bad;
  for (const char* name : {"budget.json", "spectrum.json", "response.json", "lifetime_si.json", "lifetime_ingaas.json",
                           "g2.json", "sweep.json"}) {
    ScenarioConfig c = shipped(name);
    c.emit_events = true;
    const std::string stem = fs::path(name).stem().string();
    c.out_dir = root / (stem + "_a");
    run_scenario(c);
    c.out_dir = root / (stem + "_b");
    run_scenario(c);
    const auto a = tree(root / (stem + "_a"));
    const auto b = tree(root / (stem + "_b"));
    compared += static_cast<int>(a.size());
    if (a != b || a.empty()) {
      ++differing;
      bad += " " + stem;
    }
  }
  fs::remove_all(root);
  return {differing == 0, fmtn("7 scenarios, %d files compared, %d scenarios differ", compared, differing) + bad};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"efficiency arithmetic", efficiency_arithmetic},
      {"photon energy arithmetic", photon_energy},
      {"QPM response", qpm_response},
      {"Si lifetime fit", lifetime_si},
      {"Si/InGaAs dynamic range", dynamic_range_ratio},
      {"g2 reproduction", g2_reproduction},
      {"power sweep optimum", power_sweep},
      {"correlator correctness", correlator_correctness},
      {"correlator performance", correlator_performance},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("CRITERION %2zu %s: %s | %s [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
