#pragma once

// Scanned upconversion spectra: assembly from emission lines, Richardson-Lucy
// deconvolution and instrument-response profile metrics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <tuple>
#include <vector>

#include "qdup/core.hpp"
#include "qdup/rng.hpp"
#include "qdup/upconversion.hpp"

namespace qdup {

struct SpectralLine {
  WavelengthNm wavelength;
  double flux = 0.0;  // photons/s in fiber
};

struct ScanGrid {
  double start_nm = 1555.0;
  double stop_nm = 1559.9;
  double step_nm = 0.1;

  std::vector<double> points() const {
    if (!(step_nm > 0.0) || !(stop_nm >= start_nm)) throw DomainError("scan grid must be monotone increasing");
    const auto n = static_cast<std::size_t>(std::llround((stop_nm - start_nm) / step_nm)) + 1;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = start_nm + static_cast<double>(i) * step_nm;
    return out;
  }
};

struct SpectrumScan {
  std::vector<double> pump_nm;
  double dwell_s = 1.0;
  std::vector<double> counts;
  std::vector<double> signal_nm;  // phase-matched signal wavelength per step

  std::size_t size() const noexcept { return counts.size(); }
  double total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }
};

struct SpectrumOptions {
  double dwell_s = 1.0;
  double background_rate = 0.0;  // detected counts/s independent of the scan
  bool poisson = true;
  std::uint64_t seed = 0;
};

// Expected counts per pump step, optionally Poisson sampled. The pump power
// in `qpm` sets the conversion efficiency; the pump wavelength comes from
// the grid.
inline SpectrumScan assemble_spectrum(const std::vector<SpectralLine>& lines, const ScanGrid& grid,
                                      const QpmParams& qpm, const EfficiencyBudget& budget,
                                      const SpectrumOptions& opt) {
  if (!(opt.dwell_s > 0.0)) throw DomainError("dwell must be positive");
  SpectrumScan scan;
  scan.dwell_s = opt.dwell_s;
  scan.pump_nm = grid.points();
  const double overall = overall_detection_efficiency(budget, internal_efficiency(qpm.pump_power_mw, qpm));
  for (std::size_t i = 0; i < scan.pump_nm.size(); ++i) {
    const double center = qpm.center_for_pump(scan.pump_nm[i]);
    double mean = opt.background_rate * opt.dwell_s;
    for (const auto& line : lines) {
      mean += line.flux * overall * qpm_transfer(line.wavelength.nm() - center, qpm.acceptance_fwhm_nm) * opt.dwell_s;
    }
    double value = mean;
    if (opt.poisson && mean > 0.0) {
      rng::CounterRng g(rng::derive(opt.seed, rng::Component::kSpectrum, i));
      value = static_cast<double>(std::poisson_distribution<std::int64_t>(mean)(g));
    }
    scan.counts.push_back(value);
    scan.signal_nm.push_back(center);
  }
  return scan;
}

// Transfer function sampled at `n` (odd) points spaced by `step_nm` around
// zero detuning, normalized to unit sum.
inline std::vector<double> sampled_response(double acceptance_fwhm_nm, double step_nm, std::size_t n) {
  if (n % 2 == 0) throw DomainError("response length must be odd");
  std::vector<double> r(n);
  const auto half = static_cast<std::ptrdiff_t>(n / 2);
  for (std::ptrdiff_t i = -half; i <= half; ++i) {
    r[static_cast<std::size_t>(i + half)] = qpm_transfer(static_cast<double>(i) * step_nm, acceptance_fwhm_nm);
  }
  const double s = std::accumulate(r.begin(), r.end(), 0.0);
  for (auto& v : r) v /= s;
  return r;
}

namespace detail {

// Same-size correlation with a centered kernel; samples outside the scan
// contribute nothing.
inline std::vector<double> convolve_same(const std::vector<double>& x, const std::vector<double>& k, bool flip) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto m = static_cast<std::ptrdiff_t>(k.size());
  const std::ptrdiff_t half = m / 2;
  std::vector<double> y(x.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t j = 0; j < m; ++j) {
      const std::ptrdiff_t src = i + (flip ? (half - j) : (j - half));
      if (src >= 0 && src < n) acc += k[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(src)];
    }
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

}  // namespace detail

// Richardson-Lucy deconvolution. `response` is sampled on the scan step and
// centered. The estimate is renormalized to the measured total after each
// iteration, so flux is conserved even where the kernel overhangs the scan
// edges; nonnegativity is preserved by the multiplicative update.
inline SpectrumScan deconvolve(const SpectrumScan& scan, std::vector<double> response, int iterations) {
  if (iterations < 0) throw DomainError("iterations must be nonnegative");
  if (response.empty() || response.size() % 2 == 0) throw DomainError("response must have odd length");
  double rsum = 0.0;
  for (double v : response) {
    if (!(v >= 0.0)) throw DomainError("response must be nonnegative");
    rsum += v;
  }
  if (!(rsum > 0.0)) throw DomainError("response is identically zero");
  for (auto& v : response) v /= rsum;
  for (double c : scan.counts) {
    if (!(c >= 0.0)) throw DomainError("spectrum counts must be nonnegative");
  }

  SpectrumScan out = scan;
  const double total = scan.total();
  if (iterations == 0 || total <= 0.0) return out;

  const std::vector<double> ones(scan.size(), 1.0);
  const std::vector<double> norm = detail::convolve_same(ones, response, true);
  std::vector<double> est = scan.counts;
  for (int it = 0; it < iterations; ++it) {
    const std::vector<double> blurred = detail::convolve_same(est, response, false);
    std::vector<double> ratio(scan.size(), 0.0);
    for (std::size_t i = 0; i < ratio.size(); ++i) {
      ratio[i] = blurred[i] > 0.0 ? scan.counts[i] / blurred[i] : 0.0;
    }
    const std::vector<double> corr = detail::convolve_same(ratio, response, true);
    double s = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
      est[i] = norm[i] > 0.0 ? est[i] * corr[i] / norm[i] : 0.0;
      s += est[i];
    }
    if (s > 0.0) {
      for (auto& v : est) v *= total / s;
    }
  }
  out.counts = std::move(est);
  return out;
}

// Shape metrics of a measured single-peak response.
struct ResponseMetrics {
  double peak_position = 0.0;
  double peak_value = 0.0;
  double fwhm = 0.0;
  double sidelobe_left = 0.0;   // relative to peak
  double sidelobe_right = 0.0;  // relative to peak
  double sidelobe = 0.0;        // mean of the two
};

namespace detail {

// Least-squares parabola through (x, y); returns (vertex x, vertex y).
inline std::pair<double, double> parabola_vertex(const std::vector<double>& x, const std::vector<double>& y) {
  const double x0 = x[x.size() / 2];
  double s[5] = {0, 0, 0, 0, 0};
  double t[3] = {0, 0, 0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = x[i] - x0;
    double p = 1.0;
    for (int k = 0; k < 5; ++k) {
      s[k] += p;
      if (k < 3) t[k] += p * y[i];
      p *= u;
    }
  }
  // Normal equations for y = a + b u + c u^2.
  const double m[3][3] = {{s[0], s[1], s[2]}, {s[1], s[2], s[3]}, {s[2], s[3], s[4]}};
  auto det3 = [](const double a[3][3]) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  };
  const double d = det3(m);
  double coef[3];
  for (int c = 0; c < 3; ++c) {
    double mc[3][3];
    for (int r = 0; r < 3; ++r)
      for (int q = 0; q < 3; ++q) mc[r][q] = (q == c) ? t[r] : m[r][q];
    coef[c] = det3(mc) / d;
  }
  if (coef[2] >= 0.0) {  // not a maximum; fall back to the largest sample
    const auto it = std::max_element(y.begin(), y.end());
    return {x[static_cast<std::size_t>(it - y.begin())], *it};
  }
  const double u = -coef[1] / (2.0 * coef[2]);
  return {x0 + u, coef[0] + coef[1] * u + coef[2] * u * u};
}

inline std::vector<double> moving_average(const std::vector<double>& y, std::size_t half) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(y.size() - 1, i + half);
    double s = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) s += y[j];
    out[i] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

}  // namespace detail

// FWHM by linear interpolation of the half-maximum crossings and first
// sidelobe heights by local parabola fits. `x` must be increasing.
inline ResponseMetrics measure_response(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 9) throw DomainError("response profile needs at least 9 samples");
  ResponseMetrics m;
  const auto imax = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  const std::size_t fit_half = 2;
  {
    const std::size_t lo = imax >= fit_half ? imax - fit_half : 0;
    const std::size_t hi = std::min(y.size() - 1, imax + fit_half);
    std::vector<double> px(x.begin() + static_cast<std::ptrdiff_t>(lo), x.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    std::vector<double> py(y.begin() + static_cast<std::ptrdiff_t>(lo), y.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    std::tie(m.peak_position, m.peak_value) = detail::parabola_vertex(px, py);
  }
  const double half = 0.5 * m.peak_value;
  std::size_t r = imax;
  while (r + 1 < y.size() && y[r + 1] >= half) ++r;
  std::size_t l = imax;
  while (l > 0 && y[l - 1] >= half) --l;
  if (r + 1 >= y.size() || l == 0) throw DomainError("half-maximum crossing outside the scanned range");
  const double xr = x[r] + (x[r + 1] - x[r]) * (y[r] - half) / (y[r] - y[r + 1]);
  const double xl = x[l] - (x[l] - x[l - 1]) * (y[l] - half) / (y[l] - y[l - 1]);
  m.fwhm = xr - xl;

  // Walk outward on a lightly smoothed copy: first minimum, then first
  // maximum beyond it.
  const double dx = x[1] - x[0];
  const auto smooth_half = static_cast<std::size_t>(std::max(1.0, std::round(0.02 * m.fwhm / dx)));
  const std::vector<double> ys = detail::moving_average(y, smooth_half);
  const auto window = static_cast<std::size_t>(std::max(2.0, std::round(0.2 * m.fwhm / dx)));
  auto sidelobe = [&](int dir) -> double {
    auto idx = static_cast<std::ptrdiff_t>(dir > 0 ? r : l);
    const auto n = static_cast<std::ptrdiff_t>(y.size());
    auto inside = [&](std::ptrdiff_t i) { return i + dir >= 0 && i + dir < n; };
    while (inside(idx) && ys[static_cast<std::size_t>(idx + dir)] <= ys[static_cast<std::size_t>(idx)]) idx += dir;
    while (inside(idx) && ys[static_cast<std::size_t>(idx + dir)] >= ys[static_cast<std::size_t>(idx)]) idx += dir;
    if (!inside(idx)) throw DomainError("first sidelobe not inside the scanned range");
    const auto c = static_cast<std::size_t>(idx);
    const std::size_t lo = c >= window ? c - window : 0;
    const std::size_t hi = std::min(y.size() - 1, c + window);
    std::vector<double> px(x.begin() + static_cast<std::ptrdiff_t>(lo), x.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    std::vector<double> py(y.begin() + static_cast<std::ptrdiff_t>(lo), y.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    return detail::parabola_vertex(px, py).second / m.peak_value;
  };
  m.sidelobe_left = sidelobe(-1);
  m.sidelobe_right = sidelobe(+1);
  m.sidelobe = 0.5 * (m.sidelobe_left + m.sidelobe_right);
  return m;
}

}  // namespace qdup
