#pragma once

// Lifetime analysis of TCSPC histograms: background subtraction,
// single-exponential weighted least squares and the dynamic-range figure.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include "qdup/core.hpp"
#include "qdup/tcspc.hpp"

namespace qdup {

struct FitResult {
  double tau_ns = 0.0;
  double ci95_low = 0.0;
  double ci95_high = 0.0;
  double amplitude = 0.0;  // counts per bin at the window start
  double offset = 0.0;     // counts per bin
  double residual_norm = 0.0;
  double chi2_reduced = 0.0;
  int iterations = 0;
  TimePs window_start = 0;
  TimePs window_end = 0;

  double ci_half_width() const { return 0.5 * (ci95_high - ci95_low); }
};

// Histogram of real-valued bins with per-bin variances (e.g. a
// background-subtracted trace).
struct ValueHistogram {
  HistogramConfig config;
  std::vector<double> values;
  std::vector<double> variances;
  TimePs duration = 0;
};

inline ValueHistogram to_values(const CorrelationHistogram& h) {
  ValueHistogram v{h.config(), {}, {}, h.duration()};
  for (auto c : h.counts()) {
    v.values.push_back(static_cast<double>(c));
    v.variances.push_back(static_cast<double>(c));
  }
  return v;
}

// signal - dark, bin by bin. With `normalize_duration` the dark trace is
// first scaled by signal.duration / dark.duration.
inline ValueHistogram difference_histogram(const CorrelationHistogram& signal, const CorrelationHistogram& dark,
                                           bool normalize_duration = false) {
  if (!(signal.config() == dark.config())) throw PreconditionError("difference of histograms with different configs");
  double scale = 1.0;
  if (normalize_duration) {
    if (dark.duration() <= 0) throw PreconditionError("dark histogram has zero duration");
    scale = static_cast<double>(signal.duration()) / static_cast<double>(dark.duration());
  }
  ValueHistogram out{signal.config(), {}, {}, signal.duration()};
  out.values.resize(signal.size());
  out.variances.resize(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) {
    const double s = static_cast<double>(signal[i]);
    const double d = static_cast<double>(dark[i]);
    out.values[i] = s - scale * d;
    out.variances[i] = s + scale * scale * d;
  }
  return out;
}

// Probability that a photon from a decay of lifetime `tau_ns` arrives later
// than `delay_ns`.
inline double residual_pl_probability(double tau_ns, double delay_ns) {
  if (!(tau_ns > 0.0)) throw DomainError("tau must be positive");
  if (!(delay_ns >= 0.0)) throw DomainError("delay must be nonnegative");
  return std::exp(-delay_ns / tau_ns);
}

namespace detail {

inline constexpr int kMaxFitIterations = 200;

// Weighted LM fit of y = A exp(-t / tau) + c, t in ns from the window start.
inline FitResult fit_decay(const std::vector<double>& t, const std::vector<double>& y, const std::vector<double>& w) {
  const auto n = static_cast<Eigen::Index>(t.size());
  Eigen::VectorXd tv(n), yv(n), wv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    tv[i] = t[static_cast<std::size_t>(i)];
    yv[i] = y[static_cast<std::size_t>(i)];
    wv[i] = w[static_cast<std::size_t>(i)];
  }

  // Start: offset from the last fifth, tau from a log-linear fit of the head.
  const Eigen::Index tail = std::max<Eigen::Index>(2, n / 5);
  double c = yv.tail(tail).mean();
  double amp = std::max(yv[0] - c, 1e-9);
  double tau = 1.0;
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = yv[i] - c;
      if (v <= 0.1 * amp) break;
      const double ly = std::log(v);
      sx += tv[i];
      sy += ly;
      sxx += tv[i] * tv[i];
      sxy += tv[i] * ly;
      m += 1;
    }
    if (m >= 3) {
      const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
      if (slope < 0.0 && std::isfinite(slope)) tau = -1.0 / slope;
    }
  }

  Eigen::Vector3d p(amp, tau, c);
  auto residuals = [&](const Eigen::Vector3d& q, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    r.resize(n);
    if (jac) jac->resize(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = std::exp(-tv[i] / q[1]);
      const double sw = std::sqrt(wv[i]);
      r[i] = sw * (yv[i] - (q[0] * e + q[2]));
      if (jac) {
        (*jac)(i, 0) = sw * e;
        (*jac)(i, 1) = sw * q[0] * e * tv[i] / (q[1] * q[1]);
        (*jac)(i, 2) = sw;
      }
    }
  };

  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  residuals(p, r, &jac);
  double chi2 = r.squaredNorm();
  double lambda = 1e-3;
  int it = 0;
  bool converged = false;
  for (; it < kMaxFitIterations; ++it) {
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Eigen::Vector3d jtr = jac.transpose() * r;
    Eigen::Matrix3d a = jtj;
    a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
    const Eigen::Vector3d step = a.ldlt().solve(jtr);
    Eigen::Vector3d trial = p + step;
    if (!(trial[1] > 0.0) || !trial.allFinite()) {
      lambda *= 10.0;
      continue;
    }
    Eigen::VectorXd rt;
    residuals(trial, rt, nullptr);
    const double chi2_t = rt.squaredNorm();
    if (chi2_t <= chi2) {
      const double rel = (chi2 - chi2_t) / std::max(chi2, 1e-300);
      const double step_rel = std::abs(step[1]) / trial[1];
      p = trial;
      chi2 = chi2_t;
      residuals(p, r, &jac);
      lambda = std::max(lambda / 10.0, 1e-12);
      if (rel < 1e-12 || step_rel < 1e-10) {
        converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      // No downhill step even with a tiny trust region: at the optimum.
      if (lambda > 1e12) {
        converged = true;
        break;
      }
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "lifetime fit did not converge after " << it << " iterations (tau=" << p[1] << " ns, A=" << p[0]
       << ", c=" << p[2] << ", chi2=" << chi2 << ", lambda=" << lambda << ")";
    throw FitError(os.str());
  }

  const Eigen::Matrix3d jtj = jac.transpose() * jac;
  const Eigen::Matrix3d cov0 = jtj.inverse();
  const double dof = static_cast<double>(std::max<Eigen::Index>(1, n - 3));
  const double chi2_red = chi2 / dof;
  const double var_tau = cov0(1, 1) * std::max(1.0, chi2_red);
  const double half = 1.96 * std::sqrt(std::max(0.0, var_tau));

  FitResult f;
  f.amplitude = p[0];
  f.tau_ns = p[1];
  f.offset = p[2];
  f.ci95_low = p[1] - half;
  f.ci95_high = p[1] + half;
  f.residual_norm = std::sqrt(chi2);
  f.chi2_reduced = chi2_red;
  f.iterations = it + 1;
  return f;
}

}  // namespace detail

// Fit window in histogram delay coordinates: bins whose centers lie in
// [start, end).
using FitWindow = std::pair<TimePs, TimePs>;

// Window from the maximum bin to the end of the histogram range.
inline FitWindow default_fit_window(const ValueHistogram& h) {
  const auto imax = static_cast<std::size_t>(std::max_element(h.values.begin(), h.values.end()) - h.values.begin());
  return {h.config.bin_left(imax), h.config.range_end};
}

inline FitWindow default_fit_window(const CorrelationHistogram& h) { return default_fit_window(to_values(h)); }

// Weighted least squares of A exp(-(t - t0) / tau) + c over the window.
// First pass weights 1 / max(variance, 1); a second pass swaps the observed
// signal term of each variance for the fitted value, which removes the low
// bias of count-based weights in sparse tail bins. The confidence interval
// is 1.96 standard deviations of tau from the linearized covariance at the
// optimum, inflated by the reduced chi-square when that exceeds 1.
inline FitResult fit_lifetime(const ValueHistogram& h, FitWindow window) {
  const auto& cfg = h.config;
  if (window.first >= window.second) throw PreconditionError("fit window is empty");
  if (window.first < cfg.range_start || window.second > cfg.range_end) {
    throw PreconditionError("fit window lies outside the histogram range");
  }
  std::vector<double> t, y, w, var;
  double t0 = std::numeric_limits<double>::quiet_NaN();
  bool any_nonzero = false;
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    const double c = cfg.bin_center(i);
    if (c < static_cast<double>(window.first) || c >= static_cast<double>(window.second)) continue;
    if (std::isnan(t0)) t0 = c;
    t.push_back((c - t0) * 1e-3);
    y.push_back(h.values[i]);
    w.push_back(1.0 / std::max(h.variances[i], 1.0));
    var.push_back(h.variances[i]);
    if (h.values[i] != 0.0) any_nonzero = true;
  }
  if (t.size() < 10) throw PreconditionError("fit window must contain at least 10 bins");
  if (!any_nonzero) throw FitError("fit window contains only zero counts");
  FitResult f = detail::fit_decay(t, y, w);
  // Reweight with the fitted expectation in place of the observed counts.
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double model = f.amplitude * std::exp(-t[i] / f.tau_ns) + f.offset;
    w[i] = 1.0 / std::max(var[i] - y[i] + model, 1.0);
  }
  f = detail::fit_decay(t, y, w);
  f.window_start = window.first;
  f.window_end = window.second;
  return f;
}

inline FitResult fit_lifetime(const CorrelationHistogram& h, FitWindow window) {
  return fit_lifetime(to_values(h), window);
}

inline FitResult fit_lifetime(const CorrelationHistogram& h) { return fit_lifetime(h, default_fit_window(h)); }

// Peak bin over the mean of the noise-floor bins (centers in `floor`).
// Returns +infinity for an empty floor.
inline double dynamic_range(std::span<const double> values, const HistogramConfig& cfg, FitWindow floor) {
  if (values.empty()) throw PreconditionError("dynamic_range of an empty histogram");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double c = cfg.bin_center(i);
    if (c >= static_cast<double>(floor.first) && c < static_cast<double>(floor.second)) {
      sum += values[i];
      ++n;
    }
  }
  if (n == 0) throw PreconditionError("noise-floor window contains no bins");
  const double peak = *std::max_element(values.begin(), values.end());
  const double mean = sum / static_cast<double>(n);
  if (mean <= 0.0) return std::numeric_limits<double>::infinity();
  return peak / mean;
}

inline double dynamic_range(const CorrelationHistogram& h, FitWindow floor) {
  const auto v = to_values(h);
  return dynamic_range(v.values, h.config(), floor);
}

}  // namespace qdup
