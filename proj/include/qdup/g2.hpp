#pragma once

// g2(0) from a pulsed HBT coincidence histogram.
//
// The flat floor between pulses is estimated from bins far from every pulse
// and subtracted from each peak window. raw_suppression is the zero-delay
// peak over the mean of all other peaks before subtraction; g2_zero is the
// same ratio after subtraction, normalized by the far peaks only (the near
// ones are depressed by the emitter's pulse-to-pulse memory).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <vector>

#include "qdup/core.hpp"
#include "qdup/tcspc.hpp"

namespace qdup {

struct G2Options {
  TimePs rep_period = 20 * kPsPerNs;
  TimePs peak_half_window = 1500;
  TimePs far_peak_min_delay = 60 * kPsPerNs;
  TimePs bg_exclusion = 8200;
  int min_periods_each_side = 8;
};

struct PeakArea {
  int index = 0;          // k, peak center at k * rep_period
  double raw = 0.0;       // counts in the window
  double area = 0.0;      // after floor subtraction
  std::size_t bins = 0;
};

struct G2Result {
  double g2_zero = 0.0;
  double err = 0.0;
  double raw_suppression = 0.0;
  double raw_err = 0.0;
  double background_per_bin = 0.0;
  std::size_t background_bins = 0;
  std::size_t far_peaks = 0;
  bool negative_clamped = false;
  std::vector<PeakArea> peaks;
};

inline G2Result extract_g2(const CorrelationHistogram& hist, const G2Options& opt = {}) {
  const auto& cfg = hist.config();
  const TimePs period = opt.rep_period;
  if (period <= 0) throw PreconditionError("rep_period must be positive");
  if (!(opt.peak_half_window > 0 && 2 * opt.peak_half_window < period)) {
    throw PreconditionError("peak_half_window must lie in (0, rep_period / 2)");
  }
  if (cfg.range_start > -opt.min_periods_each_side * period || cfg.range_end < opt.min_periods_each_side * period) {
    throw PreconditionError("histogram must span at least " + std::to_string(opt.min_periods_each_side) +
                            " repetition periods on each side of zero delay");
  }

  // Peaks whose full window lies inside the range.
  const auto k_lo = static_cast<int>(std::ceil(static_cast<double>(cfg.range_start + opt.peak_half_window) /
                                               static_cast<double>(period)));
  const auto k_hi = static_cast<int>(std::floor(static_cast<double>(cfg.range_end - opt.peak_half_window) /
                                                static_cast<double>(period)));
  G2Result res;
  for (int k = k_lo; k <= k_hi; ++k) res.peaks.push_back({k, 0.0, 0.0, 0});

  double bg_sum = 0.0;
  std::size_t bg_bins = 0;
  const auto half = static_cast<double>(opt.peak_half_window);
  const auto per = static_cast<double>(period);
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const double c = cfg.bin_center(i);
    const double k_near = std::round(c / per);
    const double dist = std::abs(c - k_near * per);
    const auto count = static_cast<double>(hist[i]);
    if (dist > static_cast<double>(opt.bg_exclusion)) {
      bg_sum += count;
      ++bg_bins;
    }
    if (dist <= half) {
      const int k = static_cast<int>(k_near);
      if (k >= k_lo && k <= k_hi) {
        auto& p = res.peaks[static_cast<std::size_t>(k - k_lo)];
        p.raw += count;
        ++p.bins;
      }
    }
  }
  if (bg_bins == 0) throw PreconditionError("no histogram bins lie outside the background exclusion zone");
  res.background_bins = bg_bins;
  res.background_per_bin = bg_sum / static_cast<double>(bg_bins);
  for (auto& p : res.peaks) p.area = p.raw - res.background_per_bin * static_cast<double>(p.bins);

  const PeakArea* zero = nullptr;
  double side_sum = 0.0, far_raw_sum = 0.0, far_raw_sq = 0.0, far_bins = 0.0;
  std::size_t n_side = 0, n_far = 0;
  for (const auto& p : res.peaks) {
    if (p.index == 0) {
      zero = &p;
      continue;
    }
    side_sum += p.raw;
    ++n_side;
    if (std::llabs(static_cast<long long>(p.index)) * period >= opt.far_peak_min_delay) {
      far_raw_sum += p.raw;
      far_raw_sq += p.raw * p.raw;
      far_bins += static_cast<double>(p.bins);
      ++n_far;
    }
  }
  if (zero == nullptr) throw PreconditionError("zero-delay peak lies outside the histogram range");
  if (n_far < 3) throw PreconditionError("fewer than 3 far peaks for normalization");
  res.far_peaks = n_far;

  // Raw ratio, before subtraction.
  const double z = zero->raw;
  const double side_mean = side_sum / static_cast<double>(n_side);
  if (side_mean <= 0.0) throw PreconditionError("side peaks contain no counts");
  res.raw_suppression = z / side_mean;
  res.raw_err = res.raw_suppression *
                std::sqrt(1.0 / std::max(z, 1.0) + side_sum / (static_cast<double>(n_side * n_side) * side_mean * side_mean));

  // Subtracted ratio against the far peaks.
  const double nf = static_cast<double>(n_far);
  const double far_mean = far_raw_sum / nf;
  const double n0 = static_cast<double>(zero->bins);
  const double nbar = far_bins / nf;
  const double b = res.background_per_bin;
  double num = z - n0 * b;
  const double den = far_mean - nbar * b;
  if (den <= 0.0) throw PreconditionError("far peaks vanish after background subtraction");
  if (num < 0.0) {
    num = 0.0;
    res.negative_clamped = true;
  }
  res.g2_zero = num / den;

  // Shot noise of the zero peak, spread of the far peaks (standard error of
  // their mean) and shot noise of the floor estimate, in quadrature.
  const double var_far = nf > 1 ? std::max(0.0, (far_raw_sq - nf * far_mean * far_mean) / (nf - 1.0)) : far_mean;
  const double sigma_z = std::sqrt(std::max(z, 1.0));
  const double sigma_m = std::sqrt(var_far / nf);
  const double sigma_b = std::sqrt(std::max(bg_sum, 1.0)) / static_cast<double>(bg_bins);
  const double dz = 1.0 / den;
  const double dm = -num / (den * den);
  const double db = (-n0 * den + nbar * num) / (den * den);
  res.err = std::sqrt(dz * dz * sigma_z * sigma_z + dm * dm * sigma_m * sigma_m + db * db * sigma_b * sigma_b);
  return res;
}

}  // namespace qdup
