#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "qdup/upconversion.hpp"

using namespace qdup;

namespace {

EfficiencyBudget lossless() { return {1, 1, 1, 1, 1, 1, 1}; }

EventStream on_center_events(std::size_t n, TimePs spacing = 1000) {
  EventStream s;
  s.duration = static_cast<TimePs>(n) * spacing;
  s.events.reserve(n);
  for (std::size_t i = 0; i < n; ++i) s.events.push_back({static_cast<TimePs>(i) * spacing, 0, Origin::kQd});
  return s;
}

QpmParams quiet_qpm() {
  QpmParams q;
  q.asr_coeff = 0.0;
  return q;
}

const LineMap kOnCenter{{0, WavelengthNm{1302.6}}};

}  // namespace

TEST(QpmTransfer, PeakHalfMaxAndSidelobe) {
  EXPECT_EQ(qpm_transfer(0.0, 0.35), 1.0);
  EXPECT_NEAR(qpm_transfer(0.175, 0.35), 0.5, 1e-3);
  EXPECT_NEAR(qpm_transfer(-0.175, 0.35), 0.5, 1e-3);
  EXPECT_NEAR(qpm_transfer(0.5651, 0.35), 0.0473, 5e-4);
  // First sidelobe of sinc^2 sits at x = 4.4934094 with height 0.0471904.
  const double beta = 2 * 1.3915574 / 0.35;
  EXPECT_NEAR(qpm_transfer(4.4934094 / beta, 0.35), 0.0471904, 1e-5);
  EXPECT_THROW(qpm_transfer(0.1, 0.0), DomainError);
}

TEST(QpmTransfer, EvenAndBoundedByOne) {
  for (double d = 0.001; d < 3.0; d += 0.0137) {
    const double v = qpm_transfer(d, 0.35);
    EXPECT_LT(v, 1.0);
    EXPECT_GE(v, 0.0);
    EXPECT_EQ(v, qpm_transfer(-d, 0.35));
  }
}

TEST(InternalEfficiency, ModelPoints) {
  const QpmParams q;
  EXPECT_NEAR(internal_efficiency(85.0, q), 0.752, 1e-12);
  EXPECT_EQ(internal_efficiency(0.0, q), 0.0);
  EXPECT_NEAR(internal_efficiency(25.0, q), 0.426, 1e-3);
  EXPECT_NEAR(internal_efficiency(25.0, q), 0.4258501, 1e-6);
  EXPECT_NEAR(internal_efficiency(120.0, q), 0.6881875, 1e-6);
}

TEST(InternalEfficiency, MonotoneUpToPeak) {
  const QpmParams q;
  double prev = -1.0;
  for (double p = 0.0; p <= 85.0; p += 0.5) {
    const double v = internal_efficiency(p, q);
    EXPECT_GT(v, prev);
    prev = v;
  }
  for (double p = 0.0; p <= 400.0; p += 0.7) EXPECT_LE(internal_efficiency(p, q), 0.752 + 1e-15);
}

TEST(Asr, LinearInPowerAndFilter) {
  QpmParams q;
  EXPECT_NEAR(asr_background_rate(85.0, q), 952.0, 1e-9);
  EXPECT_EQ(asr_background_rate(0.0, q), 0.0);
  q.filter_bandwidth_nm = 1.0;
  EXPECT_NEAR(asr_background_rate(85.0, q), 47.6, 1e-9);
}

TEST(SignalToBackground, OperatingPoints) {
  const QpmParams q;
  const EfficiencyBudget b;
  EXPECT_NEAR(signal_to_background(85.0, 1e4, q, b), 1.99645, 1e-4);
  EXPECT_NEAR(signal_to_background(25.0, 1e4, q, b), 3.12989, 1e-4);
  EXPECT_GT(signal_to_background(25.0, 1e4, q, b), signal_to_background(85.0, 1e4, q, b));
  EXPECT_TRUE(std::isinf(signal_to_background(0.0, 1e4, q, b, 0.0)));
}

TEST(ConvertStream, EmptyInEmptyOut) {
  EventStream in;
  in.duration = seconds_to_ps(1.0);
  EXPECT_TRUE(convert_stream(in, quiet_qpm(), EfficiencyBudget{}, kOnCenter, 1).empty());
}

TEST(ConvertStream, OnCenterSurvivors) {
  const auto in = on_center_events(1'000'000);
  const auto out = convert_stream(in, quiet_qpm(), lossless(), kOnCenter, 2);
  const double n = 1e6, p = 0.752;
  EXPECT_NEAR(static_cast<double>(out.size()), n * p, 4 * std::sqrt(n * p * (1 - p)));
}

TEST(ConvertStream, DetunedSurvivors) {
  const auto in = on_center_events(1'000'000);
  const LineMap detuned{{0, WavelengthNm{1302.6 + 0.5651}}};
  const auto out = convert_stream(in, quiet_qpm(), lossless(), detuned, 3);
  const double n = 1e6, p = 0.752 * qpm_transfer(0.5651, 0.35);
  EXPECT_NEAR(p * n, 35570, 100);
  EXPECT_NEAR(static_cast<double>(out.size()), n * p, 4 * std::sqrt(n * p * (1 - p)));
}

TEST(ConvertStream, LosslessIsIdentity) {
  QpmParams q = quiet_qpm();
  q.eta_internal_peak = 1.0;
  EventStream in = on_center_events(5000, 777);
  in.events[10].origin = Origin::kUncorrelated;
  EXPECT_EQ(convert_stream(in, q, lossless(), kOnCenter, 4), in);
}

TEST(ConvertStream, SurvivorCountsAreBinomial) {
  const auto in = on_center_events(10000);
  const double p = EfficiencyBudget{}.pre_detector_product(0.752);
  const double n = 10000;
  double chi2 = 0.0;
  const int seeds = 30;
  for (int s = 0; s < seeds; ++s) {
    const double k = static_cast<double>(convert_stream(in, quiet_qpm(), EfficiencyBudget{}, kOnCenter, 100 + s).size());
    chi2 += (k - n * p) * (k - n * p) / (n * p * (1 - p));
  }
  EXPECT_LT(chi2, 50.89);  // 1 % point of chi-square with 30 dof
}

TEST(ConvertStream, AsrInjectionRate) {
  EventStream in;
  in.duration = seconds_to_ps(20.0);
  const QpmParams q;
  const EfficiencyBudget b;
  const auto out = convert_stream(in, q, b, kOnCenter, 5);
  const double expect = 952.0 / 0.70 * 20.0;
  EXPECT_NEAR(static_cast<double>(out.size()), expect, 4 * std::sqrt(expect));
  EXPECT_EQ(out.count(Origin::kAsr), out.size());
  EXPECT_TRUE(out.is_valid());
}

TEST(ConvertStream, UnmappedChannelIsConfigError) {
  auto in = on_center_events(10);
  in.events[3].channel = 2;
  try {
    convert_stream(in, quiet_qpm(), lossless(), kOnCenter, 1);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "line_wavelengths");
  }
}

TEST(ConvertStream, PartitionIndependentThinning) {
  // The survival draw of an event depends only on (seed, index).
  const auto in = on_center_events(2000);
  const auto a = convert_stream(in, quiet_qpm(), EfficiencyBudget{}, kOnCenter, 9);
  const auto b = convert_stream(in, quiet_qpm(), EfficiencyBudget{}, kOnCenter, 9);
  EXPECT_EQ(a, b);
}

TEST(QpmCenter, LinearMapThroughReference) {
  const QpmParams q;
  EXPECT_DOUBLE_EQ(q.center_for_pump(1556.8), 1302.6);
  EXPECT_NEAR(q.center_for_pump(1557.8), 1301.6, 1e-9);
  EXPECT_NEAR(q.pump_for_center(q.center_for_pump(1558.3)), 1558.3, 1e-9);
}
