#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "qdup/core.hpp"
#include "qdup/rng.hpp"

using namespace qdup;

namespace {

// Reference values evaluated independently with hc = 1.98645e-25 J m.
constexpr double kHc = 1.98645e-25;

EfficiencyBudget unit_budget() { return {1, 1, 1, 1, 1, 1, 1}; }

}  // namespace

TEST(Wavelength, RejectsNonPositiveAndNonFinite) {
  EXPECT_THROW(WavelengthNm{0.0}, DomainError);
  EXPECT_THROW(WavelengthNm{-1.0}, DomainError);
  EXPECT_THROW(WavelengthNm{std::numeric_limits<double>::infinity()}, DomainError);
  EXPECT_THROW(WavelengthNm{std::nan("")}, DomainError);
  EXPECT_DOUBLE_EQ(WavelengthNm{710.0}.meters(), 710e-9);
}

TEST(SumFrequency, TelecomPairGivesNear710) {
  const double out = sum_frequency(WavelengthNm{1302.6}, WavelengthNm{1556.8}).nm();
  EXPECT_NEAR(out, 1.0 / (1.0 / 1302.6 + 1.0 / 1556.8), 1e-9);
  EXPECT_NEAR(out, 709.2004, 1e-4);
}

TEST(SumFrequency, EqualInputsHalve) {
  EXPECT_NEAR(sum_frequency(WavelengthNm{1420.0}, WavelengthNm{1420.0}).nm(), 710.0, 1e-12);
}

TEST(SumFrequency, LongPumpLimit) {
  // A 1 m pump still pulls the output 1.7 pm below the signal.
  EXPECT_NEAR(sum_frequency(WavelengthNm{1302.6}, WavelengthNm{1e9}).nm(), 1302.6 - 1302.6 * 1302.6 / (1e9 + 1302.6),
              1e-9);
  EXPECT_NEAR(sum_frequency(WavelengthNm{1302.6}, WavelengthNm{1e12}).nm(), 1302.6, 1e-5);
}

TEST(SumFrequency, SymmetricAndBelowBothInputs) {
  for (double a : {500.0, 1302.6, 1550.0}) {
    for (double b : {800.0, 1556.8, 3000.0}) {
      const double ab = sum_frequency(WavelengthNm{a}, WavelengthNm{b}).nm();
      EXPECT_EQ(ab, sum_frequency(WavelengthNm{b}, WavelengthNm{a}).nm());
      EXPECT_LT(ab, std::min(a, b));
    }
  }
}

TEST(SumFrequency, InverseRoundTrips) {
  const WavelengthNm signal{1302.6};
  for (double pump : {1555.0, 1556.8, 1559.9}) {
    const WavelengthNm out = sum_frequency(signal, WavelengthNm{pump});
    EXPECT_NEAR(pump_for_output(signal, out).nm() / pump, 1.0, 1e-9);
  }
}

TEST(FluxToPower, FiberFlux) {
  EXPECT_NEAR(flux_to_power(1e4, WavelengthNm{1302.6}), 1e4 * kHc / 1302.6e-9, 1e-27);
  EXPECT_NEAR(flux_to_power(1e4, WavelengthNm{1302.6}), 1.52499e-15, 1e-19);
  EXPECT_NEAR(flux_to_power(1.0, WavelengthNm{710.0}), 2.797817e-19, 1e-24);
  EXPECT_EQ(flux_to_power(0.0, WavelengthNm{1302.6}), 0.0);
  EXPECT_THROW(flux_to_power(-1.0, WavelengthNm{1302.6}), DomainError);
}

TEST(FluxToPower, LinearInRate) {
  const WavelengthNm w{1302.6};
  for (double a : {0.0, 1.0, 17.0, 1e4}) {
    for (double b : {0.0, 3.0, 2.5e5}) {
      EXPECT_NEAR(flux_to_power(a + b, w), flux_to_power(a, w) + flux_to_power(b, w),
                  1e-15 * flux_to_power(a + b + 1, w));
    }
  }
}

TEST(Budget, OverallAtModelPoints) {
  const EfficiencyBudget b;
  EXPECT_NEAR(b.loss_product(), 0.95 * 0.61 * 0.81 * 0.85 * 0.70, 1e-15);
  EXPECT_NEAR(overall_detection_efficiency(b, 0.752), 0.2100261, 1e-6);
  EXPECT_NEAR(overall_detection_efficiency(b, 0.426), 0.1189776, 1e-6);
  EXPECT_DOUBLE_EQ(overall_detection_efficiency(unit_budget(), 1.0), 1.0);
}

TEST(Budget, InternalFromOverall) {
  const EfficiencyBudget b;
  EXPECT_NEAR(internal_from_overall(0.210, b), 0.7519066, 1e-6);
  EXPECT_NEAR(internal_from_overall(0.119, b), 0.4260804, 1e-6);
  EXPECT_EQ(internal_from_overall(0.0, b), 0.0);
  EXPECT_THROW(internal_from_overall(0.5, b), InconsistencyError);
}

TEST(Budget, InverseIsIdentity) {
  const EfficiencyBudget b;
  for (double eta = 0.0; eta <= 1.0; eta += 0.0625) {
    EXPECT_NEAR(internal_from_overall(overall_detection_efficiency(b, eta), b), eta, 1e-12);
  }
}

TEST(Budget, MonotoneInEveryFactor) {
  double EfficiencyBudget::*fields[] = {&EfficiencyBudget::eta_wdm, &EfficiencyBudget::eta_ppln_coupling,
                                        &EfficiencyBudget::eta_bs_mirrors, &EfficiencyBudget::eta_bf,
                                        &EfficiencyBudget::eta_spad};
  for (auto f : fields) {
    EfficiencyBudget b;
    double prev = -1.0;
    for (double v = 0.0; v <= 1.0; v += 0.125) {
      b.*f = v;
      const double o = overall_detection_efficiency(b, 0.6);
      EXPECT_GE(o, prev);
      prev = o;
    }
  }
  double prev = -1.0;
  for (double eta = 0.0; eta <= 1.0; eta += 0.125) {
    const double o = overall_detection_efficiency(EfficiencyBudget{}, eta);
    EXPECT_GE(o, prev);
    prev = o;
  }
}

TEST(Budget, EndToEnd) {
  EfficiencyBudget b;
  EXPECT_NEAR(end_to_end_efficiency(b, 0.210), 2.1e-4, 1e-12);
  EXPECT_NEAR(end_to_end_efficiency(b, 0.119), 1.19e-4, 1e-12);
  b.collection_ftw = 0.0;
  EXPECT_EQ(end_to_end_efficiency(b, 0.9), 0.0);
}

TEST(Budget, RejectsFactorsOutsideUnitInterval) {
  EfficiencyBudget b;
  b.eta_bf = 1.2;
  EXPECT_THROW(b.validate(), DomainError);
  EXPECT_THROW(overall_detection_efficiency(EfficiencyBudget{}, -0.1), DomainError);
}

TEST(Time, SecondsToPicoseconds) {
  EXPECT_EQ(seconds_to_ps(1.0), 1'000'000'000'000);
  EXPECT_EQ(seconds_to_ps(1e4), 10'000'000'000'000'000);
  EXPECT_THROW(seconds_to_ps(1e8), RangeError);
  EXPECT_THROW(seconds_to_ps(-1.0), DomainError);
}

TEST(Streams, StripKeepsTimesOnly) {
  EventStream s;
  s.duration = 100;
  s.events = {{1, 0, Origin::kQd}, {5, 1, Origin::kDark}, {5, 2, Origin::kAsr}};
  const TimeStream t = strip(s);
  EXPECT_EQ(t.times, (std::vector<TimePs>{1, 5, 5}));
  EXPECT_EQ(t.duration, 100);
  EXPECT_TRUE(s.is_valid());
  s.events[0].time = 200;
  EXPECT_FALSE(s.is_valid());
}

TEST(Streams, MergeIsSortedUnion) {
  EventStream a, b;
  a.duration = 50;
  b.duration = 60;
  a.events = {{1, 0, Origin::kQd}, {10, 0, Origin::kQd}};
  b.events = {{5, 1, Origin::kDark}, {10, 1, Origin::kDark}, {60, 1, Origin::kDark}};
  const EventStream m = merge_streams(a, b);
  EXPECT_EQ(m.size(), 5u);
  EXPECT_EQ(m.duration, 60);
  EXPECT_TRUE(m.is_valid());
  EXPECT_EQ(m.events[2].channel, 0);  // ties: first stream first
}

TEST(Rng, CounterStreamsAreReproducibleAndIndependent) {
  rng::CounterRng a(rng::derive(1, rng::Component::kEmitter, 1));
  rng::CounterRng b(rng::derive(1, rng::Component::kEmitter, 1));
  rng::CounterRng c(rng::derive(1, rng::Component::kEmitter, 2));
  int same = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    same += x == c();
  }
  EXPECT_EQ(same, 0);
}

TEST(Rng, UniformMoments) {
  rng::CounterRng g(42);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0 / 12, 2e-3);
}
