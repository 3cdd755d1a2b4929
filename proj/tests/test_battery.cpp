#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "v2g/battery.hpp"

using namespace v2g;
using namespace v2g::battery;

TEST(SohFade, ZeroCyclesIsNew) {
  EXPECT_EQ(soh_capacity_fade(0.3, 0.7, 0.0), 100.0);
  EXPECT_EQ(soh_capacity_fade(0.9, 0.0, 0.0), 100.0);
}

TEST(SohFade, HandValue) {
  // 100 - 3.25*0.5*(1 + 1.95 - 0.81)*1
  EXPECT_NEAR(soh_capacity_fade(0.5, 0.6, 100.0), 96.5225, 1e-12);
}

TEST(SohFade, MonotoneInCycles) {
  EXPECT_LT(soh_capacity_fade(0.5, 0.6, 400.0), soh_capacity_fade(0.5, 0.6, 100.0));
}

TEST(SohFade, DomainChecks) {
  EXPECT_THROW(soh_capacity_fade(1.2, 0.5, 1.0), DomainError);
  EXPECT_THROW(soh_capacity_fade(0.5, -0.1, 1.0), DomainError);
  EXPECT_THROW(soh_capacity_fade(0.5, 0.5, -1.0), DomainError);
}

TEST(CycleLife, PowerLawFactors) {
  SohModelParams p;
  EXPECT_DOUBLE_EQ(max_cycle_number(100.0, 1.0, 1.0, p), 3000.0);
  p.dod_exponent = 1.0;
  p.discharge_current_exponent = 0.0;
  p.charge_current_exponent = 0.0;
  EXPECT_DOUBLE_EQ(max_cycle_number(50.0, 1.0, 1.0, p), 6000.0);
  // scripted: 3000 * 0.25**-0.5 * 2.3**-0.2 * 2.3**-0.2
  EXPECT_NEAR(max_cycle_number(25.0, 2.3, 2.3, SohModelParams{}), 4299.917429417124, 1e-9);
  EXPECT_THROW(max_cycle_number(0.0, 1.0, 1.0, p), DomainError);
  EXPECT_THROW(max_cycle_number(10.0, 0.0, 1.0, p), DomainError);
}

namespace {
CycleRecord cycle_with_dod(double dod) {
  CycleRecord c;
  c.soc_ave = 0.5;
  c.delta_soc = dod / 100.0;
  c.dod = dod;
  c.i_dis_ave = 1.0;
  c.i_ch_ave = 1.0;
  return c;
}

SohModelParams flat_life(double h) {
  SohModelParams p;
  p.cycle_constant = h;
  p.dod_exponent = 0.0;
  p.discharge_current_exponent = 0.0;
  p.charge_current_exponent = 0.0;
  return p;
}
}  // namespace

TEST(CycleCount, FactorHeldWithoutHistory) {
  const auto p = flat_life(1000.0);
  BatteryPackState s;
  s = update_cycle_count(s, cycle_with_dod(40), p);
  EXPECT_DOUBLE_EQ(s.aging_factor, 1e-3);
  EXPECT_DOUBLE_EQ(s.efc, 1.5);
  s = update_cycle_count(s, cycle_with_dod(20), p);
  EXPECT_DOUBLE_EQ(s.aging_factor, 1e-3);
  EXPECT_DOUBLE_EQ(s.efc, 3.0);
}

TEST(CycleCount, EqualDepthsLeaveFactor) {
  const auto p = flat_life(1000.0);
  BatteryPackState s;
  for (int i = 0; i < 3; ++i) s = update_cycle_count(s, cycle_with_dod(30), p);
  EXPECT_DOUBLE_EQ(s.aging_factor, 1e-3);
}

TEST(CycleCount, ThreePointCorrection) {
  const auto p = flat_life(1000.0);
  BatteryPackState s;
  s = update_cycle_count(s, cycle_with_dod(40), p);
  s = update_cycle_count(s, cycle_with_dod(20), p);
  s = update_cycle_count(s, cycle_with_dod(40), p);
  // 1e-3 + 0.5/1000 * (2 - 80/20) = 0
  EXPECT_NEAR(s.aging_factor, 0.0, 1e-15);

  BatteryPackState t;
  t = update_cycle_count(t, cycle_with_dod(20), p);
  t = update_cycle_count(t, cycle_with_dod(40), p);
  t = update_cycle_count(t, cycle_with_dod(20), p);
  EXPECT_NEAR(t.aging_factor, 1e-3 + 0.5e-3, 1e-15);
}

TEST(CycleCount, IdenticalCyclesMatchClosedForm) {
  SohModelParams p;
  const auto c = cycle_with_dod(40);
  BatteryPackState s;
  const int n = 50;
  for (int i = 0; i < n; ++i) s = apply_cycle(s, c, p);
  const double m = 3000.0 * std::pow(0.4, -0.5);
  const double efc = n * 1500.0 / m;
  const double expect =
      100.0 - 3.25 * 0.5 * (1.0 + 3.25 * 0.4 - 2.25 * 0.16) * std::pow(efc / 100.0, 0.453);
  EXPECT_NEAR(s.efc, efc, 1e-9);
  EXPECT_NEAR(s.soh, expect, 1e-9);
}

TEST(CycleCount, SohNeverIncreases) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SohModelParams p;
  BatteryPackState s;
  s.soh = 97.46;
  s.efc = 50.0;
  for (int i = 0; i < 500; ++i) {
    CycleRecord c;
    c.dod = 1.0 + 99.0 * u(rng);
    c.delta_soc = c.dod / 100.0;
    c.soc_ave = c.delta_soc / 2 + (1 - c.delta_soc) * u(rng);
    c.i_dis_ave = 0.1 + 3.0 * u(rng);
    c.i_ch_ave = 0.1 + 3.0 * u(rng);
    const double before = s.soh;
    s = apply_cycle(s, c, p);
    ASSERT_LE(s.soh, before);
    ASSERT_GE(s.aging_factor, 0.0);
  }
}

TEST(SocLimit, HandValues) {
  const SocWindow w{0.2, 0.9};
  const auto c = soc_limited_current(0.5, w, 2.3, 1.0);
  EXPECT_NEAR(c.discharge, 0.69, 1e-12);
  EXPECT_NEAR(c.charge, 0.92, 1e-12);
  EXPECT_EQ(soc_limited_current(0.2, w, 2.3, 1.0).discharge, 0.0);
  EXPECT_EQ(soc_limited_current(0.9, w, 2.3, 1.0).charge, 0.0);
}

TEST(VoltageLimit, HandValues) {
  CellSpec s;
  s.ocv = {{0.0, 3.05}, {1.0, 3.55}};  // 3.3 V at 0.5, slope 0.5 V
  s.u_t_min = 2.8;
  s.u_t_max = 3.6;
  s.r0 = 0.01;
  const auto c = voltage_limited_current(0.5, s, 2.3, 1.0);
  EXPECT_NEAR(c.discharge, 0.5 / (0.01 + 0.5 / 2.3), 1e-12);
  EXPECT_NEAR(c.discharge, 2.199, 1e-3);
  EXPECT_NEAR(c.charge, 1.319, 1e-3);
}

TEST(VoltageLimit, ZeroAtCutoff) {
  CellSpec s;
  s.ocv = {{0.0, 2.5}, {1.0, 3.6}};
  s.u_t_min = 2.5;
  EXPECT_EQ(voltage_limited_current(0.0, s, 2.3, 1.0).discharge, 0.0);
}

TEST(PeakPower, ZeroAtCeiling) {
  BatteryPackState st;
  const auto p = peak_power(0.9, CellSpec{}, PackTopology{}, st, 1.0);
  EXPECT_EQ(p.p_ch_kw, 0.0);
  EXPECT_GT(p.p_dis_kw, 0.0);
  EXPECT_EQ(peak_power(0.2, CellSpec{}, PackTopology{}, st, 1.0).p_dis_kw, 0.0);
}

TEST(PeakPower, DesignLimitBinding) {
  CellSpec s;
  s.i_design_ch = 0.1;
  s.i_design_dis = 0.1;
  BatteryPackState st;
  const auto p = peak_power(0.5, s, PackTopology{}, st, 1.0);
  const double cells = 39 * 4;
  EXPECT_DOUBLE_EQ(p.limit.charge, 0.1);
  EXPECT_NEAR(p.p_ch_kw, (s.ocv_at(0.5) + 0.1 * s.r0) * 0.1 * cells / 1000.0, 1e-12);
  EXPECT_NEAR(p.p_dis_kw, (s.ocv_at(0.5) - 0.1 * s.r0) * 0.1 * cells / 1000.0, 1e-12);
}

TEST(PeakPower, MinOfThreeBranches) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> soc(0.2, 0.9), soh(80.0, 100.0);
  const CellSpec spec;
  for (int i = 0; i < 200; ++i) {
    BatteryPackState st;
    st.soh = soh(rng);
    const double s = soc(rng);
    const auto p = peak_power(s, spec, PackTopology{}, st, 1.0);
    const double q = spec.rated_capacity_ah * st.soh / 100.0;
    const double a = q * (0.9 - s);
    const double b = (spec.u_t_max - spec.ocv_at(s)) / (spec.r0 + spec.ocv_slope(s) / q);
    const double c = spec.i_design_ch;
    EXPECT_NEAR(p.limit.charge, std::max(0.0, std::min({a, b, c})), 1e-12);
  }
}

TEST(DegradationCost, HandValues) {
  const DegradationCostParams d;
  EXPECT_EQ(degradation_cost(1.0, 24.0, d), 0.0);
  EXPECT_NEAR(degradation_cost(0.99, 24.0, d), 360.0, 1e-9);
  EXPECT_NEAR(degradation_cost(0.9713, 24.0, d), 1033.2, 1e-9);
  EXPECT_THROW(degradation_cost(0.0, 24.0, d), DomainError);
  EXPECT_THROW(degradation_cost(0.9, 0.0, d), DomainError);
}

TEST(Segmentation, FlatTraceHasNoCycles) {
  const std::vector<double> soc(21, 0.5);
  EXPECT_TRUE(segment_cycles(soc, 1.0, 2.3).empty());
}

TEST(Segmentation, ChargeThenDischarge) {
  const std::vector<double> soc{0.5, 0.7, 0.9, 0.9, 0.7, 0.5};
  const auto c = segment_cycles(soc, 1.0, 2.0);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_NEAR(c[0].soc_ave, 0.7, 1e-12);
  EXPECT_NEAR(c[0].delta_soc, 0.4, 1e-12);
  EXPECT_NEAR(c[0].dod, 40.0, 1e-9);
  EXPECT_NEAR(c[0].i_ch_ave, 0.4 * 2.0 / 2.0, 1e-12);
  EXPECT_NEAR(c[0].i_dis_ave, 0.4 * 2.0 / 2.0, 1e-12);
}

TEST(Segmentation, UnpairedChargeCountsAlone) {
  const std::vector<double> soc{0.5, 0.6, 0.85};
  const auto c = segment_cycles(soc, 1.0, 2.3);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_NEAR(c[0].dod, 35.0, 1e-9);
  EXPECT_NEAR(c[0].i_ch_ave, c[0].i_dis_ave, 1e-15);
}

TEST(Segmentation, ShallowWigglesIgnored) {
  const std::vector<double> soc{0.5, 0.5001, 0.5, 0.8};
  const auto c = segment_cycles(soc, 1.0, 2.3);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_NEAR(c[0].delta_soc, 0.3, 1e-3);
}

TEST(CellSpec, DefaultsValid) {
  EXPECT_NO_THROW(CellSpec{}.validate());
  CellSpec bad;
  bad.ocv[3].volts = 3.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}
