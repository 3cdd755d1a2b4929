#include <gtest/gtest.h>

#include <filesystem>

#include "v2g/day.hpp"
#include "v2g/env.hpp"
#include "v2g/rng.hpp"

using namespace v2g;
using namespace v2g::env;

namespace {

GridProfiles flat_profiles(double base, double pv, double wt, double tariff = 0.1) {
  GridProfiles g;
  g.baseload_kw.assign(24, base);
  g.pv_kw.assign(24, pv);
  g.wind_kw.assign(24, wt);
  g.tariff.assign(24, tariff);
  return g;
}

Environment make_env(std::vector<fleet::EvSession> f, GridProfiles g = synthetic_profiles(1)) {
  return Environment(EnvConfig{}, RewardWeights{}, std::move(g), std::move(f));
}

std::vector<fleet::EvSession> fleet_of(int n, std::uint64_t seed) {
  return fleet::sample_fleet(n, seed, fleet::FleetDistributions{}, fleet::EvSpec{},
                             fleet::Horizon{});
}

bool departures_in_band(const Environment& e) {
  for (std::size_t i = 0; i < e.fleet().size(); ++i) {
    const auto& s = e.fleet()[i];
    const double soc = e.ev_energies()[i] / s.capacity_kwh();
    if (soc < 0.8 - 1e-9 || soc > 0.9 + 1e-9) return false;
  }
  return true;
}

}  // namespace

TEST(Loads, HandValues) {
  const auto g = flat_profiles(1000, 200, 300);
  EXPECT_DOUBLE_EQ(power_load(g, 5, 100), 600.0);
  EXPECT_DOUBLE_EQ(net_load(g, 5, 100), -400.0);
  EXPECT_DOUBLE_EQ(power_load(flat_profiles(0, 0, 0), 3, 0), 0.0);
}

TEST(Stats, Constant) {
  const std::vector<double> w(24, 7.0);
  const auto s = rolling_stats(w);
  EXPECT_EQ(s.p_max, 7.0);
  EXPECT_EQ(s.p_min, 7.0);
  EXPECT_EQ(s.variance, 0.0);
  EXPECT_EQ(s.mean, 7.0);
}

TEST(Stats, Alternating) {
  std::vector<double> w;
  for (int i = 0; i < 24; ++i) w.push_back(i % 2 ? 100.0 : 0.0);
  const auto s = rolling_stats(w);
  EXPECT_EQ(s.p_max, 100.0);
  EXPECT_EQ(s.p_min, 0.0);
  EXPECT_DOUBLE_EQ(s.mean, 50.0);
  EXPECT_DOUBLE_EQ(s.variance, 2500.0);
}

TEST(Reward, ZeroActionParts) {
  RewardInputs in;
  in.stats = {500, 500, 0, 500};
  in.mean_net_load = -300;
  in.energy = 10;
  in.energy_lower = 5;
  in.energy_upper = 20;
  in.tariff = 0.2;
  const RewardWeights w;
  const auto r = reward(w, in);
  EXPECT_DOUBLE_EQ(r.f2, 0.0);
  EXPECT_DOUBLE_EQ(r.f3, w.rho / w.denom_floor);
  EXPECT_DOUBLE_EQ(r.f1, w.alpha / w.denom_floor + 1.0 / 300.0);
  EXPECT_DOUBLE_EQ(r.r, r.f1 + r.f2 + r.f3);
}

TEST(Reward, BoundaryPenalty) {
  RewardInputs in;
  in.energy_upper = 50;
  in.energy = 60;
  EXPECT_DOUBLE_EQ(reward(RewardWeights{}, in).f2, -100.0);
  in.energy_lower = 70;
  in.energy_upper = 80;
  EXPECT_DOUBLE_EQ(reward(RewardWeights{}, in).f2, -100.0);
}

TEST(Reward, VarianceTerm) {
  RewardInputs in;
  in.stats.variance = 10000;
  in.mean_net_load = 1e12;
  RewardWeights w;
  w.beta = 0;
  EXPECT_NEAR(reward(w, in).f1, 0.001, 1e-9);
}

TEST(Reward, SignModes) {
  RewardInputs in;
  in.tariff = 0.1;
  in.eva_power = 100;
  in.mean_net_load = -0.5;
  RewardWeights w;
  const auto corrected = reward(w, in);
  w.sign_mode = SignMode::paper_literal;
  const auto literal = reward(w, in);
  EXPECT_DOUBLE_EQ(corrected.f2, -50.0);
  EXPECT_DOUBLE_EQ(literal.f2, 50.0);
  EXPECT_DOUBLE_EQ(corrected.f1 - w.alpha, 1.0);
  EXPECT_DOUBLE_EQ(literal.f1 - w.alpha, -1.0);
}

TEST(Environment, InitialEnergy) {
  EXPECT_EQ(make_env({}).reset(1).eva_energy, 0.0);
  EXPECT_DOUBLE_EQ(make_env({fleet::EvSession{}}).reset(1).eva_energy, 12.0);

  const auto f = fleet_of(509, 3);
  const auto path = std::filesystem::temp_directory_path() / "v2g_env_fleet.csv";
  fleet::write_fleet(f, path);
  const auto table = csv::read(path);
  double sum = 0.0;
  const auto c_soc = table.column("soc"), c_cap = table.column("capacity_kwh"),
             c_soh = table.column("soh");
  for (const auto& r : table.rows)
    sum += std::stod(r[c_soc]) * std::stod(r[c_cap]) * std::stod(r[c_soh]) / 100.0;
  std::filesystem::remove(path);
  EXPECT_NEAR(make_env(f).reset(1).eva_energy, sum, 1e-9);
}

TEST(Environment, ZeroActionKeepsEnergy) {
  auto e = make_env(fleet_of(30, 2), flat_profiles(1000, 200, 300));
  auto s = e.reset(5);
  const double e0 = s.eva_energy;
  const auto out = e.step(0.0);
  EXPECT_DOUBLE_EQ(out.next_state.eva_energy, e0);
  EXPECT_DOUBLE_EQ(out.grid_load, 500.0);
  EXPECT_EQ(out.next_state.load_history.back(), 500.0);
}

TEST(Environment, TransformerCapBinds) {
  auto e = make_env(fleet_of(509, 7));
  e.reset(1);
  bool hit = false;
  while (!e.done()) {
    const auto out = e.step(1e9);
    EXPECT_LE(out.grid_load, 3200.0 + 1e-6);
    if (std::abs(out.grid_load - 3200.0) < 1e-6) hit = true;
  }
  EXPECT_TRUE(hit);
}

TEST(Environment, ProjectionToEnvelope) {
  auto e = make_env(fleet_of(20, 1));
  e.reset(1);
  while (!e.done()) {
    const auto b = e.admissible_bounds();
    const auto out = e.step(b.max + 50.0);
    EXPECT_TRUE(out.projected);
    EXPECT_NEAR(out.applied_power, b.max, 1e-6);
  }
}

TEST(Environment, FeasibleSchedulesLandInBand) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto e = make_env(fleet_of(60, seed));
    e.reset(seed);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    while (!e.done()) {
      const auto b = e.admissible_bounds();
      const auto out = e.step(b.min + u(rng) * (b.max - b.min));
      EXPECT_FALSE(out.grid_conflict);
      EXPECT_NEAR(out.applied_power, out.requested_power, 1e-6);
    }
    EXPECT_TRUE(departures_in_band(e)) << seed;
  }
}

TEST(Environment, StateLayout) {
  auto e = make_env(fleet_of(10, 1));
  const auto s = e.reset(1);
  EXPECT_EQ(s.to_array().size(), 28u);
  EXPECT_EQ(s.to_array()[24], s.eva_energy);
  EXPECT_EQ(s.tariff, e.profiles().tariff[15]);
  e.step(0.0);
  EXPECT_EQ(e.state().tariff, e.profiles().tariff[16]);
}

TEST(Environment, SeedDeterminism) {
  auto a = make_env(fleet_of(40, 2));
  auto b = make_env(fleet_of(40, 2));
  a.reset(9);
  b.reset(9);
  while (!a.done()) {
    const double p = 0.3 * a.admissible_bounds().max;
    const auto x = a.step(p), y = b.step(p);
    EXPECT_EQ(x.reward.r, y.reward.r);
    EXPECT_EQ(x.applied_power, y.applied_power);
  }
}

TEST(Environment, RejectsOverloadedProfile) {
  EXPECT_THROW(make_env({}, flat_profiles(3500, 0, 0)), ConfigError);
}

TEST(Environment, StepAfterDoneThrows) {
  auto e = make_env({});
  e.reset(1);
  while (!e.done()) e.step(0.0);
  EXPECT_THROW(e.step(0.0), DomainError);
  EXPECT_THROW(make_env({}).step(std::nan("")), DomainError);
}

TEST(Environment, SopCapsEvPower) {
  auto e = make_env({fleet::EvSession{}});
  e.reset(1);
  const auto sop = e.ev_peak_power(0);
  EXPECT_GT(sop.charge, 0.0);
  EXPECT_GT(sop.discharge, 0.0);
}

TEST(Day, RunDayRecordsEverything) {
  auto e = make_env(fleet_of(25, 4));
  const auto d = run_day(e, 3, [](const Environment& env, const EnvState&) {
    return env.admissible_bounds().max;
  });
  EXPECT_EQ(d.num_slots, 20);
  EXPECT_EQ(d.energy.size(), 21u);
  EXPECT_EQ(d.ev_energy.size(), 25u);
  for (int k = 0; k < d.num_slots; ++k) {
    double sum = 0.0;
    for (const auto& p : d.ev_power) sum += p[k];
    EXPECT_NEAR(sum, d.eva_power[k], 1e-6);
  }
  const auto path = std::filesystem::temp_directory_path() / "v2g_day_schedule.csv";
  write_schedule(d, path);
  EXPECT_EQ(read_schedule(path), d.eva_power);
  std::filesystem::remove(path);
}
