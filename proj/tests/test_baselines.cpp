#include <gtest/gtest.h>

#include <array>
#include <functional>
#include <limits>

#include "v2g/baselines.hpp"
#include "v2g/rng.hpp"

using namespace v2g;
using namespace v2g::baselines;

namespace {

qp::Vec vec(std::initializer_list<double> v) {
  qp::Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Six one-hour slots from midnight, one 20 kWh EV plugged in for all of them.
struct Small {
  env::GridProfiles profiles;
  std::vector<fleet::EvSession> fleet;
  env::EnvConfig cfg;

  Small() {
    profiles.baseload_kw.assign(24, 1000.0);
    profiles.pv_kw.assign(24, 0.0);
    profiles.wind_kw.assign(24, 0.0);
    profiles.tariff.assign(24, 0.1);
    cfg.horizon.start_hour = 0;
    cfg.horizon.num_slots = 6;
    cfg.sop_limits = false;
    fleet::EvSession s;
    s.arrival_hour = 0;
    s.departure_hour = 6;
    s.spec.capacity_kwh = 20.0;
    s.soc_initial = 0.5;
    fleet.push_back(s);
  }

  env::Environment make() const { return env::Environment(cfg, {}, profiles, fleet); }
};

// Enumerates integer-kW schedules of the single EV and calls f on each
// feasible one.
void for_each_schedule(const Small& s, const std::function<void(const std::array<int, 6>&)>& f) {
  std::array<int, 6> p{};
  const auto& ev = s.fleet[0];
  const double q = ev.capacity_kwh();
  auto rec = [&](auto&& self, int k, double e) -> void {
    if (k == 6) {
      if (e >= 0.8 * q - 1e-9 && e <= 0.9 * q + 1e-9) f(p);
      return;
    }
    for (int v = -6; v <= 6; ++v) {
      const double n = e + v;
      if (n < 0.2 * q - 1e-9 || n > 0.9 * q + 1e-9) continue;
      p[static_cast<std::size_t>(k)] = v;
      self(self, k + 1, n);
    }
  };
  rec(rec, 0, ev.initial_energy());
}

// Variance of the last 24 grid loads once the plan has run.
double window_variance(const Small& s, const std::vector<double>& plan) {
  std::vector<double> w;
  for (int j = 6 - 24; j < 6; ++j) {
    const int hour = ((j % 24) + 24) % 24;
    w.push_back(s.profiles.net_of_renewables(hour) + (j >= 0 ? plan[static_cast<std::size_t>(j)] : 0.0));
  }
  return env::rolling_stats(w).variance;
}

double plan_cost(const Small& s, const std::vector<double>& plan) {
  double c = 0.0;
  for (int k = 0; k < 6; ++k) c += s.profiles.tariff[static_cast<std::size_t>(k)] * plan[static_cast<std::size_t>(k)];
  return c;
}

}  // namespace

TEST(Qp, ProjectionOntoHalfPlane) {
  qp::Problem pr;
  pr.H = 2 * qp::Mat::Identity(2, 2);
  pr.c = vec({-2, -4});
  pr.A = qp::Mat(1, 2);
  pr.A << 1, 1;
  pr.b = vec({2});
  pr.E = qp::Mat::Zero(0, 2);
  pr.d = qp::Vec::Zero(0);
  pr.lo = vec({-10, -10});
  pr.hi = vec({10, 10});
  const auto r = qp::solve(pr);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.x(0), 0.5, 1e-7);
  EXPECT_NEAR(r.x(1), 1.5, 1e-7);
}

TEST(Qp, LinearProgramVertex) {
  qp::Problem pr;
  pr.H = qp::Mat::Zero(2, 2);
  pr.c = vec({-1, -1});
  pr.A = qp::Mat(2, 2);
  pr.A << 1, 2, 3, 1;
  pr.b = vec({4, 6});
  pr.E = qp::Mat::Zero(0, 2);
  pr.d = qp::Vec::Zero(0);
  pr.lo = vec({0, 0});
  pr.hi = vec({100, 100});
  const auto r = qp::solve(pr);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.x(0), 1.6, 1e-7);
  EXPECT_NEAR(r.x(1), 1.2, 1e-7);
}

TEST(Qp, EqualityConstraint) {
  qp::Problem pr;
  pr.H = 2 * qp::Mat::Identity(3, 3);
  pr.c = qp::Vec::Zero(3);
  pr.A = qp::Mat::Zero(0, 3);
  pr.b = qp::Vec::Zero(0);
  pr.E = qp::Mat::Ones(1, 3);
  pr.d = vec({3});
  pr.lo = qp::Vec::Constant(3, -5);
  pr.hi = qp::Vec::Constant(3, 5);
  const auto r = qp::solve(pr);
  ASSERT_TRUE(r.converged);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.x(i), 1.0, 1e-7);
}

TEST(Qp, EmptyBoxRejected) {
  qp::Problem pr;
  pr.H = qp::Mat::Zero(1, 1);
  pr.c = vec({1});
  pr.A = qp::Mat::Zero(0, 1);
  pr.b = qp::Vec::Zero(0);
  pr.E = qp::Mat::Zero(0, 1);
  pr.d = qp::Vec::Zero(0);
  pr.lo = vec({1});
  pr.hi = vec({0});
  EXPECT_THROW(qp::solve(pr), InfeasibleError);
}

TEST(Bl1, FullFleetDrawsNothing) {
  Small s;
  s.fleet[0].soc_initial = 0.9;
  auto e = s.make();
  e.reset(1);
  EXPECT_EQ(bl1_uncontrolled(e), 0.0);
}

TEST(Bl1, HeadroomRate) {
  Small s;
  s.fleet[0].soc_initial = 0.75;  // 15 kWh, 3 kWh below the 18 kWh ceiling
  auto e = s.make();
  e.reset(1);
  EXPECT_NEAR(bl1_uncontrolled(e), 3.0, 1e-12);
}

TEST(Bl1, SpikeAtArrivalPeak) {
  const auto f = fleet::sample_fleet(509, 11, {}, {}, {});
  auto e = env::Environment({}, {}, env::synthetic_profiles(2), f);
  const auto d = run_baseline(Baseline::bl1, e, 1);
  const auto& prof = e.profiles();
  const double base_max = *std::max_element(prof.baseload_kw.begin(), prof.baseload_kw.end());
  EXPECT_GT(d.max_grid_load(), base_max);
  // the busiest slot is when most EVs have just arrived
  const auto peak = std::max_element(d.eva_power.begin(), d.eva_power.end()) - d.eva_power.begin();
  EXPECT_GE(peak, 2);
  EXPECT_LE(peak, 5);
}

TEST(Bl2, FlatBaseloadSpreadsEvenly) {
  Small s;
  const auto e = s.make();
  const auto p = bl2_optimal_charging(e, 6.0);
  ASSERT_TRUE(p.converged);
  for (double v : p.power) EXPECT_NEAR(v, 1.0, 1e-4);
}

TEST(Bl2, ValleyGetsTheEnergy) {
  Small s;
  for (int h = 0; h < 24; ++h) s.profiles.baseload_kw[h] = (h >= 3 && h < 6) ? 800.0 : 1000.0;
  const auto p = bl2_optimal_charging(s.make(), 6.0);
  double gain = 0.0;
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(p.power[k], 0.0, 1e-4);
  for (int k = 3; k < 6; ++k) {
    EXPECT_GT(p.power[k], 0.0);
    EXPECT_NEAR(p.power[k], p.power[3], 1e-4);
    gain += p.power[k];
  }
  EXPECT_GE(gain, 6.0 - 1e-6);
}

TEST(Bl2, NoWorseThanBl1) {
  for (std::uint64_t sc = 0; sc < 5; ++sc) {
    const auto f = fleet::sample_fleet(10, derive_seed(sc, stream::fleet), {}, {}, {});
    env::Environment e({}, {}, env::synthetic_profiles(derive_seed(sc, stream::profiles)), f);
    auto e1 = e, e2 = e;
    const auto d1 = run_baseline(Baseline::bl1, e1, 1);
    const auto d2 = run_baseline(Baseline::bl2, e2, 1);
    EXPECT_LE(d2.load_variance(), d1.load_variance() + 1e-6) << sc;
  }
}

TEST(Bl3, PeakDischargeValleyCharge) {
  Small s;
  for (int h = 0; h < 24; ++h) s.profiles.baseload_kw[h] = 1000.0;
  s.profiles.baseload_kw[1] = 1010.0;
  s.profiles.baseload_kw[4] = 990.0;
  const auto p = bl3_min_variance(s.make());
  EXPECT_LT(p.power[1], 0.0);
  EXPECT_GT(p.power[4], 0.0);
}

TEST(Bl3, PinnedEnvelopeGivesForcedTrajectory) {
  Small s;
  s.fleet[0].arrival_hour = 4;
  s.fleet[0].departure_hour = 5;
  s.fleet[0].spec.departure_band = {0.8, 0.8};
  s.fleet[0].soc_initial = 0.5;
  s.fleet[0].spec.p_ch_max = 6.0;
  const auto p = bl3_min_variance(s.make());
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(p.power[k], k == 4 ? 6.0 : 0.0, 1e-6);
}

TEST(Bl3, MatchesExhaustiveSearch) {
  for (int trial = 0; trial < 3; ++trial) {
    Small s;
    std::mt19937_64 rng(static_cast<std::uint64_t>(trial));
    std::uniform_real_distribution<double> u(990.0, 1010.0);
    for (int h = 0; h < 24; ++h) s.profiles.baseload_kw[h] = u(rng);
    double best = std::numeric_limits<double>::infinity();
    for_each_schedule(s, [&](const std::array<int, 6>& p) {
      best = std::min(best, window_variance(s, std::vector<double>(p.begin(), p.end())));
    });
    const auto plan = bl3_min_variance(s.make());
    const double v = window_variance(s, plan.power);
    EXPECT_LE(v, best + 1e-6);
    EXPECT_NEAR(v, best, 0.01 * best);
  }
}

TEST(Bl4, MatchesExhaustiveSearch) {
  for (int trial = 0; trial < 3; ++trial) {
    Small s;
    std::mt19937_64 rng(static_cast<std::uint64_t>(100 + trial));
    std::uniform_int_distribution<int> cents(5, 30);
    for (int h = 0; h < 24; ++h) s.profiles.tariff[h] = cents(rng) / 100.0;
    double best = std::numeric_limits<double>::infinity();
    for_each_schedule(s, [&](const std::array<int, 6>& p) {
      best = std::min(best, plan_cost(s, std::vector<double>(p.begin(), p.end())));
    });
    const auto plan = bl4_min_cost(s.make(), 0.0);
    EXPECT_NEAR(plan_cost(s, plan.power), best, 1e-6);
  }
}

TEST(Bl4, UniformTariffCostIsEnergyTimesPrice) {
  Small s;
  const auto plan = bl4_min_cost(s.make());
  double energy = 0.0;
  for (double p : plan.power) energy += p;
  EXPECT_NEAR(energy, 6.0, 1e-5);  // cheapest is the lowest departure energy
  EXPECT_NEAR(plan_cost(s, plan.power), 0.1 * 6.0, 1e-6);
  EXPECT_NEAR(plan.power[0], 6.0, 1e-2);  // earliest feasible
}

TEST(Bl4, CheapTierTakesAllCharging) {
  Small s;
  for (int h = 0; h < 24; ++h) s.profiles.tariff[h] = h < 3 ? 0.3 : 0.05;
  s.fleet[0].spec.p_dis_max = -1e-3;
  const auto plan = bl4_min_cost(s.make());
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(plan.power[k], 0.0, 1e-3);
}

TEST(Baselines, ParseNames) {
  EXPECT_EQ(parse_baseline("bl3"), Baseline::bl3);
  EXPECT_EQ(name(Baseline::bl4), "bl4");
  EXPECT_THROW(parse_baseline("bl5"), ConfigError);
}

TEST(Baselines, RealizedChainOnRandomScenarios) {
  for (std::uint64_t sc = 0; sc < 6; ++sc) {
    const auto f = fleet::sample_fleet(10, derive_seed(sc, stream::fleet), {}, {}, {});
    env::Environment e({}, {}, env::synthetic_profiles(derive_seed(sc, stream::profiles)), f);
    std::array<DayResult, 4> d;
    for (int b = 0; b < 4; ++b) {
      auto copy = e;
      d[static_cast<std::size_t>(b)] = run_baseline(static_cast<Baseline>(b), copy, 1);
      EXPECT_LE(d[static_cast<std::size_t>(b)].max_grid_load(), 3200.0 + 1e-6);
    }
    EXPECT_LE(d[2].load_variance(), d[1].load_variance() + 1e-6);
    EXPECT_LE(d[1].load_variance(), d[0].load_variance() + 1e-6);
    for (int b = 0; b < 3; ++b)
      EXPECT_LE(d[3].charging_cost(), d[static_cast<std::size_t>(b)].charging_cost() + 1e-6);
  }
}
