#pragma once

// Evaluation indices: year-end SOH, load variance and daily cost, plus the
// linear normalization used to compare strategies side by side.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "v2g/battery.hpp"
#include "v2g/day.hpp"
#include "v2g/env.hpp"
#include "v2g/error.hpp"
#include "v2g/fleet.hpp"
#include "v2g/rng.hpp"

namespace v2g::metrics {

struct EvaluationIndices {
  double soh_year_end = 0.0;  // percent, fleet mean
  double load_variance = 0.0;  // kW^2
  double charging_cost = 0.0;  // $ per day
  double battery_cost = 0.0;   // $ per day
  double total_cost = 0.0;

  static EvaluationIndices make(double soh, double lv, double charging, double battery) {
    return {soh, lv, charging, battery, charging + battery};
  }
};

// Builds the environment for one day from the fleet sampled for that day.
using DayFactory = std::function<env::Environment(std::vector<fleet::EvSession>)>;
using DayRunner = std::function<DayResult(env::Environment&, std::uint64_t)>;

struct YearParams {
  int days = 365;
  double initial_soh = 97.46;
  double initial_efc = 50.0;
  int fleet_size = 509;
  std::uint64_t seed = 0;
  fleet::FleetDistributions dists;
  fleet::EvSpec spec;
  fleet::Horizon horizon;
  battery::CellSpec cell;
  battery::SohModelParams soh;
  battery::DegradationCostParams degradation;
};

struct YearResult {
  std::vector<double> soh_mean;  // per day, after that day
  std::vector<double> soh_min;
  std::vector<battery::BatteryPackState> packs;  // final state per EV slot
  double initial_soh_mean = 0.0;
  double charging_cost_mean = 0.0;  // $ per day
  double battery_cost_per_day = 0.0;
  double load_variance_mean = 0.0;
  DayResult first_day;
};

// Cycles an EV went through during one day, from its stored-energy trace.
inline std::vector<battery::CycleRecord> day_cycles(std::span<const double> energy,
                                                    double capacity_kwh, double slot_hours,
                                                    double cell_capacity_ah) {
  std::vector<double> soc(energy.size());
  for (std::size_t t = 0; t < energy.size(); ++t) soc[t] = energy[t] / capacity_kwh;
  return battery::segment_cycles(soc, slot_hours, cell_capacity_ah);
}

// Runs the strategy for p.days days. The fleet is redrawn each day from a
// per-day seed; the battery of EV slot i carries over from day to day.
inline YearResult simulate_year(const YearParams& p, const DayFactory& make_env,
                                const DayRunner& run) {
  if (p.days < 1) throw ConfigError("year simulation needs at least one day");
  YearResult y;
  const auto n = static_cast<std::size_t>(p.fleet_size);
  y.packs.resize(n);
  for (auto& pk : y.packs) {
    pk.soh = p.initial_soh;
    pk.efc = p.initial_efc;
  }
  y.initial_soh_mean = n ? p.initial_soh : 0.0;
  double charging = 0.0;
  double variance = 0.0;
  for (int day = 0; day < p.days; ++day) {
    const auto day_seed = derive_seed(p.seed, stream::day, static_cast<std::uint64_t>(day));
    auto dists = p.dists;
    dists.initial_soh = p.initial_soh;
    auto sessions = fleet::sample_fleet(p.fleet_size, derive_seed(day_seed, stream::fleet), dists,
                                        p.spec, p.horizon);
    for (std::size_t i = 0; i < n; ++i) {
      auto keep = y.packs[i];
      keep.soc = sessions[i].soc_initial;
      sessions[i].pack = std::move(keep);
    }
    auto e = make_env(sessions);
    auto d = run(e, day_seed);
    charging += d.charging_cost();
    variance += d.load_variance();
    for (std::size_t i = 0; i < n; ++i) {
      auto& pk = y.packs[i];
      const double cap = sessions[i].capacity_kwh();
      const double cell_ah = p.cell.rated_capacity_ah * pk.soh / 100.0;
      for (const auto& c : day_cycles(d.ev_energy[i], cap, d.slot_hours, cell_ah)) {
        pk = battery::apply_cycle(pk, c, p.soh);
        if (pk.cycle_log.size() > 2) pk.cycle_log.erase(pk.cycle_log.begin());
      }
    }
    double mean = 0.0, lo = n ? 100.0 : 0.0;
    for (const auto& pk : y.packs) {
      mean += pk.soh;
      lo = std::min(lo, pk.soh);
    }
    y.soh_mean.push_back(n ? mean / static_cast<double>(n) : 0.0);
    y.soh_min.push_back(lo);
    if (day == 0) y.first_day = std::move(d);
  }
  y.charging_cost_mean = charging / p.days;
  y.load_variance_mean = variance / p.days;
  double battery = 0.0;
  for (const auto& pk : y.packs) {
    const double q = p.spec.capacity_kwh;
    battery += battery::degradation_cost(pk.soh / 100.0, q, p.degradation) -
               battery::degradation_cost(p.initial_soh / 100.0, q, p.degradation);
  }
  y.battery_cost_per_day = battery / p.days;
  return y;
}

// Indices of one strategy: LV and charging cost from its evaluation day,
// SOH and battery cost from its year.
inline EvaluationIndices evaluation_indices(const DayResult& day, const YearResult& year) {
  return EvaluationIndices::make(year.soh_mean.empty() ? 0.0 : year.soh_mean.back(),
                                 day.load_variance(), day.charging_cost(),
                                 year.battery_cost_per_day);
}

// (v - worst) / (best - worst); all ones when every value is the same.
inline std::vector<double> normalize(std::span<const double> values, bool larger_is_better) {
  std::vector<double> out(values.size(), 1.0);
  if (values.empty()) return out;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double best = larger_is_better ? *mx : *mn;
  const double worst = larger_is_better ? *mn : *mx;
  if (best == worst) return out;
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = (values[i] - worst) / (best - worst);
  return out;
}

struct NormalizedIndices {
  std::vector<double> soh, load_variance, cost;
};

inline NormalizedIndices normalize_indices(std::span<const EvaluationIndices> table) {
  std::vector<double> soh, lv, cost;
  for (const auto& t : table) {
    soh.push_back(t.soh_year_end);
    lv.push_back(t.load_variance);
    cost.push_back(t.total_cost);
  }
  return {normalize(soh, true), normalize(lv, false), normalize(cost, false)};
}

}  // namespace v2g::metrics
