#pragma once

// Strategy comparison runs and the report bundle written from them.

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "v2g/baselines.hpp"
#include "v2g/config.hpp"
#include "v2g/csv.hpp"
#include "v2g/day.hpp"
#include "v2g/metrics.hpp"
#include "v2g/ppo.hpp"

namespace v2g::report {

struct StrategyRun {
  std::string name;
  DayResult day;
  metrics::YearResult year;
  metrics::EvaluationIndices indices;
};

inline std::uint64_t evaluation_day_seed(const RunConfig& c) {
  return derive_seed(c.seed, stream::scenario);
}

inline PowerPolicy policy_action(const ppo::Policy& p) {
  return [&p](const env::Environment& e, const env::EnvState& s) {
    const double raw = ppo::actor_forward(p.actor, p.obs.apply(s));
    return ppo::scale_action(raw, e.admissible_bounds());
  };
}

inline metrics::DayRunner policy_runner(const ppo::Policy& p) {
  return [&p](env::Environment& e, std::uint64_t seed) { return run_day(e, seed, policy_action(p)); };
}

inline metrics::DayRunner baseline_runner(baselines::Baseline b) {
  return [b](env::Environment& e, std::uint64_t seed) { return baselines::run_baseline(b, e, seed); };
}

inline metrics::YearParams year_params(const RunConfig& c) {
  metrics::YearParams y;
  y.days = c.year_days;
  y.initial_soh = c.year_initial_soh;
  y.initial_efc = c.dists.initial_efc;
  y.fleet_size = c.fleet_size;
  y.seed = c.seed;
  y.dists = c.dists;
  y.spec = c.ev;
  y.horizon = c.env.horizon;
  y.cell = c.cell;
  y.soh = c.soh;
  y.degradation = c.degradation;
  return y;
}

inline metrics::YearResult run_year(const RunConfig& c, const metrics::DayRunner& run) {
  const auto profiles = scenario_profiles(c);
  return metrics::simulate_year(
      year_params(c),
      [&](std::vector<fleet::EvSession> f) { return make_environment(c, std::move(f), profiles); },
      run);
}

// Evaluation day plus year for the trained policy (when given) and BL1-BL4.
inline std::vector<StrategyRun> run_strategies(const RunConfig& c,
                                               const std::optional<ppo::Policy>& policy) {
  std::vector<std::pair<std::string, metrics::DayRunner>> todo;
  if (policy) todo.emplace_back("mhvcs", policy_runner(*policy));
  for (auto b : {baselines::Baseline::bl1, baselines::Baseline::bl2, baselines::Baseline::bl3,
                 baselines::Baseline::bl4})
    todo.emplace_back(baselines::name(b), baseline_runner(b));

  const auto base = make_environment(c);
  std::vector<StrategyRun> runs(todo.size());
  std::vector<std::exception_ptr> errors(todo.size());
  auto work = [&](std::size_t i) {
    try {
      auto e = base;
      runs[i].name = todo[i].first;
      runs[i].day = todo[i].second(e, evaluation_day_seed(c));
      runs[i].year = run_year(c, todo[i].second);
      runs[i].indices = metrics::evaluation_indices(runs[i].day, runs[i].year);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, c.workers));
  for (std::size_t start = 0; start < todo.size(); start += workers) {
    std::vector<std::thread> pool;
    for (std::size_t i = start; i < std::min(todo.size(), start + workers); ++i) {
      if (workers == 1)
        work(i);
      else
        pool.emplace_back(work, i);
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return runs;
}

namespace detail {

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline int departures_in_band(const DayResult& d, const env::Environment& e) {
  int in = 0;
  for (std::size_t i = 0; i < e.fleet().size(); ++i) {
    const auto& s = e.fleet()[i];
    const int dep = e.envelope().per_ev[i].departure;
    const double soc = d.ev_energy[i][static_cast<std::size_t>(dep)] / s.capacity_kwh();
    in += soc >= s.spec.departure_band.min - 1e-9 && soc <= s.spec.departure_band.max + 1e-9;
  }
  return in;
}

}  // namespace detail

inline std::vector<std::string> artifact_names() {
  return {"load.csv",    "soh_year.csv", "soc_dist.csv", "power_sop.csv",
          "indices.csv", "costs.csv",    "summary.json"};
}

// Writes the report bundle into dir. The first run is the one whose per-EV
// power and SOP series are exported.
inline void emit_reports(const std::filesystem::path& dir, const RunConfig& c,
                         const std::vector<StrategyRun>& runs) {
  std::filesystem::create_directories(dir);
  const auto base = make_environment(c);
  const auto& prof = base.profiles();
  const auto& h = c.env.horizon;
  const int K = h.num_slots;

  {
    std::vector<std::string> header{"slot", "hour", "baseload_kw", "pv_kw", "wind_kw", "net_kw"};
    for (const auto& r : runs) header.push_back(r.name + "_kw");
    csv::Writer w(header);
    for (int k = 0; k < K; ++k) {
      const int hour = h.hour_of_slot(k);
      const auto hr = static_cast<std::size_t>(hour) % prof.size();
      std::vector<std::string> row{csv::num(k), csv::num(hour), csv::num(prof.baseload_kw[hr]),
                                   csv::num(prof.pv_kw[hr]), csv::num(prof.wind_kw[hr]),
                                   csv::num(prof.net_of_renewables(hour))};
      for (const auto& r : runs) row.push_back(csv::num(r.day.grid_load[k]));
      w.row(row);
    }
    w.save(dir / "load.csv");
  }
  {
    std::vector<std::string> header{"day"};
    for (const auto& r : runs) header.push_back(r.name + "_soh");
    csv::Writer w(header);
    std::vector<std::string> row0{"0"};
    for (const auto& r : runs) row0.push_back(csv::num(r.year.initial_soh_mean));
    w.row(row0);
    const std::size_t days = runs.empty() ? 0 : runs.front().year.soh_mean.size();
    for (std::size_t d = 0; d < days; ++d) {
      std::vector<std::string> row{csv::num(d + 1)};
      for (const auto& r : runs) row.push_back(csv::num(r.year.soh_mean[d]));
      w.row(row);
    }
    w.save(dir / "soh_year.csv");
  }
  {
    csv::Writer w({"strategy", "t", "connected", "min", "q25", "median", "q75", "max", "mean"});
    for (const auto& r : runs) {
      for (int t = 0; t <= K; ++t) {
        std::vector<double> socs;
        for (std::size_t i = 0; i < base.fleet().size(); ++i) {
          const auto& tube = base.envelope().per_ev[i];
          if (t < tube.arrival || t > tube.departure) continue;
          socs.push_back(r.day.ev_energy[i][static_cast<std::size_t>(t)] / r.day.ev_capacity[i]);
        }
        double mean = 0.0;
        for (double s : socs) mean += s;
        if (!socs.empty()) mean /= static_cast<double>(socs.size());
        w.add(r.name, t, socs.size(), detail::quantile(socs, 0.0), detail::quantile(socs, 0.25),
              detail::quantile(socs, 0.5), detail::quantile(socs, 0.75),
              detail::quantile(socs, 1.0), mean);
      }
    }
    w.save(dir / "soc_dist.csv");
  }
  {
    csv::Writer w({"strategy", "ev_id", "slot", "hour", "power_kw", "sop_ch_kw", "sop_dis_kw",
                   "soc_after"});
    if (!runs.empty()) {
      const auto& r = runs.front();
      for (std::size_t i = 0; i < base.fleet().size(); ++i)
        for (int k = 0; k < K; ++k)
          w.add(r.name, base.fleet()[i].ev_id, k, h.hour_of_slot(k), r.day.ev_power[i][k],
                r.day.ev_sop_ch[i][k], r.day.ev_sop_dis[i][k],
                r.day.ev_energy[i][static_cast<std::size_t>(k + 1)] / r.day.ev_capacity[i]);
    }
    w.save(dir / "power_sop.csv");
  }
  std::vector<metrics::EvaluationIndices> table;
  for (const auto& r : runs) table.push_back(r.indices);
  const auto norm = metrics::normalize_indices(table);
  {
    csv::Writer w({"strategy", "soh_year_end", "load_variance", "charging_cost", "battery_cost",
                   "total_cost", "soh_norm", "lv_norm", "cost_norm"});
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& x = runs[i].indices;
      w.add(runs[i].name, x.soh_year_end, x.load_variance, x.charging_cost, x.battery_cost,
            x.total_cost, norm.soh[i], norm.load_variance[i], norm.cost[i]);
    }
    w.save(dir / "indices.csv");
  }
  {
    csv::Writer w({"strategy", "charging_cost", "battery_cost", "total_cost"});
    for (const auto& r : runs)
      w.add(r.name, r.indices.charging_cost, r.indices.battery_cost, r.indices.total_cost);
    w.save(dir / "costs.csv");
  }
  {
    json s;
    s["seed"] = c.seed;
    s["fleet_size"] = base.fleet().size();
    s["num_slots"] = K;
    s["transformer_limit_kw"] = c.env.transformer_limit_kw();
    s["year_days"] = c.year_days;
    s["strategies"] = json::array();
    for (const auto& r : runs) {
      s["strategies"].push_back({{"name", r.name},
                                 {"soh_year_end", r.indices.soh_year_end},
                                 {"load_variance", r.indices.load_variance},
                                 {"charging_cost", r.indices.charging_cost},
                                 {"battery_cost", r.indices.battery_cost},
                                 {"total_cost", r.indices.total_cost},
                                 {"reward", r.day.total_reward()},
                                 {"max_grid_load_kw", r.day.max_grid_load()},
                                 {"projected_slots", r.day.projected},
                                 {"grid_conflicts", r.day.conflicts},
                                 {"departures_in_band", detail::departures_in_band(r.day, base)}});
    }
    csv::write_text(dir / "summary.json", s.dump(2) + "\n");
  }
}

}  // namespace v2g::report
