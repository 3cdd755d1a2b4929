#pragma once

// One simulated day under an arbitrary EVA power policy, with everything the
// metrics and reports need recorded along the way.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <filesystem>
#include <functional>
#include <vector>

#include "v2g/csv.hpp"
#include "v2g/env.hpp"

namespace v2g {

struct DayResult {
  int num_slots = 0;
  double slot_hours = 1.0;
  std::vector<int> hour;
  std::vector<double> tariff;
  std::vector<double> requested;  // kW
  std::vector<double> eva_power;  // applied, kW
  std::vector<double> grid_load;  // kW
  std::vector<double> energy;     // K + 1, kWh
  std::vector<env::RewardParts> rewards;
  std::vector<double> load_window;  // trailing window at the end of the day
  std::vector<std::vector<double>> ev_energy;  // N x (K + 1)
  std::vector<std::vector<double>> ev_power;   // N x K, grid side
  std::vector<std::vector<double>> ev_sop_ch;  // N x K, kW (0 when unplugged)
  std::vector<std::vector<double>> ev_sop_dis;
  std::vector<double> ev_capacity;
  int projected = 0;
  int conflicts = 0;

  double total_reward() const {
    double r = 0.0;
    for (const auto& p : rewards) r += p.r;
    return r;
  }
  double charging_cost() const {
    double c = 0.0;
    for (int k = 0; k < num_slots; ++k) c += tariff[k] * eva_power[k] * slot_hours;
    return c;
  }
  double load_variance() const { return env::rolling_stats(load_window).variance; }
  double max_grid_load() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double g : grid_load) m = std::max(m, g);
    return m;
  }
};

using PowerPolicy = std::function<double(const env::Environment&, const env::EnvState&)>;

inline DayResult run_day(env::Environment& e, std::uint64_t day_seed, const PowerPolicy& policy) {
  const int K = e.config().horizon.num_slots;
  const std::size_t N = e.fleet().size();
  DayResult d;
  d.num_slots = K;
  d.slot_hours = e.config().horizon.slot_hours;
  d.ev_energy.assign(N, std::vector<double>(K + 1, 0.0));
  d.ev_power.assign(N, std::vector<double>(K, 0.0));
  d.ev_sop_ch.assign(N, std::vector<double>(K, 0.0));
  d.ev_sop_dis.assign(N, std::vector<double>(K, 0.0));
  for (const auto& s : e.fleet()) d.ev_capacity.push_back(s.capacity_kwh());

  e.set_recording(true);
  auto state = e.reset(day_seed);
  d.energy.push_back(e.energy());
  for (std::size_t i = 0; i < N; ++i) d.ev_energy[i][0] = e.ev_energies()[i];
  while (!e.done()) {
    const int k = e.slot();
    for (std::size_t i = 0; i < N; ++i) {
      const auto& tube = e.envelope().per_ev[i];
      if (k < tube.arrival || k >= tube.departure) continue;
      const auto sop = e.ev_peak_power(i);
      d.ev_sop_ch[i][k] = std::min(e.fleet()[i].spec.p_ch_max, sop.charge);
      d.ev_sop_dis[i][k] = std::max(e.fleet()[i].spec.p_dis_max, -sop.discharge);
    }
    const double action = policy(e, state);
    const auto out = e.step(action);
    d.hour.push_back(e.config().horizon.hour_of_slot(k));
    d.tariff.push_back(e.records().back().tariff);
    d.requested.push_back(action);
    d.eva_power.push_back(out.applied_power);
    d.grid_load.push_back(out.grid_load);
    d.energy.push_back(e.energy());
    d.rewards.push_back(out.reward);
    d.projected += out.projected;
    d.conflicts += out.grid_conflict;
    const auto& rec = e.records().back();
    for (std::size_t j = 0; j < rec.ev_index.size(); ++j)
      d.ev_power[rec.ev_index[j]][k] = rec.proposal.final_powers[j];
    for (std::size_t i = 0; i < N; ++i) d.ev_energy[i][k + 1] = e.ev_energies()[i];
    state = out.next_state;
  }
  d.load_window = e.load_window();
  return d;
}

inline void write_schedule(const DayResult& d, const std::filesystem::path& path) {
  csv::Writer w({"slot", "hour", "requested_kw", "eva_kw", "grid_kw", "energy_kwh", "tariff"});
  for (int k = 0; k < d.num_slots; ++k)
    w.add(k, d.hour[k], d.requested[k], d.eva_power[k], d.grid_load[k], d.energy[k + 1],
          d.tariff[k]);
  w.save(path);
}

inline std::vector<double> read_schedule(const std::filesystem::path& path) {
  auto t = csv::read(path);
  const auto c = t.column("eva_kw");
  std::vector<double> p;
  for (const auto& r : t.rows) p.push_back(csv::to_double(r[c], path.string()));
  return p;
}

}  // namespace v2g
