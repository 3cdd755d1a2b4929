#pragma once

// EV plug-in sessions: sampling, per-EV reachable-energy tubes and the
// delimited-text fleet table.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "v2g/battery.hpp"
#include "v2g/csv.hpp"
#include "v2g/error.hpp"

namespace v2g::fleet {

// Scheduling horizon: num_slots slots of slot_hours starting at start_hour.
// Energy is indexed at slot boundaries t = 0..num_slots.
struct Horizon {
  int start_hour = 15;
  int num_slots = 20;
  double slot_hours = 1.0;

  void validate() const {
    if (start_hour < 0 || start_hour > 23)
      throw ConfigError("horizon start hour must lie in [0, 23]");
    if (num_slots < 1) throw ConfigError("horizon needs at least one slot");
    if (!(slot_hours > 0.0)) throw ConfigError("slot length must be positive");
  }

  int hour_of_slot(int k) const {
    return static_cast<int>(std::lround(start_hour + k * slot_hours)) % 24;
  }

  // Boundary index at which an event at clock hour `hour` happens, counting
  // forward (wrapping past midnight) from the horizon start.
  int index_of_hour(int hour) const {
    const int elapsed = ((hour - start_hour) % 24 + 24) % 24;
    return static_cast<int>(std::lround(elapsed / slot_hours));
  }
};

struct EvSpec {
  double capacity_kwh = 24.0;
  double p_ch_max = 6.0;    // kW, > 0
  double p_dis_max = -6.0;  // kW, < 0
  double efficiency = 1.0;
  battery::SocWindow soc_window{0.2, 0.9};
  battery::SocWindow departure_band{0.8, 0.9};

  void validate() const {
    if (!(p_dis_max < 0.0 && 0.0 < p_ch_max))
      throw ConfigError("EV power limits must satisfy p_dis_max < 0 < p_ch_max");
    if (!(efficiency > 0.0 && efficiency <= 1.0))
      throw ConfigError("efficiency must lie in (0, 1]");
    if (!(capacity_kwh > 0.0)) throw ConfigError("capacity must be positive");
    soc_window.validate();
    departure_band.validate();
  }
};

struct EvSession {
  int ev_id = 0;
  int arrival_hour = 18;
  int departure_hour = 8;
  double soc_initial = 0.5;
  EvSpec spec;
  battery::BatteryPackState pack;

  // Usable capacity after fade.
  double capacity_kwh() const { return spec.capacity_kwh * pack.soh / 100.0; }
  double initial_energy() const { return soc_initial * capacity_kwh(); }

  int arrival_index(const Horizon& h) const { return h.index_of_hour(arrival_hour); }
  int departure_index(const Horizon& h) const {
    return h.index_of_hour(departure_hour);
  }
};

struct ClippedNormal {
  double mean;
  double stddev;
  double lo;
  double hi;

  template <typename Rng>
  double sample(Rng& rng) const {
    if (stddev <= 0.0) return std::clamp(mean, lo, hi);
    std::normal_distribution<double> dist(mean, stddev);
    return std::clamp(dist(rng), lo, hi);
  }
};

struct FleetDistributions {
  ClippedNormal arrival{18.0, 1.0, 15.0, 21.0};
  ClippedNormal departure{8.0, 1.0, 6.0, 10.0};
  ClippedNormal soc{0.5, 0.1, 0.2, 0.8};
  double initial_soh = 100.0;
  double initial_efc = 50.0;
  int max_resample = 100;
};

struct EnergyBounds {
  double lo = 0.0;
  double hi = 0.0;
};

// Reachable-energy tube of one EV over the horizon, in kWh at boundaries and
// stored-energy kW per slot. Before arrival the energy is pinned at the
// initial value; after departure it is frozen at whatever it was on leaving,
// so the tube keeps the departure-time bounds and the power bounds are zero.
struct EvTube {
  std::vector<double> e_lo, e_hi;  // size K + 1
  std::vector<double> p_lo, p_hi;  // size K
  int arrival = 0;
  int departure = 0;
};

namespace detail {
inline constexpr double kTol = 1e-9;
}

inline EvTube ev_tube(const EvSession& s, const Horizon& h) {
  const int K = h.num_slots;
  const double q = s.capacity_kwh();
  const double e0 = s.initial_energy();
  const double floor_e = s.spec.soc_window.min * q;
  const double ceil_e = s.spec.soc_window.max * q;
  const double band_lo = s.spec.departure_band.min * q;
  const double band_hi = s.spec.departure_band.max * q;
  const double up = s.spec.efficiency * s.spec.p_ch_max * h.slot_hours;
  const double down = s.spec.efficiency * -s.spec.p_dis_max * h.slot_hours;

  EvTube tube;
  tube.arrival = s.arrival_index(h);
  tube.departure = s.departure_index(h);
  const int a = tube.arrival;
  const int d = tube.departure;
  if (!(a < d))
    throw InfeasibleError("EV " + std::to_string(s.ev_id) +
                          ": departure not after arrival within the horizon");
  if (d > K)
    throw InfeasibleError("EV " + std::to_string(s.ev_id) +
                          ": departure beyond the scheduling horizon");
  if (e0 < floor_e - detail::kTol || e0 > ceil_e + detail::kTol)
    throw InfeasibleError("EV " + std::to_string(s.ev_id) +
                          ": initial SOC outside the operating window");

  tube.e_lo.assign(K + 1, e0);
  tube.e_hi.assign(K + 1, e0);
  tube.p_lo.assign(K, 0.0);
  tube.p_hi.assign(K, 0.0);

  for (int t = a; t <= d; ++t) {
    const double fwd_hi = std::min(ceil_e, e0 + up * (t - a));
    const double fwd_lo = std::max(floor_e, e0 - down * (t - a));
    const double bwd_hi = band_hi + down * (d - t);
    const double bwd_lo = band_lo - up * (d - t);
    double hi = std::min(fwd_hi, bwd_hi);
    double lo = std::max(fwd_lo, bwd_lo);
    if (lo > hi + detail::kTol)
      throw InfeasibleError("EV " + std::to_string(s.ev_id) +
                            ": departure band unreachable");
    tube.e_lo[t] = std::min(lo, hi);
    tube.e_hi[t] = hi;
  }
  tube.e_lo[a] = tube.e_hi[a] = e0;
  for (int t = d + 1; t <= K; ++t) {
    tube.e_lo[t] = tube.e_lo[d];
    tube.e_hi[t] = tube.e_hi[d];
  }
  for (int k = a; k < d; ++k) {
    tube.p_lo[k] = -down / h.slot_hours;
    tube.p_hi[k] = up / h.slot_hours;
  }
  return tube;
}

// Energy bounds of one EV at boundary t.
inline EnergyBounds per_ev_energy_bounds(const EvSession& s, const Horizon& h,
                                         int t) {
  if (t < 0 || t > h.num_slots) throw DomainError("slot outside the horizon");
  auto tube = ev_tube(s, h);
  return {tube.e_lo[t], tube.e_hi[t]};
}

inline bool session_feasible(const EvSession& s, const Horizon& h) {
  try {
    (void)ev_tube(s, h);
    return true;
  } catch (const InfeasibleError&) {
    return false;
  }
}

// Draws n sessions. Infeasible draws are resampled.
inline std::vector<EvSession> sample_fleet(int n, std::uint64_t seed,
                                           const FleetDistributions& dists,
                                           const EvSpec& spec,
                                           const Horizon& horizon) {
  if (n < 0) throw DomainError("fleet size must be non-negative");
  spec.validate();
  std::mt19937_64 rng(seed);
  std::vector<EvSession> fleet;
  fleet.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    EvSession s;
    bool ok = false;
    for (int attempt = 0; attempt < std::max(1, dists.max_resample); ++attempt) {
      s.ev_id = i;
      s.arrival_hour = static_cast<int>(std::lround(dists.arrival.sample(rng)));
      s.departure_hour =
          static_cast<int>(std::lround(dists.departure.sample(rng)));
      s.soc_initial = dists.soc.sample(rng);
      s.spec = spec;
      s.pack.soh = dists.initial_soh;
      s.pack.efc = dists.initial_efc;
      s.pack.soc = s.soc_initial;
      if (session_feasible(s, horizon)) {
        ok = true;
        break;
      }
    }
    if (!ok)
      throw InfeasibleError("could not draw a feasible session for EV " +
                            std::to_string(i));
    fleet.push_back(std::move(s));
  }
  return fleet;
}

inline void write_fleet(const std::vector<EvSession>& fleet,
                        const std::filesystem::path& path) {
  csv::Writer w({"id", "arrival", "departure", "soc", "capacity_kwh",
                 "p_ch_max_kw", "p_dis_max_kw", "soh"});
  for (const auto& s : fleet)
    w.add(s.ev_id, s.arrival_hour, s.departure_hour, s.soc_initial,
          s.spec.capacity_kwh, s.spec.p_ch_max, s.spec.p_dis_max, s.pack.soh);
  w.save(path);
}

// Reads a fleet table. Columns not in the file fall back to `base`.
inline std::vector<EvSession> read_fleet(const std::filesystem::path& path,
                                         const EvSpec& base,
                                         const FleetDistributions& dists = {}) {
  auto t = csv::read(path);
  const auto c_id = t.column("id");
  const auto c_arr = t.column("arrival");
  const auto c_dep = t.column("departure");
  const auto c_soc = t.column("soc");
  auto optional_col = [&](const char* name) -> long {
    for (std::size_t i = 0; i < t.header.size(); ++i)
      if (t.header[i] == name) return static_cast<long>(i);
    return -1;
  };
  const long c_cap = optional_col("capacity_kwh");
  const long c_pch = optional_col("p_ch_max_kw");
  const long c_pdis = optional_col("p_dis_max_kw");
  const long c_soh = optional_col("soh");
  const std::string ctx = path.string();

  std::vector<EvSession> fleet;
  for (const auto& row : t.rows) {
    EvSession s;
    s.ev_id = static_cast<int>(csv::to_int(row[c_id], ctx));
    s.arrival_hour = static_cast<int>(csv::to_int(row[c_arr], ctx));
    s.departure_hour = static_cast<int>(csv::to_int(row[c_dep], ctx));
    s.soc_initial = csv::to_double(row[c_soc], ctx);
    s.spec = base;
    if (c_cap >= 0) s.spec.capacity_kwh = csv::to_double(row[c_cap], ctx);
    if (c_pch >= 0) s.spec.p_ch_max = csv::to_double(row[c_pch], ctx);
    if (c_pdis >= 0) s.spec.p_dis_max = csv::to_double(row[c_pdis], ctx);
    s.spec.validate();
    s.pack.soh = c_soh >= 0 ? csv::to_double(row[c_soh], ctx) : dists.initial_soh;
    s.pack.efc = dists.initial_efc;
    s.pack.soc = s.soc_initial;
    fleet.push_back(std::move(s));
  }
  return fleet;
}

}  // namespace v2g::fleet
