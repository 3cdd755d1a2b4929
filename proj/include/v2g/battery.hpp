#pragma once

// Battery conditioning models: cycle-driven capacity fade (SOH),
// equivalent-full-cycle accounting, state-of-power current/power limits and
// the replacement-cost view of degradation.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "v2g/error.hpp"

namespace v2g::battery {

struct SocWindow {
  double min = 0.2;
  double max = 0.9;

  void validate() const {
    if (!(min >= 0.0 && min < max && max <= 1.0))
      throw ConfigError("SOC window must satisfy 0 <= min < max <= 1");
  }
};

struct OcvPoint {
  double soc;
  double volts;
};

// Per-cell electrical parameters. Currents are per cell (amperes).
struct CellSpec {
  double nominal_voltage = 3.3;
  double rated_capacity_ah = 2.3;
  double r0 = 0.01;
  // Piecewise-linear open-circuit voltage, strictly increasing in SOC.
  std::vector<OcvPoint> ocv = {
      {0.0, 2.90}, {0.1, 3.15}, {0.2, 3.22}, {0.3, 3.26},
      {0.4, 3.28}, {0.5, 3.29}, {0.6, 3.30}, {0.7, 3.32},
      {0.8, 3.34}, {0.9, 3.38}, {1.0, 3.45}};
  double u_t_min = 2.5;
  double u_t_max = 3.65;
  double i_design_ch = 2.3;   // 1C
  double i_design_dis = 6.9;  // 3C

  void validate() const {
    if (ocv.size() < 2) throw ConfigError("OCV table needs at least 2 knots");
    if (ocv.front().soc != 0.0 || ocv.back().soc != 1.0)
      throw ConfigError("OCV table must span SOC 0..1");
    for (std::size_t i = 1; i < ocv.size(); ++i) {
      if (!(ocv[i].soc > ocv[i - 1].soc))
        throw ConfigError("OCV table SOC knots must be strictly increasing");
      if (!(ocv[i].volts > ocv[i - 1].volts))
        throw ConfigError("OCV curve must be strictly increasing in SOC");
    }
    if (!(u_t_min < nominal_voltage && nominal_voltage < u_t_max))
      throw ConfigError("terminal voltage bounds must bracket nominal voltage");
    if (!(r0 > 0.0)) throw ConfigError("R0 must be positive");
    if (!(rated_capacity_ah > 0.0 && i_design_ch > 0.0 && i_design_dis > 0.0))
      throw ConfigError("capacity and design currents must be positive");
  }

  double ocv_at(double soc) const {
    soc = std::clamp(soc, 0.0, 1.0);
    auto seg = segment(soc);
    const auto& a = ocv[seg];
    const auto& b = ocv[seg + 1];
    return a.volts + (b.volts - a.volts) * (soc - a.soc) / (b.soc - a.soc);
  }

  // Slope dU_oc/dSOC of the segment containing soc (right-hand segment at
  // interior knots, last segment at SOC = 1).
  double ocv_slope(double soc) const {
    soc = std::clamp(soc, 0.0, 1.0);
    auto seg = segment(soc);
    const auto& a = ocv[seg];
    const auto& b = ocv[seg + 1];
    return (b.volts - a.volts) / (b.soc - a.soc);
  }

 private:
  std::size_t segment(double soc) const {
    auto it = std::upper_bound(
        ocv.begin(), ocv.end(), soc,
        [](double s, const OcvPoint& p) { return s < p.soc; });
    auto idx = static_cast<std::size_t>(std::distance(ocv.begin(), it));
    if (idx == 0) return 0;
    return std::min(idx - 1, ocv.size() - 2);
  }
};

struct PackTopology {
  int cells_in_series = 39;
  int parallel_branches = 4;

  void validate() const {
    if (cells_in_series < 1 || parallel_branches < 1)
      throw ConfigError("pack topology counts must be >= 1");
  }

  // Nominal module energy in kWh.
  double nominal_energy_kwh(const CellSpec& cell) const {
    return cells_in_series * parallel_branches * cell.nominal_voltage *
           cell.rated_capacity_ah / 1000.0;
  }
};

struct SohModelParams {
  double cycle_constant = 3000.0;        // H
  double dod_exponent = 0.5;             // kappa
  double discharge_current_exponent = 0.2;
  double charge_current_exponent = 0.2;
  double efc_constant = 1500.0;          // M1

  void validate() const {
    if (!(cycle_constant > 0.0)) throw ConfigError("H must be positive");
    if (!(efc_constant > 0.0)) throw ConfigError("M1 must be positive");
    if (!std::isfinite(dod_exponent) ||
        !std::isfinite(discharge_current_exponent) ||
        !std::isfinite(charge_current_exponent))
      throw ConfigError("SOH exponents must be finite");
  }
};

// One segmented charge/discharge excursion.
struct CycleRecord {
  double soc_ave = 0.0;
  double delta_soc = 0.0;
  double dod = 0.0;        // percent
  double i_dis_ave = 0.0;  // A per cell
  double i_ch_ave = 0.0;   // A per cell
};

struct BatteryPackState {
  double soc = 0.5;
  double soh = 100.0;         // percent
  double efc = 0.0;           // equivalent full cycles
  double aging_factor = 0.0;  // set on the first recorded cycle
  std::vector<CycleRecord> cycle_log;
};

struct DegradationCostParams {
  double unit_battery_cost = 300.0;  // $/kWh
  double labor_cost = 240.0;         // $
  double soh_min = 0.80;             // fraction

  void validate() const {
    if (!(soh_min > 0.0 && soh_min < 1.0))
      throw ConfigError("soh_min must lie in (0, 1)");
    if (unit_battery_cost < 0.0 || labor_cost < 0.0)
      throw ConfigError("degradation costs must be non-negative");
  }
};

// Capacity fade under partial cycling; returns SOH in percent.
inline double soh_capacity_fade(double soc_ave, double delta_soc, double efc) {
  if (!(soc_ave >= 0.0 && soc_ave <= 1.0))
    throw DomainError("soc_ave must lie in [0, 1]");
  if (!(delta_soc >= 0.0 && delta_soc <= 1.0))
    throw DomainError("delta_soc must lie in [0, 1]");
  if (!(efc >= 0.0)) throw DomainError("equivalent full cycles must be >= 0");
  const double shape =
      1.0 + 3.25 * delta_soc - 2.25 * delta_soc * delta_soc;
  return 100.0 - 3.25 * soc_ave * shape * std::pow(efc / 100.0, 0.453);
}

// Cycle life at a given depth of discharge (percent) and average half-cycle
// currents (A per cell).
inline double max_cycle_number(double dod, double i_dis_ave, double i_ch_ave,
                               const SohModelParams& p) {
  if (!(dod > 0.0 && dod <= 100.0))
    throw DomainError("DOD must lie in (0, 100]");
  if (!(i_dis_ave > 0.0 && i_ch_ave > 0.0))
    throw DomainError("average currents must be positive");
  return p.cycle_constant * std::pow(dod / 100.0, -p.dod_exponent) *
         std::pow(i_dis_ave, -p.discharge_current_exponent) *
         std::pow(i_ch_ave, -p.charge_current_exponent);
}

inline double max_cycle_number(const CycleRecord& c, const SohModelParams& p) {
  return max_cycle_number(c.dod, c.i_dis_ave, c.i_ch_ave, p);
}

// Advances the equivalent-full-cycle counter by one completed cycle.
//
// The aging factor starts at 1/M of the first cycle. The three-point DOD
// correction needs cycles m-2 and m-1 in the log; with less history the
// factor is held. A zero-depth middle cycle skips the correction. The factor
// is floored at zero so the counter never runs backwards.
inline BatteryPackState update_cycle_count(BatteryPackState state,
                                           const CycleRecord& cycle,
                                           const SohModelParams& params) {
  auto& log = state.cycle_log;
  if (log.empty()) state.aging_factor = 1.0 / max_cycle_number(cycle, params);

  state.efc += state.aging_factor * params.efc_constant;

  if (log.size() >= 2) {
    const auto& prev2 = log[log.size() - 2];
    const auto& prev1 = log[log.size() - 1];
    if (prev1.dod > 0.0) {
      const double correction =
          2.0 - (prev2.dod + cycle.dod) / prev1.dod;
      state.aging_factor +=
          0.5 / max_cycle_number(prev1, params) * correction;
      state.aging_factor = std::max(0.0, state.aging_factor);
    }
  }
  log.push_back(cycle);
  return state;
}

// Records a cycle and applies the resulting capacity fade. The fade is the
// increment of the closed-form loss between the old and new cycle counts,
// evaluated at the cycle's own SOC statistics.
inline BatteryPackState apply_cycle(const BatteryPackState& state,
                                    const CycleRecord& cycle,
                                    const SohModelParams& params) {
  auto next = update_cycle_count(state, cycle, params);
  const double before =
      100.0 - soh_capacity_fade(cycle.soc_ave, cycle.delta_soc, state.efc);
  const double after =
      100.0 - soh_capacity_fade(cycle.soc_ave, cycle.delta_soc, next.efc);
  next.soh = state.soh - std::max(0.0, after - before);
  return next;
}

struct CurrentLimits {
  double charge = 0.0;
  double discharge = 0.0;
};

inline CurrentLimits soc_limited_current(double soc, const SocWindow& window,
                                         double capacity_ah,
                                         double horizon_h) {
  if (!(horizon_h > 0.0)) throw DomainError("horizon must be positive");
  if (!(capacity_ah > 0.0)) throw DomainError("capacity must be positive");
  if (soc < window.min - 1e-12 || soc > window.max + 1e-12)
    throw DomainError("SOC outside its operating window");
  return {std::max(0.0, capacity_ah * (window.max - soc) / horizon_h),
          std::max(0.0, capacity_ah * (soc - window.min) / horizon_h)};
}

inline CurrentLimits voltage_limited_current(double soc, const CellSpec& spec,
                                             double capacity_ah,
                                             double horizon_h) {
  if (!(horizon_h > 0.0)) throw DomainError("horizon must be positive");
  if (!(capacity_ah > 0.0)) throw DomainError("capacity must be positive");
  const double denom =
      spec.r0 + horizon_h / capacity_ah * spec.ocv_slope(soc);
  if (!(denom > 0.0))
    throw ModelError("non-positive denominator in voltage-limited current");
  const double u_oc = spec.ocv_at(soc);
  return {std::max(0.0, spec.u_t_max - u_oc) / denom,
          std::max(0.0, u_oc - spec.u_t_min) / denom};
}

inline CurrentLimits design_current(const CellSpec& spec) {
  return {spec.i_design_ch, spec.i_design_dis};
}

// Loaded terminal voltage while carrying current i (A per cell).
inline double terminal_voltage_charge(double soc, double i,
                                      const CellSpec& spec) {
  return spec.ocv_at(soc) + i * spec.r0;
}
inline double terminal_voltage_discharge(double soc, double i,
                                         const CellSpec& spec) {
  return spec.ocv_at(soc) - i * spec.r0;
}

struct PeakPower {
  double p_ch_kw = 0.0;
  double p_dis_kw = 0.0;
  CurrentLimits by_soc;
  CurrentLimits by_voltage;
  CurrentLimits by_design;
  CurrentLimits limit;  // elementwise min of the three
};

// Continuous peak power of a pack over horizon_h. Cell capacity is scaled by
// the pack's current SOH.
inline PeakPower peak_power(double soc, const CellSpec& spec,
                            const PackTopology& topology,
                            const BatteryPackState& state, double horizon_h,
                            const SocWindow& window = {}) {
  const double q = spec.rated_capacity_ah * state.soh / 100.0;
  PeakPower out;
  out.by_soc = soc_limited_current(soc, window, q, horizon_h);
  out.by_voltage = voltage_limited_current(soc, spec, q, horizon_h);
  out.by_design = design_current(spec);
  out.limit.charge = std::min(
      {out.by_soc.charge, out.by_voltage.charge, out.by_design.charge});
  out.limit.discharge = std::min({out.by_soc.discharge,
                                  out.by_voltage.discharge,
                                  out.by_design.discharge});
  const double cells = topology.cells_in_series * topology.parallel_branches;
  out.p_ch_kw = terminal_voltage_charge(soc, out.limit.charge, spec) *
                out.limit.charge * cells / 1000.0;
  out.p_dis_kw =
      std::max(0.0, terminal_voltage_discharge(soc, out.limit.discharge, spec)) *
      out.limit.discharge * cells / 1000.0;
  return out;
}

// Replacement-cost view of lost capacity. soh is a fraction.
inline double degradation_cost(double soh, double capacity_kwh,
                               const DegradationCostParams& p) {
  if (!(soh > 0.0 && soh <= 1.0)) throw DomainError("SOH fraction out of range");
  if (!(capacity_kwh > 0.0)) throw DomainError("capacity must be positive");
  p.validate();
  return (p.unit_battery_cost + p.labor_cost / (1.0 - p.soh_min)) *
         (1.0 - soh) * capacity_kwh;
}

// Splits a sampled SOC trace into cycles. A cycle pairs two consecutive
// opposite-direction excursions; a trailing unpaired excursion counts as a
// cycle on its own. Excursions shallower than min_excursion are ignored.
// Currents are per cell, from the SOC slope and the cell capacity.
inline std::vector<CycleRecord> segment_cycles(std::span<const double> soc,
                                               double slot_hours,
                                               double cell_capacity_ah,
                                               double min_excursion = 1e-3) {
  struct Half {
    double from, to, hours;
  };
  std::vector<Half> halves;
  for (std::size_t i = 1; i < soc.size(); ++i) {
    const double d = soc[i] - soc[i - 1];
    if (std::abs(d) < 1e-12) continue;
    if (!halves.empty()) {
      auto& h = halves.back();
      if ((h.to - h.from > 0) == (d > 0)) {
        h.to = soc[i];
        h.hours += slot_hours;
        continue;
      }
    }
    halves.push_back({soc[i - 1], soc[i], slot_hours});
  }
  // drop shallow excursions, then merge neighbours that now share direction
  std::vector<Half> kept;
  for (const auto& h : halves) {
    if (std::abs(h.to - h.from) < min_excursion) continue;
    if (!kept.empty() && (kept.back().to - kept.back().from > 0) ==
                             (h.to - h.from > 0)) {
      kept.back().to += h.to - h.from;
      kept.back().hours += h.hours;
    } else {
      kept.push_back(h);
    }
  }

  auto current = [&](const Half& h) {
    return std::abs(h.to - h.from) * cell_capacity_ah / h.hours;
  };

  std::vector<CycleRecord> cycles;
  for (std::size_t i = 0; i < kept.size(); i += 2) {
    const Half* a = &kept[i];
    const Half* b = i + 1 < kept.size() ? &kept[i + 1] : nullptr;
    double lo = std::min(a->from, a->to);
    double hi = std::max(a->from, a->to);
    if (b) {
      lo = std::min({lo, b->from, b->to});
      hi = std::max({hi, b->from, b->to});
    }
    const Half* dis = (a->to < a->from) ? a : (b && b->to < b->from ? b : nullptr);
    const Half* ch = (a->to > a->from) ? a : (b && b->to > b->from ? b : nullptr);
    CycleRecord r;
    r.soc_ave = 0.5 * (hi + lo);
    r.delta_soc = hi - lo;
    r.dod = 100.0 * (dis ? std::abs(dis->to - dis->from) : std::abs(ch->to - ch->from));
    r.i_dis_ave = dis ? current(*dis) : current(*ch);
    r.i_ch_ave = ch ? current(*ch) : current(*dis);
    cycles.push_back(r);
  }
  return cycles;
}

}  // namespace v2g::battery
