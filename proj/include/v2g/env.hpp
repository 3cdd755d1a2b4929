#pragma once

// The microgrid decision process. One episode spans the scheduling horizon;
// each step takes an EVA power request, projects it onto what the fleet, the
// tie line and the transformer admit, disaggregates it over the connected
// EVs and scores the result.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "v2g/allocation.hpp"
#include "v2g/battery.hpp"
#include "v2g/envelope.hpp"
#include "v2g/error.hpp"
#include "v2g/fleet.hpp"
#include "v2g/profiles.hpp"

namespace v2g::env {

inline constexpr int kHistory = 24;
inline constexpr int kStateDim = kHistory + 4;

struct EnvConfig {
  double transformer_kva = 4000.0;
  double power_factor = 0.8;
  double grid_min_kw = 0.0;
  fleet::Horizon horizon;
  bool sop_limits = true;  // cap per-EV power by the pack's peak power

  double transformer_limit_kw() const { return transformer_kva * power_factor; }

  void validate() const {
    horizon.validate();
    if (!(transformer_kva > 0.0)) throw ConfigError("transformer capacity must be positive");
    if (!(power_factor > 0.0 && power_factor <= 1.0))
      throw ConfigError("power factor must lie in (0, 1]");
    if (!(grid_min_kw < transformer_limit_kw()))
      throw ConfigError("tie-line minimum must be below the transformer limit");
  }
};

enum class SignMode { paper_literal, corrected };

struct RewardWeights {
  double alpha = 10.0;
  double beta = -5.0;
  double psi = 1.0;
  double chi = 10.0;
  double upsilon = 5.0;
  double rho = 1.0;
  double denom_floor = 1.0;
  SignMode sign_mode = SignMode::corrected;

  void validate() const {
    if (!(denom_floor > 0.0)) throw ConfigError("reward denominator floor must be positive");
  }
};

struct LoadStats {
  double p_max = 0.0;
  double p_min = 0.0;
  double variance = 0.0;
  double mean = 0.0;
};

// Max, min, population variance and mean of a load window.
inline LoadStats rolling_stats(std::span<const double> window) {
  if (window.empty()) throw DomainError("load window is empty");
  LoadStats s;
  s.p_max = *std::max_element(window.begin(), window.end());
  s.p_min = *std::min_element(window.begin(), window.end());
  const double n = static_cast<double>(window.size());
  s.mean = std::accumulate(window.begin(), window.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : window) ss += (v - s.mean) * (v - s.mean);
  s.variance = ss / n;
  return s;
}

// Transformer-side load and renewable-netted load for one clock hour.
inline double power_load(const GridProfiles& g, int hour, double eva_power) {
  return g.net_of_renewables(hour) + eva_power;
}
inline double net_load(const GridProfiles& g, int hour, double eva_power) {
  const auto h = static_cast<std::size_t>(hour) % g.size();
  return -g.pv_kw[h] - g.wind_kw[h] + eva_power;
}

struct RewardInputs {
  LoadStats stats;
  double mean_net_load = 0.0;  // f1 over the window
  double energy = 0.0;
  double energy_lower = 0.0;
  double energy_upper = 0.0;
  double energy_delta = 0.0;  // |E^k - E^(k-1)|
  double tariff = 0.0;
  double eva_power = 0.0;
  double slot_hours = 1.0;
};

struct RewardParts {
  double f1 = 0.0;
  double f2 = 0.0;
  double f3 = 0.0;
  double r = 0.0;
};

inline RewardParts reward(const RewardWeights& w, const RewardInputs& in) {
  const double floor = w.denom_floor;
  RewardParts out;

  double renewable_term = 0.0;
  const double f1 = in.mean_net_load;
  if (w.sign_mode == SignMode::paper_literal) {
    const double denom = std::abs(f1) < floor ? (f1 < 0.0 ? -floor : floor) : f1;
    renewable_term = w.psi / denom;
  } else {
    renewable_term = w.psi / std::max(std::abs(f1), floor);
  }
  out.f1 = w.alpha / std::max(in.stats.variance, floor) +
           w.beta * (in.stats.p_max - in.stats.p_min) + renewable_term;

  double boundary = 0.0;
  if (in.energy > in.energy_upper)
    boundary = w.chi * (in.energy_upper - in.energy);
  else if (in.energy < in.energy_lower)
    boundary = w.chi * (in.energy - in.energy_lower);
  const double cost = in.tariff * in.eva_power * in.slot_hours;
  const double cost_term =
      w.sign_mode == SignMode::paper_literal ? w.upsilon * cost : -w.upsilon * cost;
  out.f2 = boundary + cost_term;

  out.f3 = w.rho / std::max(in.energy_delta, floor);
  out.r = out.f1 + out.f2 + out.f3;
  return out;
}

struct EnvState {
  std::array<double, kHistory> load_history{};  // oldest first, newest last
  double eva_energy = 0.0;
  double variance = 0.0;
  double tariff = 0.0;
  double energy_delta = 0.0;

  std::array<double, kStateDim> to_array() const {
    std::array<double, kStateDim> out{};
    std::copy(load_history.begin(), load_history.end(), out.begin());
    out[kHistory] = eva_energy;
    out[kHistory + 1] = variance;
    out[kHistory + 2] = tariff;
    out[kHistory + 3] = energy_delta;
    return out;
  }
};

struct StepOutcome {
  EnvState next_state;
  RewardParts reward;
  double requested_power = 0.0;
  double applied_power = 0.0;  // stored-energy kW actually delivered
  double grid_load = 0.0;      // P^k after projection
  bool projected = false;
  bool grid_conflict = false;  // fleet tubes had to yield to grid limits
  bool done = false;
};

// One EV per slot as logged for reports.
struct SlotRecord {
  int slot = 0;
  int hour = 0;
  double requested = 0.0;
  double applied = 0.0;
  double grid_load = 0.0;
  double energy_after = 0.0;
  double tariff = 0.0;
  allocation::AllocationProposal proposal;
  std::vector<std::size_t> ev_index;  // fleet indices of the connected EVs
};

class Environment {
 public:
  Environment(EnvConfig cfg, RewardWeights weights, GridProfiles profiles,
              std::vector<fleet::EvSession> fleet,
              battery::CellSpec cell = {}, battery::PackTopology topology = {},
              allocation::StakeParams stake = {})
      : cfg_(std::move(cfg)),
        weights_(weights),
        profiles_(std::move(profiles)),
        fleet_(std::move(fleet)),
        cell_(std::move(cell)),
        topology_(topology),
        stake_(stake) {
    cfg_.validate();
    weights_.validate();
    profiles_.validate();
    cell_.validate();
    topology_.validate();
    envelope_ = fleet::aggregate_envelope(fleet_, cfg_.horizon);
    for (int k = 0; k < cfg_.horizon.num_slots; ++k) {
      const double net = profiles_.net_of_renewables(cfg_.horizon.hour_of_slot(k));
      if (net > cfg_.transformer_limit_kw() || net < cfg_.grid_min_kw)
        throw ConfigError("load without EVs violates the grid limits at hour " +
                          std::to_string(cfg_.horizon.hour_of_slot(k)));
    }
  }

  EnvState reset(std::uint64_t day_seed) {
    rng_.seed(day_seed);
    slot_ = 0;
    energies_.resize(fleet_.size());
    for (std::size_t i = 0; i < fleet_.size(); ++i) {
      energies_[i] = fleet_[i].initial_energy();
      fleet_[i].pack.soc = fleet_[i].soc_initial;
    }
    energy_ = envelope_.initial_energy();
    prev_energy_ = energy_;
    load_history_.clear();
    net_history_.clear();
    const int start = cfg_.horizon.start_hour;
    for (int i = kHistory; i >= 1; --i) {
      const int hour = ((start - i) % 24 + 24) % 24;
      load_history_.push_back(power_load(profiles_, hour, 0.0));
      net_history_.push_back(net_load(profiles_, hour, 0.0));
    }
    records_.clear();
    return state();
  }

  // Interval of EVA power (stored-energy kW) the next step will accept
  // without projection.
  fleet::PowerBounds admissible_bounds() const {
    if (slot_ >= cfg_.horizon.num_slots) return {0.0, 0.0};
    auto evs = connected(false);
    auto bounds = combine(evs.slots);
    if (bounds.min <= bounds.max) return bounds;
    auto relaxed = connected(true);
    return grid_only(relaxed.slots);
  }

  StepOutcome step(double action) {
    if (!std::isfinite(action)) throw DomainError("action must be finite");
    if (done()) throw DomainError("episode already finished");
    const int k = slot_;
    const int hour = cfg_.horizon.hour_of_slot(k);
    const double dt = cfg_.horizon.slot_hours;

    StepOutcome out;
    out.requested_power = action;

    auto evs = connected(false);
    auto bounds = combine(evs.slots);
    if (bounds.min > bounds.max) {
      out.grid_conflict = true;
      evs = connected(true);
      bounds = grid_only(evs.slots);
    }
    const double target = std::clamp(action, bounds.min, bounds.max);
    out.projected = target != action;

    auto prop = allocation::allocate(k, target, std::span<const allocation::EvSlot>(evs.slots),
                                     dt, rng_, stake_);
    double delivered = 0.0;
    for (std::size_t j = 0; j < evs.slots.size(); ++j) {
      const auto i = evs.index[j];
      const double de = evs.slots[j].efficiency * prop.final_powers[j] * dt;
      energies_[i] += de;
      delivered += de;
      fleet_[i].pack.soc = energies_[i] / fleet_[i].capacity_kwh();
    }
    const double applied = delivered / dt;

    prev_energy_ = energy_;
    energy_ += applied * dt;
    ++slot_;

    const double grid = power_load(profiles_, hour, applied);
    load_history_.pop_front();
    load_history_.push_back(grid);
    net_history_.pop_front();
    net_history_.push_back(net_load(profiles_, hour, applied));

    RewardInputs in;
    in.stats = rolling_stats(std::vector<double>(load_history_.begin(), load_history_.end()));
    in.mean_net_load = std::accumulate(net_history_.begin(), net_history_.end(), 0.0) /
                       static_cast<double>(net_history_.size());
    in.energy = energy_;
    in.energy_lower = envelope_.e_lower[slot_];
    in.energy_upper = envelope_.e_upper[slot_];
    in.energy_delta = std::abs(energy_ - prev_energy_);
    in.tariff = profiles_.tariff[static_cast<std::size_t>(hour) % profiles_.size()];
    in.eva_power = applied;
    in.slot_hours = dt;

    out.reward = reward(weights_, in);
    out.applied_power = applied;
    out.grid_load = grid;
    out.done = done();
    out.next_state = state();

    if (record_) {
      SlotRecord rec;
      rec.slot = k;
      rec.hour = hour;
      rec.requested = action;
      rec.applied = applied;
      rec.grid_load = grid;
      rec.energy_after = energy_;
      rec.tariff = in.tariff;
      rec.proposal = std::move(prop);
      rec.ev_index = evs.index;
      records_.push_back(std::move(rec));
    }
    return out;
  }

  EnvState state() const {
    EnvState s;
    std::copy(load_history_.begin(), load_history_.end(), s.load_history.begin());
    s.eva_energy = energy_;
    s.variance = rolling_stats(std::vector<double>(load_history_.begin(), load_history_.end())).variance;
    const int hour = cfg_.horizon.hour_of_slot(std::min(slot_, cfg_.horizon.num_slots - 1));
    s.tariff = profiles_.tariff[static_cast<std::size_t>(hour) % profiles_.size()];
    s.energy_delta = std::abs(energy_ - prev_energy_);
    return s;
  }

  bool done() const { return slot_ >= cfg_.horizon.num_slots; }
  int slot() const { return slot_; }
  int hour() const { return cfg_.horizon.hour_of_slot(std::min(slot_, cfg_.horizon.num_slots - 1)); }
  double energy() const { return energy_; }
  std::span<const double> ev_energies() const { return energies_; }
  std::vector<double> load_window() const {
    return {load_history_.begin(), load_history_.end()};
  }

  const EnvConfig& config() const { return cfg_; }
  const RewardWeights& weights() const { return weights_; }
  const GridProfiles& profiles() const { return profiles_; }
  const std::vector<fleet::EvSession>& fleet() const { return fleet_; }
  const fleet::AggregateEnvelope& envelope() const { return envelope_; }
  const battery::CellSpec& cell() const { return cell_; }
  const battery::PackTopology& topology() const { return topology_; }

  void set_recording(bool on) { record_ = on; }
  const std::vector<SlotRecord>& records() const { return records_; }

  // Peak power of EV i at its current SOC, scaled from the cell module to
  // the EV's nominal pack energy. {charge, discharge} in kW, both >= 0.
  battery::CurrentLimits ev_peak_power(std::size_t i) const {
    const auto& s = fleet_[i];
    const double soc = std::clamp(s.pack.soc, s.spec.soc_window.min, s.spec.soc_window.max);
    const auto pp = battery::peak_power(soc, cell_, topology_, s.pack,
                                        cfg_.horizon.slot_hours, s.spec.soc_window);
    const double modules = s.spec.capacity_kwh / topology_.nominal_energy_kwh(cell_);
    return {pp.p_ch_kw * modules, pp.p_dis_kw * modules};
  }

 private:
  struct Connected {
    std::vector<allocation::EvSlot> slots;
    std::vector<std::size_t> index;
  };

  // Connected EVs with their end-of-slot energy windows. `relaxed` drops the
  // departure tightening and keeps only the SOC operating window.
  Connected connected(bool relaxed) const {
    Connected c;
    const int k = slot_;
    for (std::size_t i = 0; i < fleet_.size(); ++i) {
      const auto& tube = envelope_.per_ev[i];
      if (k < tube.arrival || k >= tube.departure) continue;
      const auto& s = fleet_[i];
      allocation::EvSlot ev;
      ev.ev_id = s.ev_id;
      ev.energy = energies_[i];
      ev.efficiency = s.spec.efficiency;
      ev.age = s.pack.efc;
      ev.capacity_kwh = s.capacity_kwh();
      ev.p_ch_max = s.spec.p_ch_max;
      ev.p_dis_max = s.spec.p_dis_max;
      if (cfg_.sop_limits) {
        const auto sop = ev_peak_power(i);
        ev.p_ch_max = std::min(ev.p_ch_max, sop.charge);
        ev.p_dis_max = std::max(ev.p_dis_max, -sop.discharge);
      }
      if (relaxed) {
        ev.next_lo = s.spec.soc_window.min * ev.capacity_kwh;
        ev.next_hi = s.spec.soc_window.max * ev.capacity_kwh;
      } else {
        ev.next_lo = tube.e_lo[k + 1];
        ev.next_hi = tube.e_hi[k + 1];
      }
      c.slots.push_back(ev);
      c.index.push_back(i);
    }
    return c;
  }

  fleet::PowerBounds fleet_range(const std::vector<allocation::EvSlot>& evs) const {
    const double dt = cfg_.horizon.slot_hours;
    return {allocation::max_transferable(evs, dt, false),
            allocation::max_transferable(evs, dt, true)};
  }

  fleet::PowerBounds grid_range() const {
    const double net = profiles_.net_of_renewables(cfg_.horizon.hour_of_slot(slot_));
    return {cfg_.grid_min_kw - net, cfg_.transformer_limit_kw() - net};
  }

  // Fleet range intersected with the envelope one-step bounds and the grid.
  fleet::PowerBounds combine(const std::vector<allocation::EvSlot>& evs) const {
    auto b = fleet_range(evs);
    try {
      const auto agg = fleet::eva_power_bounds(envelope_, energy_, slot_);
      b.min = std::max(b.min, agg.min);
      b.max = std::min(b.max, agg.max);
    } catch (const fleet::ProjectionError&) {
      // only reachable after a grid conflict; the per-EV range governs
    }
    const auto g = grid_range();
    b.min = std::max(b.min, g.min);
    b.max = std::min(b.max, g.max);
    return b;
  }

  fleet::PowerBounds grid_only(const std::vector<allocation::EvSlot>& evs) const {
    auto b = fleet_range(evs);
    const auto g = grid_range();
    b.min = std::max(b.min, g.min);
    b.max = std::min(b.max, g.max);
    if (b.min > b.max) b.min = b.max = std::clamp(0.0, g.min, g.max);
    return b;
  }

  EnvConfig cfg_;
  RewardWeights weights_;
  GridProfiles profiles_;
  std::vector<fleet::EvSession> fleet_;
  battery::CellSpec cell_;
  battery::PackTopology topology_;
  allocation::StakeParams stake_;
  fleet::AggregateEnvelope envelope_;

  std::mt19937_64 rng_;
  int slot_ = 0;
  double energy_ = 0.0;
  double prev_energy_ = 0.0;
  std::vector<double> energies_;
  std::deque<double> load_history_;
  std::deque<double> net_history_;
  bool record_ = false;
  std::vector<SlotRecord> records_;
};

}  // namespace v2g::env
