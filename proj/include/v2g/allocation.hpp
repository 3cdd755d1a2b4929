#pragma once

// Lower level of the hierarchy: splits one slot's EVA power across the
// connected EVs. A stake-weighted validator is drawn, it proposes a
// headroom-proportional split, the split is clamped to each EV's power and
// energy box, any residual is spread over EVs with room left, and the result
// is re-checked before it is accepted.

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "v2g/battery.hpp"
#include "v2g/csv.hpp"
#include "v2g/error.hpp"

namespace v2g::allocation {

inline constexpr double kBalanceTol = 1e-6;  // kW

// One EV as seen by the allocator at the start of a slot. Powers are grid
// side (kW); energies are stored energy (kWh) and change by efficiency *
// power * slot length.
struct EvSlot {
  int ev_id = 0;
  double energy = 0.0;
  double next_lo = 0.0;  // admissible stored energy at the end of the slot
  double next_hi = 0.0;
  double p_ch_max = 0.0;
  double p_dis_max = 0.0;  // <= 0
  double efficiency = 1.0;
  double age = 0.0;  // equivalent full cycles
  double capacity_kwh = 1.0;
};

struct StakeRecord {
  int ev_id = 0;
  double locked_energy = 0.0;  // kWh
  double battery_age = 0.0;    // equivalent full cycles
  double random_tiebreak = 0.0;
};

struct StakeParams {
  double locked_fraction = 0.1;  // share of stored energy pledged
};

inline std::vector<StakeRecord> make_stakes(std::span<const EvSlot> evs,
                                            const StakeParams& p = {}) {
  std::vector<StakeRecord> out;
  out.reserve(evs.size());
  for (const auto& ev : evs)
    out.push_back({ev.ev_id, p.locked_fraction * std::max(0.0, ev.energy), ev.age, 0.0});
  return out;
}

// Draws the validator with probability proportional to
// locked_energy / (1 + age / max_age). All-zero scores fall back to a
// uniform draw. The returned record carries the uniform draw used.
template <typename Rng>
StakeRecord select_validator(std::span<const StakeRecord> stakes, Rng& rng) {
  if (stakes.empty()) throw DomainError("validator selection needs at least one EV");
  double max_age = 0.0;
  for (const auto& s : stakes) {
    if (s.locked_energy < 0.0) throw DomainError("locked energy must be >= 0");
    max_age = std::max(max_age, s.battery_age);
  }
  std::vector<double> score(stakes.size());
  double total = 0.0;
  for (std::size_t i = 0; i < stakes.size(); ++i) {
    const double age_norm = max_age > 0.0 ? stakes[i].battery_age / max_age : 0.0;
    score[i] = stakes[i].locked_energy / (1.0 + age_norm);
    total += score[i];
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  std::size_t pick = stakes.size() - 1;
  if (total <= 0.0) {
    pick = std::min(stakes.size() - 1,
                    static_cast<std::size_t>(u * static_cast<double>(stakes.size())));
  } else {
    double acc = 0.0;
    const double target = u * total;
    for (std::size_t i = 0; i < stakes.size(); ++i) {
      if (score[i] <= 0.0) continue;
      acc += score[i];
      pick = i;
      if (target < acc) break;
    }
  }
  StakeRecord winner = stakes[pick];
  winner.random_tiebreak = u;
  return winner;
}

// Headroom (charging) or footroom (discharging) weight of an EV.
inline double energy_weight(const EvSlot& ev, double eva_power) {
  if (eva_power > 0.0) return std::max(0.0, ev.next_hi - ev.energy);
  if (eva_power < 0.0) return std::max(0.0, ev.energy - ev.next_lo);
  return 0.0;
}

// Proportional split of the stored-energy EVA power; returns grid-side kW.
inline std::vector<double> propose_powers(double eva_power,
                                          std::span<const EvSlot> evs) {
  std::vector<double> p(evs.size(), 0.0);
  if (eva_power == 0.0) return p;
  double total = 0.0;
  for (const auto& ev : evs) total += energy_weight(ev, eva_power);
  if (total <= 0.0)
    throw InfeasibleError("no EV has room for the requested EVA power");
  for (std::size_t i = 0; i < evs.size(); ++i)
    p[i] = eva_power * energy_weight(evs[i], eva_power) / total / evs[i].efficiency;
  return p;
}

struct PowerBox {
  double lo = 0.0;
  double hi = 0.0;
};

// Grid-side power interval keeping the EV inside its power limits and its
// end-of-slot energy window.
inline PowerBox power_box(const EvSlot& ev, double slot_hours) {
  const double scale = ev.efficiency * slot_hours;
  PowerBox b;
  b.lo = std::max(ev.p_dis_max, (ev.next_lo - ev.energy) / scale);
  b.hi = std::min(ev.p_ch_max, (ev.next_hi - ev.energy) / scale);
  if (b.lo > b.hi) b.lo = b.hi = std::clamp(0.0, b.hi, b.lo);
  return b;
}

inline double safety_clamp(double proposed, const EvSlot& ev, double slot_hours) {
  const auto box = power_box(ev, slot_hours);
  return std::clamp(proposed, box.lo, box.hi);
}

struct AllocationProposal {
  int slot = 0;
  double target = 0.0;                // stored-energy kW
  std::vector<double> proposed;       // grid kW per EV
  std::vector<double> final_powers;   // grid kW per EV
  double residual = 0.0;              // target - delivered, stored kW
  int validator = -1;
  int iterations = 0;
  bool accepted = false;

  double delivered(std::span<const EvSlot> evs) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < evs.size(); ++i)
      sum += evs[i].efficiency * final_powers[i];
    return sum;
  }
};

// Moves the post-clamp residual onto EVs that still have room, in
// proportion to that room, until it vanishes or nobody has room left.
inline void redistribute_residual(AllocationProposal& prop,
                                  std::span<const EvSlot> evs,
                                  double slot_hours, int max_iterations = 64) {
  std::vector<PowerBox> boxes;
  boxes.reserve(evs.size());
  for (const auto& ev : evs) boxes.push_back(power_box(ev, slot_hours));

  auto& p = prop.final_powers;
  prop.iterations = 0;
  for (; prop.iterations < max_iterations; ++prop.iterations) {
    const double residual = prop.target - prop.delivered(evs);
    if (std::abs(residual) < 1e-9) break;
    double room_total = 0.0;
    for (std::size_t i = 0; i < evs.size(); ++i) {
      const double room = residual > 0 ? boxes[i].hi - p[i] : p[i] - boxes[i].lo;
      if (room > 1e-12) room_total += evs[i].efficiency * room;
    }
    if (room_total <= 1e-12) break;
    const double frac = std::min(1.0, std::abs(residual) / room_total);
    for (std::size_t i = 0; i < evs.size(); ++i) {
      const double room = residual > 0 ? boxes[i].hi - p[i] : p[i] - boxes[i].lo;
      if (room <= 1e-12) continue;
      p[i] += (residual > 0 ? 1.0 : -1.0) * frac * room;
      p[i] = std::clamp(p[i], boxes[i].lo, boxes[i].hi);
    }
  }
  prop.residual = prop.target - prop.delivered(evs);
  prop.accepted = std::abs(prop.residual) < kBalanceTol;
}

struct Violation {
  enum class Kind { power_above, power_below, energy_above, energy_below, balance };
  int ev_id = -1;  // -1 for the fleet-level balance check
  Kind kind = Kind::balance;
  double value = 0.0;
  double bound = 0.0;

  std::string describe() const {
    static const char* names[] = {"power above limit", "power below limit",
                                  "energy above window", "energy below window",
                                  "power balance"};
    return (ev_id >= 0 ? "EV " + std::to_string(ev_id) + ": " : std::string()) +
           names[static_cast<int>(kind)] + " (" + csv::num(value) + " vs " +
           csv::num(bound) + ")";
  }
};

struct Validation {
  bool accepted = true;
  std::vector<Violation> violations;
};

// Re-checks every EV box and the power balance of a proposal.
inline Validation validate_proposal(const AllocationProposal& prop,
                                    std::span<const EvSlot> evs,
                                    double slot_hours, double tol = kBalanceTol) {
  Validation v;
  if (prop.final_powers.size() != evs.size())
    throw DomainError("proposal and fleet sizes differ");
  constexpr double eps = 1e-9;
  double delivered = 0.0;
  for (std::size_t i = 0; i < evs.size(); ++i) {
    const auto& ev = evs[i];
    const double p = prop.final_powers[i];
    if (p > ev.p_ch_max + eps)
      v.violations.push_back({ev.ev_id, Violation::Kind::power_above, p, ev.p_ch_max});
    if (p < ev.p_dis_max - eps)
      v.violations.push_back({ev.ev_id, Violation::Kind::power_below, p, ev.p_dis_max});
    const double next = ev.energy + ev.efficiency * p * slot_hours;
    if (next > ev.next_hi + eps)
      v.violations.push_back({ev.ev_id, Violation::Kind::energy_above, next, ev.next_hi});
    if (next < ev.next_lo - eps)
      v.violations.push_back({ev.ev_id, Violation::Kind::energy_below, next, ev.next_lo});
    delivered += ev.efficiency * p;
  }
  if (std::abs(prop.target - delivered) >= tol)
    v.violations.push_back({-1, Violation::Kind::balance, delivered, prop.target});
  v.accepted = v.violations.empty();
  return v;
}

// Full pipeline for one slot: select, propose, clamp, redistribute, validate.
template <typename Rng>
AllocationProposal allocate(int slot, double eva_power, std::span<const EvSlot> evs,
                            double slot_hours, Rng& rng,
                            const StakeParams& stake = {}) {
  AllocationProposal prop;
  prop.slot = slot;
  prop.target = eva_power;
  if (evs.empty()) {
    prop.residual = eva_power;
    prop.accepted = std::abs(eva_power) < kBalanceTol;
    return prop;
  }
  const auto stakes = make_stakes(evs, stake);
  prop.validator = select_validator(std::span<const StakeRecord>(stakes), rng).ev_id;

  double total_weight = 0.0;
  for (const auto& ev : evs) total_weight += energy_weight(ev, eva_power);
  prop.proposed = total_weight > 0.0 ? propose_powers(eva_power, evs)
                                     : std::vector<double>(evs.size(), 0.0);
  prop.final_powers.resize(evs.size());
  for (std::size_t i = 0; i < evs.size(); ++i)
    prop.final_powers[i] = safety_clamp(prop.proposed[i], evs[i], slot_hours);
  redistribute_residual(prop, evs, slot_hours);
  prop.accepted = prop.accepted && validate_proposal(prop, evs, slot_hours).accepted;
  return prop;
}

// Sum of grid-side powers the fleet could absorb (or deliver, when
// negative direction is asked) this slot.
inline double max_transferable(std::span<const EvSlot> evs, double slot_hours,
                               bool charging) {
  double sum = 0.0;
  for (const auto& ev : evs) {
    const auto box = power_box(ev, slot_hours);
    sum += ev.efficiency * (charging ? box.hi : box.lo);
  }
  return sum;
}

struct LedgerEntry {
  int ev_id = 0;
  double charging_cost = 0.0;      // $
  double degradation_cost = 0.0;   // $ delta over the day
  double deviation_penalty = 0.0;  // $
  double total() const { return charging_cost + degradation_cost + deviation_penalty; }
};

struct SettlementParams {
  double penalty_rate = 0.1;  // $/kWh of deviation from the plan
  battery::DegradationCostParams degradation;
};

// Per-EV settlement of one day. planned/executed are [ev][slot] grid kW;
// soh values are fractions.
inline std::vector<LedgerEntry> settle_rewards(
    std::span<const int> ev_ids,
    const std::vector<std::vector<double>>& planned,
    const std::vector<std::vector<double>>& executed,
    std::span<const double> tariff, double slot_hours,
    std::span<const double> soh_before, std::span<const double> soh_after,
    std::span<const double> capacity_kwh, const SettlementParams& params = {}) {
  const std::size_t n = ev_ids.size();
  if (planned.size() != n || executed.size() != n || soh_before.size() != n ||
      soh_after.size() != n || capacity_kwh.size() != n)
    throw DomainError("settlement inputs must all cover the same EVs");
  std::vector<LedgerEntry> ledger(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& e = ledger[i];
    e.ev_id = ev_ids[i];
    const auto& plan = planned[i];
    const auto& exec = executed[i];
    if (plan.size() != tariff.size() || exec.size() != tariff.size())
      throw DomainError("schedules must cover every tariff slot");
    for (std::size_t k = 0; k < tariff.size(); ++k) {
      e.charging_cost += tariff[k] * exec[k] * slot_hours;
      e.deviation_penalty +=
          params.penalty_rate * std::abs(exec[k] - plan[k]) * slot_hours;
    }
    e.degradation_cost =
        battery::degradation_cost(soh_after[i], capacity_kwh[i], params.degradation) -
        battery::degradation_cost(soh_before[i], capacity_kwh[i], params.degradation);
  }
  return ledger;
}

// The EV leaves at `slot`: nothing after it is executed.
inline void inject_early_departure(std::vector<double>& executed, int slot) {
  for (std::size_t k = static_cast<std::size_t>(std::max(0, slot)); k < executed.size(); ++k)
    executed[k] = 0.0;
}

struct TraceRow {
  int slot;
  int ev_id;
  double proposed_kw;
  double final_kw;
  double soc_after;
};

inline void write_trace(std::span<const TraceRow> rows,
                        const std::filesystem::path& path) {
  csv::Writer w({"slot", "ev_id", "proposed_kw", "final_kw", "soc_after"});
  for (const auto& r : rows) w.add(r.slot, r.ev_id, r.proposed_kw, r.final_kw, r.soc_after);
  w.save(path);
}

}  // namespace v2g::allocation
