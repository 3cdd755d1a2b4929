#pragma once

// Aggregate (EVA-level) feasible region: elementwise sums of per-EV tubes plus
// the pairwise energy-change test over every pair of boundaries.

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "v2g/error.hpp"
#include "v2g/fleet.hpp"

namespace v2g::fleet {

struct AggregateEnvelope {
  int num_slots = 0;
  double slot_hours = 1.0;
  std::vector<double> e_lower, e_upper;  // K + 1
  std::vector<double> p_lower, p_upper;  // K, stored-energy kW
  std::vector<EvTube> per_ev;

  double initial_energy() const { return e_lower.empty() ? 0.0 : e_lower[0]; }
};

inline AggregateEnvelope empty_envelope(const Horizon& h) {
  AggregateEnvelope env;
  env.num_slots = h.num_slots;
  env.slot_hours = h.slot_hours;
  env.e_lower.assign(h.num_slots + 1, 0.0);
  env.e_upper.assign(h.num_slots + 1, 0.0);
  env.p_lower.assign(h.num_slots, 0.0);
  env.p_upper.assign(h.num_slots, 0.0);
  return env;
}

inline AggregateEnvelope aggregate_envelope(std::span<const EvSession> sessions,
                                            const Horizon& h) {
  auto env = empty_envelope(h);
  env.per_ev.reserve(sessions.size());
  for (const auto& s : sessions) {
    auto tube = ev_tube(s, h);
    for (int t = 0; t <= h.num_slots; ++t) {
      env.e_lower[t] += tube.e_lo[t];
      env.e_upper[t] += tube.e_hi[t];
    }
    for (int k = 0; k < h.num_slots; ++k) {
      env.p_lower[k] += tube.p_lo[k];
      env.p_upper[k] += tube.p_hi[k];
    }
    env.per_ev.push_back(std::move(tube));
  }
  return env;
}

// Bounds on E(t1) - E(t2) for every pair t1 > t2:
//   sum_n max(lo_n(t1) - hi_n(t2), sum p_lo_n dt)
//     <= E(t1) - E(t2) <=
//   sum_n min(hi_n(t1) - lo_n(t2), sum p_hi_n dt).
// Stored row-major in (K + 1) x (K + 1); only t1 > t2 entries are set.
struct PairBounds {
  int size = 0;
  std::vector<double> lower, upper;
  double lo(int t1, int t2) const { return lower[static_cast<std::size_t>(t1 * size + t2)]; }
  double hi(int t1, int t2) const { return upper[static_cast<std::size_t>(t1 * size + t2)]; }
};

inline PairBounds pair_bounds(const AggregateEnvelope& env) {
  const int K = env.num_slots;
  PairBounds pb;
  pb.size = K + 1;
  pb.lower.assign(static_cast<std::size_t>(pb.size * pb.size), 0.0);
  pb.upper.assign(static_cast<std::size_t>(pb.size * pb.size), 0.0);
  std::vector<double> cum_lo(K + 1), cum_hi(K + 1);
  for (const auto& tube : env.per_ev) {
    cum_lo[0] = cum_hi[0] = 0.0;
    for (int k = 0; k < K; ++k) {
      cum_lo[k + 1] = cum_lo[k] + tube.p_lo[k] * env.slot_hours;
      cum_hi[k + 1] = cum_hi[k] + tube.p_hi[k] * env.slot_hours;
    }
    for (int t1 = 1; t1 <= K; ++t1)
      for (int t2 = 0; t2 < t1; ++t2) {
        const auto i = static_cast<std::size_t>(t1 * pb.size + t2);
        pb.lower[i] += std::max(tube.e_lo[t1] - tube.e_hi[t2], cum_lo[t1] - cum_lo[t2]);
        pb.upper[i] += std::min(tube.e_hi[t1] - tube.e_lo[t2], cum_hi[t1] - cum_hi[t2]);
      }
  }
  return pb;
}

struct Containment {
  bool ok = true;
  // First violated boundary pair (t1 > t2); (0, 0) flags a wrong start value.
  int t1 = 0;
  int t2 = 0;
  double change = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

inline Containment envelope_contains(const AggregateEnvelope& env,
                                     std::span<const double> energy,
                                     double tol = 1e-6) {
  const int K = env.num_slots;
  if (static_cast<int>(energy.size()) != K + 1)
    throw DomainError("trajectory must cover every boundary of the horizon");

  Containment res;
  if (std::abs(energy[0] - env.initial_energy()) > tol) {
    res.ok = false;
    res.change = energy[0];
    res.lower = res.upper = env.initial_energy();
    return res;
  }
  const auto pb = pair_bounds(env);
  for (int t1 = 1; t1 <= K; ++t1) {
    for (int t2 = t1 - 1; t2 >= 0; --t2) {  // adjacent pair first
      const double change = energy[t1] - energy[t2];
      if (change < pb.lo(t1, t2) - tol || change > pb.hi(t1, t2) + tol)
        return {false, t1, t2, change, pb.lo(t1, t2), pb.hi(t1, t2)};
    }
  }
  return res;
}

struct PowerBounds {
  double min = 0.0;
  double max = 0.0;
};

struct ProjectionError : DomainError {
  ProjectionError(const std::string& w, double violation_kwh)
      : DomainError(w), violation(violation_kwh) {}
  double violation;
};

// Tightest one-step EVA power bounds at slot k given the current EVA energy.
inline PowerBounds eva_power_bounds(const AggregateEnvelope& env,
                                    double energy, int k, double tol = 1e-6) {
  if (k < 0 || k >= env.num_slots) throw DomainError("slot outside the horizon");
  if (energy < env.e_lower[k] - tol)
    throw ProjectionError("EVA energy below its envelope",
                          env.e_lower[k] - energy);
  if (energy > env.e_upper[k] + tol)
    throw ProjectionError("EVA energy above its envelope",
                          energy - env.e_upper[k]);
  PowerBounds b;
  b.max = std::min(env.p_upper[k], (env.e_upper[k + 1] - energy) / env.slot_hours);
  b.min = std::max(env.p_lower[k], (env.e_lower[k + 1] - energy) / env.slot_hours);
  if (b.min > b.max) b.min = b.max = 0.5 * (b.min + b.max);
  return b;
}

}  // namespace v2g::fleet
