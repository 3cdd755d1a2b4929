#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "v2g/envelope.hpp"
#include "v2g/fleet.hpp"
#include "v2g/nn.hpp"

namespace oracle {

using Traj = std::vector<int>;  // integer kWh at boundaries 1..K

// A small fleet on an integer-kWh lattice: 10 kWh packs, +-3 kW, start 15:00.
struct LatticeInstance {
  v2g::fleet::Horizon horizon;
  std::vector<v2g::fleet::EvSession> fleet;
};

inline LatticeInstance random_lattice_instance(std::mt19937_64& rng, int evs, int slots) {
  LatticeInstance inst;
  inst.horizon.start_hour = 15;
  inst.horizon.num_slots = slots;
  std::uniform_int_distribution<int> e0(3, 8);
  while (static_cast<int>(inst.fleet.size()) < evs) {
    std::uniform_int_distribution<int> arr(0, slots - 1);
    const int a = arr(rng);
    std::uniform_int_distribution<int> dep(a + 1, slots);
    v2g::fleet::EvSession s;
    s.ev_id = static_cast<int>(inst.fleet.size());
    s.arrival_hour = 15 + a;
    s.departure_hour = 15 + dep(rng);
    s.spec.capacity_kwh = 10.0;
    s.spec.p_ch_max = 3.0;
    s.spec.p_dis_max = -3.0;
    s.soc_initial = e0(rng) / 10.0;
    if (v2g::fleet::session_feasible(s, inst.horizon)) inst.fleet.push_back(s);
  }
  return inst;
}

// Every integer-kWh trajectory of one EV that respects its SOC window,
// power limits, plug-in window and departure band.
inline std::vector<Traj> ev_lattice(const v2g::fleet::EvSession& s,
                                    const v2g::fleet::Horizon& h) {
  const int K = h.num_slots;
  const int a = s.arrival_index(h), d = s.departure_index(h);
  const double q = s.capacity_kwh();
  const int e0 = static_cast<int>(std::lround(s.initial_energy()));
  const double lo = s.spec.soc_window.min * q, hi = s.spec.soc_window.max * q;
  const double blo = s.spec.departure_band.min * q, bhi = s.spec.departure_band.max * q;
  const int up = static_cast<int>(std::floor(s.spec.p_ch_max * h.slot_hours + 1e-9));
  const int down = static_cast<int>(std::floor(-s.spec.p_dis_max * h.slot_hours + 1e-9));
  std::vector<Traj> out;
  Traj cur;
  auto rec = [&](auto&& self, int t, int e) -> void {
    if (t == K) {
      out.push_back(cur);
      return;
    }
    const bool plugged = t >= a && t < d;
    for (int p = plugged ? -down : 0; p <= (plugged ? up : 0); ++p) {
      const int n = e + p;
      if (plugged && (n < lo - 1e-9 || n > hi + 1e-9)) continue;
      if (t + 1 == d && (n < blo - 1e-9 || n > bhi + 1e-9)) continue;
      cur.push_back(n);
      self(self, t + 1, n);
      cur.pop_back();
    }
  };
  rec(rec, 0, e0);
  return out;
}

// All aggregate trajectories reachable as sums of per-EV lattice schedules.
inline std::set<Traj> aggregate_lattice(const LatticeInstance& inst) {
  std::set<Traj> acc{Traj(static_cast<std::size_t>(inst.horizon.num_slots), 0)};
  for (const auto& s : inst.fleet) {
    const auto own = ev_lattice(s, inst.horizon);
    std::set<Traj> next;
    for (const auto& x : acc)
      for (const auto& y : own) {
        Traj z(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] + y[i];
        next.insert(std::move(z));
      }
    acc = std::move(next);
  }
  return acc;
}

inline std::vector<double> with_start(const Traj& t, double e0) {
  std::vector<double> out{e0};
  for (int v : t) out.push_back(v);
  return out;
}

// Smallest |pre-activation| over the hidden ReLU units at x. Finite
// differences are only meaningful when this is well above the step size.
inline double kink_distance(const v2g::nn::Mlp& net, const v2g::nn::Vec& x) {
  double d = std::numeric_limits<double>::infinity();
  v2g::nn::Vec a = x;
  for (int l = 0; l + 1 < net.num_layers(); ++l) {
    const v2g::nn::Vec z = net.weights(l) * a + net.bias(l);
    d = std::min(d, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return d;
}

// A random net (He weights, N(0, 0.1) biases) and an input at least
// `margin` away from every ReLU kink. `redraws` counts rejected inputs.
struct GradCase {
  v2g::nn::Mlp net;
  v2g::nn::Vec x;
  int redraws = 0;
};

inline GradCase random_grad_case(std::mt19937_64& rng, double margin = 1e-3) {
  const int in = 2 + static_cast<int>(rng() % 6);
  GradCase c{v2g::nn::Mlp({in, 3 + static_cast<int>(rng() % 5), 2 + static_cast<int>(rng() % 4), 1}),
             v2g::nn::Vec(in)};
  c.net.init(rng, v2g::nn::InitScheme::he_normal, 1.0);
  std::normal_distribution<double> g(0.0, 1.0), b(0.0, 0.1);
  for (int l = 0; l < c.net.num_layers(); ++l)
    for (Eigen::Index i = 0; i < c.net.bias(l).size(); ++i) c.net.bias(l)(i) = b(rng);
  for (;;) {
    for (int k = 0; k < in; ++k) c.x(k) = g(rng);
    if (kink_distance(c.net, c.x) >= margin) return c;
    ++c.redraws;
  }
}

}  // namespace oracle
