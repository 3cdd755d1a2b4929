#pragma once

// Reference dispatch strategies. BL1 is a state-feedback rule; BL2-BL4 are
// day-ahead plans over the aggregate envelope solved as dense QP/LPs, then
// replayed through the environment like any other power request.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "v2g/day.hpp"
#include "v2g/env.hpp"
#include "v2g/envelope.hpp"
#include "v2g/error.hpp"
#include "v2g/qp.hpp"

namespace v2g::baselines {

enum class Baseline { bl1, bl2, bl3, bl4 };

inline Baseline parse_baseline(const std::string& s) {
  if (s == "bl1" || s == "BL1") return Baseline::bl1;
  if (s == "bl2" || s == "BL2") return Baseline::bl2;
  if (s == "bl3" || s == "BL3") return Baseline::bl3;
  if (s == "bl4" || s == "BL4") return Baseline::bl4;
  throw ConfigError("unknown baseline '" + s + "'");
}

inline std::string name(Baseline b) {
  switch (b) {
    case Baseline::bl1: return "bl1";
    case Baseline::bl2: return "bl2";
    case Baseline::bl3: return "bl3";
    case Baseline::bl4: return "bl4";
  }
  return "?";
}

// Uncontrolled charging: every connected EV takes min(p_ch_max, headroom
// rate) until it reaches the top of its SOC window. Stored-energy kW.
inline double bl1_uncontrolled(const env::Environment& e) {
  if (e.done()) return 0.0;
  const int k = e.slot();
  const double dt = e.config().horizon.slot_hours;
  double p = 0.0;
  for (std::size_t i = 0; i < e.fleet().size(); ++i) {
    const auto& tube = e.envelope().per_ev[i];
    if (k < tube.arrival || k >= tube.departure) continue;
    const auto& s = e.fleet()[i];
    const double headroom = s.spec.soc_window.max * s.capacity_kwh() - e.ev_energies()[i];
    p += std::max(0.0, std::min(s.spec.efficiency * s.spec.p_ch_max, headroom / dt));
  }
  return p;
}

struct Plan {
  std::vector<double> power;  // stored-energy kW per slot
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
};

namespace detail {

// Box per slot: envelope power bounds intersected with the grid headroom.
struct Boxes {
  std::vector<double> lo, hi;
};

inline Boxes slot_boxes(const env::Environment& e, bool charge_only) {
  const auto& env = e.envelope();
  const auto& cfg = e.config();
  Boxes b;
  for (int k = 0; k < env.num_slots; ++k) {
    const double net = e.profiles().net_of_renewables(cfg.horizon.hour_of_slot(k));
    double lo = std::max(env.p_lower[k], cfg.grid_min_kw - net);
    double hi = std::min(env.p_upper[k], cfg.transformer_limit_kw() - net);
    if (charge_only) lo = std::max(lo, 0.0);
    if (lo > hi + 1e-9)
      throw InfeasibleError("no admissible EVA power at slot " + std::to_string(k));
    b.lo.push_back(std::min(lo, hi));
    b.hi.push_back(hi);
  }
  return b;
}

// Assembles the envelope problem over the free slots. Slots whose box is a
// single point are fixed and folded into the constants.
struct Builder {
  int K = 0;
  double dt = 1.0;
  std::vector<int> free;     // slot index of each variable
  std::vector<double> fixed;  // power of every slot (fixed ones meaningful)
  qp::Problem pr;

  Builder(const env::Environment& e, bool charge_only) {
    const auto& env = e.envelope();
    K = env.num_slots;
    dt = env.slot_hours;
    const auto box = slot_boxes(e, charge_only);
    fixed.assign(K, 0.0);
    for (int k = 0; k < K; ++k) {
      if (box.hi[k] - box.lo[k] < 1e-9)
        fixed[k] = 0.5 * (box.lo[k] + box.hi[k]);
      else
        free.push_back(k);
    }
    const auto n = static_cast<Eigen::Index>(free.size());
    pr.H = qp::Mat::Zero(n, n);
    pr.c = qp::Vec::Zero(n);
    pr.lo.resize(n);
    pr.hi.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      pr.lo(j) = box.lo[free[j]];
      pr.hi(j) = box.hi[free[j]];
    }

    const auto pb = fleet::pair_bounds(env);
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
    for (int t1 = 1; t1 <= K; ++t1)
      for (int t2 = 0; t2 < t1; ++t2) {
        std::vector<double> row(free.size(), 0.0);
        double constant = 0.0;
        bool any = false;
        for (int k = t2; k < t1; ++k) constant += fixed[k] * dt;
        for (std::size_t j = 0; j < free.size(); ++j)
          if (free[j] >= t2 && free[j] < t1) {
            row[j] = dt;
            any = true;
          }
        double lo = pb.lo(t1, t2) - constant;
        double hi = pb.hi(t1, t2) - constant;
        if (!any) {
          if (lo > 1e-6 || hi < -1e-6)
            throw InfeasibleError("envelope cannot be met with the grid limits");
          continue;
        }
        if (hi - lo < 2e-7) {  // keep a thin interior for the barrier
          const double mid = 0.5 * (lo + hi);
          lo = mid - 1e-7;
          hi = mid + 1e-7;
        }
        rows.push_back(row);
        rhs.push_back(hi);
        for (double& v : row) v = -v;
        rows.push_back(std::move(row));
        rhs.push_back(-lo);
      }
    pr.A = qp::Mat::Zero(static_cast<Eigen::Index>(rows.size()), n);
    pr.b = qp::Vec::Zero(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (Eigen::Index j = 0; j < n; ++j) pr.A(static_cast<Eigen::Index>(r), j) = rows[r][j];
      pr.b(static_cast<Eigen::Index>(r)) = rhs[r];
    }
    pr.E = qp::Mat::Zero(0, n);
    pr.d = qp::Vec::Zero(0);
  }

  // Adds E(K) >= e0 + energy_gain as an inequality row.
  void require_gain(double energy_gain) {
    const auto n = pr.c.size();
    double constant = 0.0;
    for (int k = 0; k < K; ++k) constant += fixed[k] * dt;
    const auto m = pr.A.rows();
    pr.A.conservativeResize(m + 1, n);
    pr.b.conservativeResize(m + 1);
    pr.A.row(m).setConstant(-dt);
    pr.b(m) = -(energy_gain - constant);
  }

  Plan finish(const qp::Result& r) const {
    Plan p;
    p.power = fixed;
    for (std::size_t j = 0; j < free.size(); ++j)
      p.power[free[j]] = r.x(static_cast<Eigen::Index>(j));
    p.converged = r.converged;
    p.iterations = r.iterations;
    return p;
  }
};

// Window of the last W loads at the end of the horizon as f + S P.
struct Window {
  std::vector<double> f;
  std::vector<int> slot;  // -1 for hours before the horizon
};

inline Window load_window(const env::Environment& e) {
  const auto& h = e.config().horizon;
  const int K = h.num_slots;
  Window w;
  for (int j = K - env::kHistory; j < K; ++j) {
    if (j < 0) {
      const int hour = ((h.start_hour + j) % 24 + 24) % 24;
      w.f.push_back(e.profiles().net_of_renewables(hour));
      w.slot.push_back(-1);
    } else {
      w.f.push_back(e.profiles().net_of_renewables(h.hour_of_slot(j)));
      w.slot.push_back(j);
    }
  }
  return w;
}

// 0.5 P'HP + c'P equal to the window variance up to a constant.
inline void variance_objective(const env::Environment& e, Builder& b) {
  const auto w = load_window(e);
  const int W = static_cast<int>(w.f.size());
  std::vector<int> col(b.K, -1);
  for (std::size_t j = 0; j < b.free.size(); ++j) col[b.free[j]] = static_cast<int>(j);
  // loads with fixed slots folded into f
  qp::Vec f(W);
  qp::Mat S = qp::Mat::Zero(W, static_cast<Eigen::Index>(b.free.size()));
  for (int i = 0; i < W; ++i) {
    f(i) = w.f[i];
    if (w.slot[i] >= 0) {
      if (col[w.slot[i]] >= 0)
        S(i, col[w.slot[i]]) = 1.0;
      else
        f(i) += b.fixed[w.slot[i]];
    }
  }
  const qp::Mat C = qp::Mat::Identity(W, W) - qp::Mat::Constant(W, W, 1.0 / W);
  b.pr.H = (2.0 / W) * S.transpose() * C * S;
  b.pr.c = (2.0 / W) * S.transpose() * C * f;
}

}  // namespace detail

// Charge-only variance-minimal plan that stores at least `energy_gain` kWh
// over the horizon.
inline Plan bl2_optimal_charging(const env::Environment& e, double energy_gain) {
  detail::Builder b(e, true);
  b.require_gain(energy_gain);
  detail::variance_objective(e, b);
  return b.finish(qp::solve(b.pr));
}

// Signed variance-minimal plan.
inline Plan bl3_min_variance(const env::Environment& e) {
  detail::Builder b(e, false);
  detail::variance_objective(e, b);
  return b.finish(qp::solve(b.pr));
}

// Signed minimum-cost plan. Power is split into charge and discharge parts
// and both carry a vanishing slot-increasing weight, which breaks ties
// toward the earliest schedule without rewarding round trips.
inline Plan bl4_min_cost(const env::Environment& e, double tie_break = 1e-7) {
  detail::Builder b(e, false);
  const auto& h = e.config().horizon;
  const auto n = b.pr.c.size();
  const auto m = b.pr.A.rows();
  qp::Problem pr;
  pr.H = qp::Mat::Zero(2 * n, 2 * n);
  pr.c.resize(2 * n);
  pr.lo = qp::Vec::Zero(2 * n);
  pr.hi.resize(2 * n);
  pr.A = qp::Mat::Zero(m + 2 * n, 2 * n);
  pr.b.resize(m + 2 * n);
  pr.A.topLeftCorner(m, n) = b.pr.A;
  pr.A.topRightCorner(m, n) = -b.pr.A;
  pr.b.head(m) = b.pr.b;
  for (Eigen::Index j = 0; j < n; ++j) {
    const int k = b.free[static_cast<std::size_t>(j)];
    const double tariff = e.profiles().tariff[static_cast<std::size_t>(h.hour_of_slot(k))];
    pr.c(j) = tariff * h.slot_hours + tie_break * (k + 1);
    pr.c(n + j) = -tariff * h.slot_hours + tie_break * (k + 1);
    pr.hi(j) = std::max(0.0, b.pr.hi(j)) + 1e-9;
    pr.hi(n + j) = std::max(0.0, -b.pr.lo(j)) + 1e-9;
    pr.A(m + j, j) = 1.0;
    pr.A(m + j, n + j) = -1.0;
    pr.b(m + j) = b.pr.hi(j);
    pr.A(m + n + j, j) = -1.0;
    pr.A(m + n + j, n + j) = 1.0;
    pr.b(m + n + j) = -b.pr.lo(j);
  }
  pr.E = qp::Mat::Zero(0, 2 * n);
  pr.d = qp::Vec::Zero(0);
  const auto r = qp::solve(pr);
  qp::Result net = r;
  net.x = r.x.head(n) - r.x.tail(n);
  net.x = net.x.cwiseMax(b.pr.lo).cwiseMin(b.pr.hi);
  return b.finish(net);
}

// Energy BL1 stores over the day: every EV to the top of its window, or as
// far as the tubes and grid allow.
inline double bl1_energy_gain(env::Environment e, std::uint64_t day_seed) {
  auto d = run_day(e, day_seed, [](const env::Environment& en, const env::EnvState&) {
    return bl1_uncontrolled(en);
  });
  return d.energy.back() - d.energy.front();
}

inline std::vector<double> plan(Baseline which, const env::Environment& e, std::uint64_t day_seed) {
  switch (which) {
    case Baseline::bl1: return {};
    case Baseline::bl2:
      return bl2_optimal_charging(e, bl1_energy_gain(e, day_seed) - 1e-6).power;
    case Baseline::bl3: return bl3_min_variance(e).power;
    case Baseline::bl4: return bl4_min_cost(e).power;
  }
  return {};
}

// Runs a baseline through the environment.
inline DayResult run_baseline(Baseline which, env::Environment& e, std::uint64_t day_seed) {
  if (which == Baseline::bl1)
    return run_day(e, day_seed, [](const env::Environment& en, const env::EnvState&) {
      return bl1_uncontrolled(en);
    });
  const auto p = plan(which, e, day_seed);
  return run_day(e, day_seed, [&p](const env::Environment& en, const env::EnvState&) {
    return p[static_cast<std::size_t>(en.slot())];
  });
}

}  // namespace v2g::baselines
