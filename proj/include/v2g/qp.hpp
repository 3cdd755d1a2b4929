#pragma once

// Small dense convex QP / LP solver (Mehrotra predictor-corrector
// primal-dual interior point):
//   minimize 0.5 x'Hx + c'x  subject to  A x <= b,  lo <= x <= hi,  E x = d.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "v2g/error.hpp"

namespace v2g::qp {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct Problem {
  Mat H;  // n x n, PSD (may be zero)
  Vec c;
  Mat A;  // m x n inequality rows
  Vec b;
  Mat E;  // p x n equality rows
  Vec d;
  Vec lo, hi;  // box, finite
};

struct Options {
  int max_iter = 200;
  double tol = 1e-9;
  double reg = 1e-10;
};

struct Result {
  Vec x;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double max_violation = 0.0;
};

inline Result solve(const Problem& pr, const Options& opt = {}) {
  const auto n = pr.c.size();
  if (pr.H.rows() != n || pr.H.cols() != n || pr.lo.size() != n || pr.hi.size() != n)
    throw DomainError("qp: inconsistent dimensions");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(pr.lo(i) <= pr.hi(i))) throw InfeasibleError("qp: empty box");

  // Stack all inequalities as G x <= h, box included.
  const auto m0 = pr.A.rows();
  const auto m = m0 + 2 * n;
  Mat G = Mat::Zero(m, n);
  Vec h(m);
  if (m0 > 0) {
    G.topRows(m0) = pr.A;
    h.head(m0) = pr.b;
  }
  G.block(m0, 0, n, n) = Mat::Identity(n, n);
  h.segment(m0, n) = pr.hi;
  G.block(m0 + n, 0, n, n) = -Mat::Identity(n, n);
  h.segment(m0 + n, n) = -pr.lo;
  const auto p = pr.E.rows();

  Vec x = 0.5 * (pr.lo + pr.hi);
  Vec s = (h - G * x).cwiseMax(1.0);
  Vec z = Vec::Ones(m);
  Vec y = Vec::Zero(p);

  const double scale = 1.0 + std::max(pr.c.lpNorm<Eigen::Infinity>(),
                                      pr.H.size() ? pr.H.lpNorm<Eigen::Infinity>() : 0.0);
  Result res;
  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it + 1;
    const Vec rd = pr.H * x + pr.c + G.transpose() * z + (p ? Vec(pr.E.transpose() * y) : Vec::Zero(n));
    const Vec rp = G * x + s - h;
    const Vec re = p ? Vec(pr.E * x - pr.d) : Vec();
    const double mu = s.dot(z) / static_cast<double>(m);
    const double res_norm = std::max({rd.lpNorm<Eigen::Infinity>() / scale,
                                      rp.lpNorm<Eigen::Infinity>(),
                                      p ? re.lpNorm<Eigen::Infinity>() : 0.0});
    if (res_norm < opt.tol && mu < opt.tol) {
      res.converged = true;
      break;
    }

    // Reduced system: (H + G' W G + reg) dx + E' dy = r1,  E dx = r2
    const Vec w = z.cwiseQuotient(s);
    Mat K = pr.H + G.transpose() * w.asDiagonal() * G;
    K.diagonal().array() += opt.reg;
    Mat KKT = Mat::Zero(n + p, n + p);
    KKT.topLeftCorner(n, n) = K;
    if (p) {
      KKT.topRightCorner(n, p) = pr.E.transpose();
      KKT.bottomLeftCorner(p, n) = pr.E;
      KKT.bottomRightCorner(p, p).diagonal().array() = -opt.reg;
    }
    Eigen::PartialPivLU<Mat> lu(KKT);

    auto direction = [&](const Vec& rc, Vec& dx, Vec& ds, Vec& dz, Vec& dy) {
      // rc is the complementarity residual s.*z - sigma mu.
      Vec rhs(n + p);
      rhs.head(n) = -rd - G.transpose() * ((z.cwiseProduct(rp) - rc).cwiseQuotient(s));
      if (p) rhs.tail(p) = -re;
      const Vec sol = lu.solve(rhs);
      dx = sol.head(n);
      dy = p ? Vec(sol.tail(p)) : Vec();
      ds = -rp - G * dx;
      dz = -(rc + z.cwiseProduct(ds)).cwiseQuotient(s);
    };
    auto max_step = [](const Vec& v, const Vec& dv) {
      double a = 1.0;
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
      return a;
    };

    Vec dx, ds, dz, dy;
    direction(s.cwiseProduct(z), dx, ds, dz, dy);
    const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
    const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(m);
    const double sigma = mu > 0.0 ? std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0) : 0.0;
    const Vec rc = s.cwiseProduct(z) + ds.cwiseProduct(dz) - Vec::Constant(m, sigma * mu);
    direction(rc, dx, ds, dz, dy);
    const double alpha = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));
    if (!std::isfinite(alpha) || !dx.allFinite() || !ds.allFinite() || !dz.allFinite()) break;
    x += alpha * dx;
    s += alpha * ds;
    z += alpha * dz;
    if (p) y += alpha * dy;
  }
  // Snap into the box; tiny interior-point slack is not a modelling error.
  res.x = x.cwiseMax(pr.lo).cwiseMin(pr.hi);
  res.objective = 0.5 * res.x.dot(pr.H * res.x) + pr.c.dot(res.x);
  double viol = 0.0;
  if (m0) viol = std::max(viol, (pr.A * res.x - pr.b).maxCoeff());
  if (p) viol = std::max(viol, (pr.E * res.x - pr.d).lpNorm<Eigen::Infinity>());
  res.max_violation = std::max(0.0, viol);
  return res;
}

}  // namespace v2g::qp
