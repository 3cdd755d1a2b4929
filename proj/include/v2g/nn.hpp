#pragma once

// Fully connected network with ReLU hidden layers and one linear output,
// parameters stored in a single flat vector so that the optimizer, the
// checkpoint and the gradient check can all treat them uniformly.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "v2g/error.hpp"

namespace v2g::nn {

using Vec = Eigen::VectorXd;
using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

enum class InitScheme { he_normal = 0, zeros = 1 };

class Mlp {
 public:
  Mlp() = default;

  // sizes = {input, hidden..., output}
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ConfigError("network needs an input and an output layer");
    for (int s : sizes_)
      if (s < 1) throw ConfigError("layer sizes must be positive");
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(n);
      n += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    params_ = Vec::Zero(static_cast<Eigen::Index>(n));
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  Eigen::Index num_params() const { return params_.size(); }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  // Hidden layers get He-normal weights; the output layer is scaled by
  // `out_gain` so a fresh network starts close to zero output.
  template <typename Rng>
  void init(Rng& rng, InitScheme scheme, double out_gain = 0.01) {
    params_.setZero();
    if (scheme == InitScheme::zeros) return;
    std::normal_distribution<double> unit(0.0, 1.0);
    for (int l = 0; l < num_layers(); ++l) {
      auto w = weights(l);
      const double std = std::sqrt(2.0 / sizes_[l]) * (l + 1 == num_layers() ? out_gain : 1.0);
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = std * unit(rng);
    }
  }

  MatMap weights(int l) {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  ConstMatMap weights(int l) const {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<Vec> bias(int l) {
    return {params_.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]};
  }
  Eigen::Map<const Vec> bias(int l) const {
    return {params_.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]};
  }

  struct Cache {
    std::vector<Vec> act;  // act[0] = input, act[l+1] = output of layer l
  };

  Vec forward(const Vec& x, Cache* cache = nullptr) const {
    if (x.size() != sizes_.front()) throw DomainError("network input has the wrong size");
    Vec a = x;
    if (cache) {
      cache->act.clear();
      cache->act.push_back(a);
    }
    for (int l = 0; l < num_layers(); ++l) {
      Vec z = weights(l) * a + bias(l);
      if (l + 1 < num_layers()) z = z.cwiseMax(0.0);
      a = std::move(z);
      if (cache) cache->act.push_back(a);
    }
    return a;
  }

  double forward_scalar(const Vec& x, Cache* cache = nullptr) const {
    return forward(x, cache)(0);
  }

  // Accumulates d(out . dout)/d(params) into grad.
  void backward(const Cache& cache, const Vec& dout, Vec& grad) const {
    if (grad.size() != params_.size()) grad = Vec::Zero(params_.size());
    Vec delta = dout;
    for (int l = num_layers() - 1; l >= 0; --l) {
      const Vec& in = cache.act[l];
      MatMap gw(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
      Eigen::Map<Vec> gb(grad.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]);
      gw.noalias() += delta * in.transpose();
      gb += delta;
      if (l == 0) break;
      Vec back = weights(l).transpose() * delta;
      for (Eigen::Index i = 0; i < back.size(); ++i)
        if (in(i) <= 0.0) back(i) = 0.0;
      delta = std::move(back);
    }
  }

  void backward_scalar(const Cache& cache, double dout, Vec& grad) const {
    Vec d(1);
    d(0) = dout;
    backward(cache, d, grad);
  }

  bool finite() const { return params_.allFinite(); }
  double max_abs() const { return params_.size() ? params_.cwiseAbs().maxCoeff() : 0.0; }

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  Vec params_;
};

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct Adam {
  AdamParams p;
  Vec m, v;
  long long t = 0;

  Adam() = default;
  Adam(AdamParams params, Eigen::Index n) : p(params), m(Vec::Zero(n)), v(Vec::Zero(n)) {}

  // One descent step on `params` along `grad`.
  void step(Vec& params, const Vec& grad) {
    if (m.size() != params.size()) {
      m = Vec::Zero(params.size());
      v = Vec::Zero(params.size());
    }
    ++t;
    m = p.beta1 * m + (1.0 - p.beta1) * grad;
    v = p.beta2 * v + (1.0 - p.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(t));
    const double step = p.lr * std::sqrt(c2) / c1;
    params.array() -= step * m.array() / (v.array().sqrt() + p.eps * std::sqrt(c2));
  }
};

// Largest relative error between backprop and central differences of the
// scalar output at x, over all parameters. Relative error uses
// |a - b| / max(|a| + |b|, floor).
inline double gradient_check(Mlp net, const Vec& x, double h = 1e-6, double floor = 1e-8) {
  Mlp::Cache cache;
  net.forward_scalar(x, &cache);
  Vec grad = Vec::Zero(net.num_params());
  net.backward_scalar(cache, 1.0, grad);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < net.num_params(); ++i) {
    const double keep = net.params()(i);
    net.params()(i) = keep + h;
    const double up = net.forward_scalar(x);
    net.params()(i) = keep - h;
    const double down = net.forward_scalar(x);
    net.params()(i) = keep;
    const double fd = (up - down) / (2.0 * h);
    const double err = std::abs(fd - grad(i)) / std::max(std::abs(fd) + std::abs(grad(i)), floor);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace v2g::nn
