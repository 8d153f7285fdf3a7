// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "scengen/common.hpp"
#include "scengen/tensor.hpp"

namespace scengen {

/// Adam with bias correction. Steps every registered parameter from its
/// accumulated gradient; a zero gradient leaves the parameter untouched.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr, double beta1 = 0.5,
       double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
        eps_(eps) {
    for (const auto& p : params_) {
      if (!p.requires_grad())
        throw ConfigError("Adam: parameter without requires_grad");
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& p = params_[k];
      const std::vector<double>& g = p.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g[i];
        v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g[i] * g[i];
        const double mhat = m_[k][i] / bc1;
        const double vhat = v_[k][i] / bc2;
        p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  long step_count() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

/// RMSProp with a squared-gradient EMA: v <- rho*v + (1-rho)*g^2,
/// p <- p - lr * g / sqrt(v + eps).
class RmsProp {
 public:
  RmsProp(std::vector<Tensor> params, double lr, double decay = 0.9,
          double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), decay_(decay), eps_(eps) {
    for (const auto& p : params_) {
      if (!p.requires_grad())
        throw ConfigError("RmsProp: parameter without requires_grad");
      v_.emplace_back(p.numel(), 0.0);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    ++t_;
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& p = params_[k];
      const std::vector<double>& g = p.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        v_[k][i] = decay_ * v_[k][i] + (1.0 - decay_) * g[i] * g[i];
        p[i] -= lr_ * g[i] / std::sqrt(v_[k][i] + eps_);
      }
    }
  }

  long step_count() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> v_;
  double lr_, decay_, eps_;
  long t_ = 0;
};

/// Clamps every value of every parameter into [-c, c].
inline void clip_weights(std::vector<Tensor>& params, double c) {
  if (!(c > 0.0)) throw ConfigError("clip_weights: c must be positive");
  for (auto& p : params)
    for (std::size_t i = 0; i < p.numel(); ++i) {
      if (p[i] > c) p[i] = c;
      else if (p[i] < -c) p[i] = -c;
    }
}

}  // namespace scengen
