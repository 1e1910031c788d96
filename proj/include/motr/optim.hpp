#pragma once

#include <cmath>
#include <vector>

#include "motr/tensor.hpp"

namespace motr {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

// Adam with decoupled weight decay. Parameters that received no gradient in
// a step are treated as having a zero gradient.
template <class T>
class AdamW {
 public:
  AdamW(std::vector<Tensor<T>> params, AdamWConfig cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
    }
  }

  double grad_norm() const {
    double total = 0;
    for (const auto& p : params_)
      for (T g : p.grad()) total += static_cast<double>(g) * static_cast<double>(g);
    return std::sqrt(total);
  }

  // Scales gradients so their global norm is at most max_norm. Returns the
  // norm before clipping.
  double clip_grad_norm(double max_norm) {
    const double norm = grad_norm();
    if (max_norm > 0 && norm > max_norm) {
      const double s = max_norm / (norm + 1e-12);
      for (auto& p : params_)
        for (auto& g : p.node().grad) g = static_cast<T>(g * s);
    }
    return norm;
  }

  void step(double lr) {
    ++t_;
    const double c1 = 1 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      auto grad = p.grad();
      auto data = p.mutable_data();
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
        m_[k][i] = cfg_.beta1 * m_[k][i] + (1 - cfg_.beta1) * g;
        v_[k][i] = cfg_.beta2 * v_[k][i] + (1 - cfg_.beta2) * g * g;
        const double update = (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + cfg_.eps);
        const double w = static_cast<double>(data[i]);
        data[i] = static_cast<T>(w - lr * update - lr * cfg_.weight_decay * w);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::size_t steps() const { return t_; }

 private:
  std::vector<Tensor<T>> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace motr
