#pragma once

// Adam with bias correction over a fixed list of parameter tensors.

#include <cmath>
#include <vector>

#include "ccv/graph.hpp"

namespace ccv {

class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::vector<Tensor<float>*> params) : params_(std::move(params)) {
    for (auto* p : params_) {
      m_.emplace_back(p->v.size(), 0.0f);
      v_.emplace_back(p->v.size(), 0.0f);
    }
  }

  // grads[i] aligned with params[i]
  void step(const std::vector<const Tensor<float>*>& grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i]->v;
      const auto& g = grads[i]->v;
      auto& m = m_[i];
      auto& v = v_[i];
      for (size_t j = 0; j < p.size(); ++j) {
        m[j] = static_cast<float>(kBeta1 * m[j] + (1.0 - kBeta1) * g[j]);
        v[j] = static_cast<float>(kBeta2 * v[j] + (1.0 - kBeta2) * static_cast<double>(g[j]) * g[j]);
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        p[j] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + kEps));
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  std::vector<Tensor<float>*> params_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  int64_t t_ = 0;
};

inline double cosine_lr(double lr0, double lr_end, int iter, int total) {
  if (total <= 1) return lr_end;
  const double t = static_cast<double>(iter) / static_cast<double>(total - 1);
  return lr_end + 0.5 * (lr0 - lr_end) * (1.0 + std::cos(t * 3.14159265358979323846));
}

}  // namespace ccv
