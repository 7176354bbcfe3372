#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "kgrl/param_store.hpp"

namespace kgrl::nn {

namespace detail {
inline void check_grads_finite(const ParamStore& store) {
  for (const auto& p : store.params())
    if (!p.grad.all_finite())
      throw std::runtime_error("non-finite gradient in parameter " + p.name);
}
}  // namespace detail

// Both optimizers minimize: they subtract lr-scaled gradients and zero the
// grad slots afterwards. Ascent callers negate gradients before stepping.
class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}

  void step(ParamStore& store) {
    detail::check_grads_finite(store);
    for (auto& p : store.params()) {
      for (size_t i = 0; i < p.value.data.size(); ++i) p.value.data[i] -= lr_ * p.grad.data[i];
      p.grad.fill(0.0);
    }
  }

 private:
  double lr_;
};

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& store) {
    detail::check_grads_finite(store);
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (auto& p : store.params()) {
      Tensor2& m = slot(m_, p);
      Tensor2& v = slot(v_, p);
      for (size_t i = 0; i < p.value.data.size(); ++i) {
        double g = p.grad.data[i];
        m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g;
        v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g * g;
        double mhat = m.data[i] / bc1;
        double vhat = v.data[i] / bc2;
        p.value.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
      p.grad.fill(0.0);
    }
  }

 private:
  Tensor2& slot(std::map<std::string, Tensor2>& state, const Param& p) {
    auto it = state.find(p.name);
    if (it == state.end()) it = state.emplace(p.name, Tensor2(p.value.rows, p.value.cols)).first;
    if (!it->second.same_shape(p.value))
      throw std::invalid_argument("optimizer state shape mismatch for " + p.name);
    return it->second;
  }

  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::map<std::string, Tensor2> m_, v_;
};

}  // namespace kgrl::nn
