#pragma once

#include <vector>

#include "tdaug/nn/layers.hpp"

namespace tdaug::nn {

// Adam with bias correction. State is positional: the optimizer must always
// be stepped with the same parameter list it was created for.
template <typename T>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(T lr = T(1e-3), T beta1 = T(0.9), T beta2 = T(0.999),
                         T eps = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<ParamRef<T>>& params) {
    if (m_.empty()) {
      m_.reserve(params.size());
      v_.reserve(params.size());
      for (const auto& p : params) {
        m_.push_back(MatrixX<T>::Zero(p.value->rows(), p.value->cols()));
        v_.push_back(MatrixX<T>::Zero(p.value->rows(), p.value->cols()));
      }
    }
    ++t_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const MatrixX<T>& g = *params[i].grad;
      m_[i] = beta1_ * m_[i] + (T(1) - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (T(1) - beta2_) * g.cwiseProduct(g);
      params[i].value->array() -=
          lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
    }
  }

  T learning_rate() const { return lr_; }

 private:
  T lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<MatrixX<T>> m_, v_;
};

}  // namespace tdaug::nn
