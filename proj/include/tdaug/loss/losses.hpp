#pragma once

#include <stdexcept>
#include <vector>

#include "tdaug/core/tensor.hpp"
#include "tdaug/warp/warp.hpp"

namespace tdaug {

// Per-class weights: background (class 0) gets 0.1, the remaining 0.9 is split
// equally among the foreground classes.
template <typename T>
VectorX<T> default_class_weights(int num_classes) {
  if (num_classes < 2) throw std::invalid_argument("class weights need >= 2 classes");
  VectorX<T> w(num_classes);
  w(0) = T(0.1);
  const T fg = T(0.9) / T(num_classes - 1);
  for (int c = 1; c < num_classes; ++c) w(c) = fg;
  return w;
}

namespace detail {

// Column-wise log-softmax, max-shifted.
template <typename T>
MatrixX<T> log_softmax(const MatrixX<T>& logits) {
  MatrixX<T> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const T m = logits.col(j).maxCoeff();
    T sum = T(0);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) sum += std::exp(logits(i, j) - m);
    const T lse = m + std::log(sum);
    out.col(j) = logits.col(j).array() - lse;
  }
  return out;
}

}  // namespace detail

// Weighted cross entropy over per-pixel class logits against soft targets:
// mean over pixels of -sum_c w_c * t_c * log softmax(logits)_c.
// Optionally fills d(loss)/d(logits) and d(loss)/d(target).
template <typename T>
T weighted_cross_entropy(const Tensor4<T>& logits, const Tensor4<T>& target,
                         const VectorX<T>& class_weights, Tensor4<T>* grad_logits = nullptr,
                         Tensor4<T>* grad_target = nullptr) {
  if (!logits.same_shape(target))
    throw std::invalid_argument("weighted_cross_entropy: logits/target shape mismatch");
  if (class_weights.size() != logits.c)
    throw std::invalid_argument("weighted_cross_entropy: class weight count mismatch");
  if (!logits.data.allFinite())
    throw std::invalid_argument("weighted_cross_entropy: non-finite logits");

  const Eigen::Index P = logits.cols();
  const MatrixX<T> logp = detail::log_softmax(logits.data);
  const T inv_p = T(1) / static_cast<T>(P);

  T loss = T(0);
  for (Eigen::Index j = 0; j < P; ++j)
    for (Eigen::Index c = 0; c < logits.c; ++c)
      loss -= class_weights(c) * target.data(c, j) * logp(c, j);
  loss *= inv_p;

  if (grad_logits) {
    *grad_logits = logits.zeros_like();
    for (Eigen::Index j = 0; j < P; ++j) {
      T wsum = T(0);
      for (Eigen::Index c = 0; c < logits.c; ++c)
        wsum += class_weights(c) * target.data(c, j);
      for (Eigen::Index k = 0; k < logits.c; ++k) {
        const T p_k = std::exp(logp(k, j));
        grad_logits->data(k, j) =
            inv_p * (p_k * wsum - class_weights(k) * target.data(k, j));
      }
    }
  }
  if (grad_target) {
    *grad_target = target.zeros_like();
    for (Eigen::Index j = 0; j < P; ++j)
      for (Eigen::Index c = 0; c < logits.c; ++c)
        grad_target->data(c, j) = -inv_p * class_weights(c) * logp(c, j);
  }
  return loss;
}

// Mean two-class cross entropy of (2 x batch) logits against a single class
// index. grad, when requested, is d(mean loss)/d(logits).
template <typename T>
T two_class_cross_entropy(const MatrixX<T>& logits, int target_class,
                          MatrixX<T>* grad = nullptr) {
  if (logits.rows() != 2) throw std::invalid_argument("two_class_cross_entropy: need 2 logits");
  const Eigen::Index B = logits.cols();
  const MatrixX<T> logp = detail::log_softmax(logits);
  T loss = T(0);
  for (Eigen::Index j = 0; j < B; ++j) loss -= logp(target_class, j);
  loss /= static_cast<T>(B);
  if (grad) {
    grad->resize(2, B);
    for (Eigen::Index j = 0; j < B; ++j)
      for (int k = 0; k < 2; ++k)
        (*grad)(k, j) = (std::exp(logp(k, j)) - (k == target_class ? T(1) : T(0))) /
                        static_cast<T>(B);
  }
  return loss;
}

// Discriminator objective: push real toward class 1, generated toward class 0.
template <typename T>
T discriminator_loss(const MatrixX<T>& d_real_logits, const MatrixX<T>& d_fake_logits,
                     MatrixX<T>* grad_real = nullptr, MatrixX<T>* grad_fake = nullptr) {
  return two_class_cross_entropy(d_real_logits, 1, grad_real) +
         two_class_cross_entropy(d_fake_logits, 0, grad_fake);
}

// Generator-side adversarial term. The non-saturating form maximizes
// log D(fake); the saturating form minimizes log(1 - D(fake)) literally.
template <typename T>
T generator_adversarial_loss(const MatrixX<T>& d_fake_logits, bool non_saturating = true,
                             MatrixX<T>* grad_fake = nullptr) {
  if (non_saturating) return two_class_cross_entropy(d_fake_logits, 1, grad_fake);
  const T loss = -two_class_cross_entropy(d_fake_logits, 0, grad_fake);
  if (grad_fake) *grad_fake = -*grad_fake;
  return loss;
}

template <typename T>
std::pair<T, T> adversarial_losses(const MatrixX<T>& d_real_logits,
                                   const MatrixX<T>& d_fake_logits,
                                   bool non_saturating = true) {
  const T loss_d = discriminator_loss<T>(d_real_logits, d_fake_logits);
  const T loss_g = generator_adversarial_loss<T>(d_fake_logits, non_saturating);
  return {loss_d, loss_g};
}

// Negative L1 norm of a field; minimizing it pushes the generator toward
// large transformations.
template <typename T>
T large_deviation_loss(const DeformationFieldT<T>& field) {
  if (!field.all_finite()) throw std::invalid_argument("large_deviation_loss: non-finite field");
  return -(field.dy.array().abs().sum() + field.dx.array().abs().sum());
}

template <typename T>
T large_deviation_loss(const IntensityFieldT<T>& field) {
  if (!field.delta.allFinite())
    throw std::invalid_argument("large_deviation_loss: non-finite field");
  return -field.delta.array().abs().sum();
}

// d(-|v|_1)/dv, scaled by `scale` (used for the per-pixel-mean variant).
template <typename T>
void large_deviation_grad(const DeformationFieldT<T>& field, T scale,
                          DeformationFieldT<T>* grad) {
  grad->dy.array() -= scale * field.dy.array().sign();
  grad->dx.array() -= scale * field.dx.array().sign();
}

template <typename T>
void large_deviation_grad(const IntensityFieldT<T>& field, T scale, MatrixX<T>* grad_delta) {
  grad_delta->array() -= scale * field.delta.array().sign();
}

template <typename T>
struct RegularizationWeights {
  T lambda_adv = T(1);
  T lambda_ld = T(1e-3);
};

template <typename T>
T regularization_loss(T adv_g, T ld, const RegularizationWeights<T>& w) {
  return w.lambda_adv * adv_g + w.lambda_ld * ld;
}

template <typename T>
T task_driven_objective(T seg_loss_on_union, T reg) {
  return seg_loss_on_union + reg;
}

}  // namespace tdaug
