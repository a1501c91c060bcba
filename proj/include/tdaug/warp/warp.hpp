#pragma once

#include <stdexcept>
#include <vector>

#include "tdaug/core/tensor.hpp"

namespace tdaug {

// Dense per-pixel displacement, pixel units, (dy, dx) per pixel. Consumed by
// backward warping: output(p) = bilinear_sample(input, p + v(p)).
template <typename T>
struct DeformationFieldT {
  MatrixX<T> dy, dx;

  DeformationFieldT() = default;
  DeformationFieldT(Eigen::Index h, Eigen::Index w)
      : dy(MatrixX<T>::Zero(h, w)), dx(MatrixX<T>::Zero(h, w)) {}

  Eigen::Index rows() const { return dy.rows(); }
  Eigen::Index cols() const { return dy.cols(); }
  bool all_finite() const { return dy.allFinite() && dx.allFinite(); }
};

// Per-pixel additive intensity offsets in [-1, 1].
template <typename T>
struct IntensityFieldT {
  MatrixX<T> delta;

  IntensityFieldT() = default;
  explicit IntensityFieldT(MatrixX<T> d) : delta(std::move(d)) {}
  IntensityFieldT(Eigen::Index h, Eigen::Index w) : delta(MatrixX<T>::Zero(h, w)) {}
};

using DeformationField = DeformationFieldT<float>;
using IntensityField = IntensityFieldT<float>;

enum class PadMode { Zeros, Border };

namespace detail {

template <typename T>
inline T sample_at(const MatrixX<T>& img, Eigen::Index y, Eigen::Index x, PadMode pad) {
  if (pad == PadMode::Border) {
    y = std::min(std::max<Eigen::Index>(y, 0), img.rows() - 1);
    x = std::min(std::max<Eigen::Index>(x, 0), img.cols() - 1);
    return img(y, x);
  }
  if (y < 0 || y >= img.rows() || x < 0 || x >= img.cols()) return T(0);
  return img(y, x);
}

// Corner values and interpolation weights for one sample point.
template <typename T>
struct BilinearTap {
  Eigen::Index y0, x0;
  T fy, fx;
  T v00, v01, v10, v11;
};

template <typename T>
inline BilinearTap<T> bilinear_tap(const MatrixX<T>& img, T sy, T sx, PadMode pad) {
  BilinearTap<T> t;
  const T fy0 = std::floor(sy);
  const T fx0 = std::floor(sx);
  t.y0 = static_cast<Eigen::Index>(fy0);
  t.x0 = static_cast<Eigen::Index>(fx0);
  t.fy = sy - fy0;
  t.fx = sx - fx0;
  t.v00 = sample_at(img, t.y0, t.x0, pad);
  t.v01 = sample_at(img, t.y0, t.x0 + 1, pad);
  t.v10 = sample_at(img, t.y0 + 1, t.x0, pad);
  t.v11 = sample_at(img, t.y0 + 1, t.x0 + 1, pad);
  return t;
}

template <typename T>
inline T bilinear_value(const BilinearTap<T>& t) {
  return (T(1) - t.fy) * ((T(1) - t.fx) * t.v00 + t.fx * t.v01) +
         t.fy * ((T(1) - t.fx) * t.v10 + t.fx * t.v11);
}

}  // namespace detail

// Backward warp with bilinear interpolation. Out-of-bounds samples use `pad`
// (zero fill by default). Piecewise linear in v between integer offsets, so
// exactly differentiable away from lattice lines.
template <typename T>
MatrixX<T> apply_deformation(const MatrixX<T>& image, const DeformationFieldT<T>& field,
                             PadMode pad = PadMode::Zeros) {
  if (field.rows() != image.rows() || field.cols() != image.cols())
    throw std::invalid_argument("apply_deformation: field shape mismatch");
  if (!field.all_finite())
    throw std::invalid_argument("apply_deformation: non-finite field");

  MatrixX<T> out(image.rows(), image.cols());
  for (Eigen::Index y = 0; y < image.rows(); ++y) {
    for (Eigen::Index x = 0; x < image.cols(); ++x) {
      const T sy = static_cast<T>(y) + field.dy(y, x);
      const T sx = static_cast<T>(x) + field.dx(y, x);
      out(y, x) = detail::bilinear_value(detail::bilinear_tap(image, sy, sx, pad));
    }
  }
  return out;
}

// Accumulates d(sum(grad_out .* warp(image, v))) into grad_field and/or
// grad_image. Either output may be null. grad_field uses the exact derivative
// of the bilinear kernel w.r.t. the sample point; grad_image scatters the
// interpolation weights.
template <typename T>
void apply_deformation_backward(const MatrixX<T>& image, const DeformationFieldT<T>& field,
                                const MatrixX<T>& grad_out, PadMode pad,
                                DeformationFieldT<T>* grad_field, MatrixX<T>* grad_image) {
  if (field.rows() != image.rows() || field.cols() != image.cols())
    throw std::invalid_argument("apply_deformation_backward: field shape mismatch");
  const Eigen::Index h = image.rows(), w = image.cols();

  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      const T g = grad_out(y, x);
      const T sy = static_cast<T>(y) + field.dy(y, x);
      const T sx = static_cast<T>(x) + field.dx(y, x);
      const auto t = detail::bilinear_tap(image, sy, sx, pad);

      if (grad_field) {
        const T d_dy = (T(1) - t.fx) * (t.v10 - t.v00) + t.fx * (t.v11 - t.v01);
        const T d_dx = (T(1) - t.fy) * (t.v01 - t.v00) + t.fy * (t.v11 - t.v10);
        grad_field->dy(y, x) += g * d_dy;
        grad_field->dx(y, x) += g * d_dx;
      }
      if (grad_image) {
        const auto add = [&](Eigen::Index yy, Eigen::Index xx, T wgt) {
          if (pad == PadMode::Border) {
            yy = std::min(std::max<Eigen::Index>(yy, 0), h - 1);
            xx = std::min(std::max<Eigen::Index>(xx, 0), w - 1);
          } else if (yy < 0 || yy >= h || xx < 0 || xx >= w) {
            return;
          }
          (*grad_image)(yy, xx) += g * wgt;
        };
        add(t.y0, t.x0, (T(1) - t.fy) * (T(1) - t.fx));
        add(t.y0, t.x0 + 1, (T(1) - t.fy) * t.fx);
        add(t.y0 + 1, t.x0, t.fy * (T(1) - t.fx));
        add(t.y0 + 1, t.x0 + 1, t.fy * t.fx);
      }
    }
  }
}

// One-hot (or soft) label maps are warped channel-wise with zero padding,
// clamped to [0,1] and renormalized per pixel. Pixels whose sample point fell
// fully outside the frame (channel sum < eps) become background.
inline constexpr double kLabelRenormEps = 1e-6;

template <typename T>
std::vector<MatrixX<T>> apply_deformation_to_label(const std::vector<MatrixX<T>>& label_onehot,
                                                   const DeformationFieldT<T>& field) {
  if (label_onehot.empty())
    throw std::invalid_argument("apply_deformation_to_label: no channels");
  const Eigen::Index h = label_onehot[0].rows(), w = label_onehot[0].cols();
  for (const auto& ch : label_onehot)
    if (ch.rows() != h || ch.cols() != w)
      throw std::invalid_argument("apply_deformation_to_label: channel shape mismatch");

  std::vector<MatrixX<T>> out;
  out.reserve(label_onehot.size());
  for (const auto& ch : label_onehot)
    out.push_back(apply_deformation(ch, field, PadMode::Zeros));

  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      T sum = T(0);
      for (auto& ch : out) {
        T v = ch(y, x);
        v = std::min(std::max(v, T(0)), T(1));
        ch(y, x) = v;
        sum += v;
      }
      if (sum < T(kLabelRenormEps)) {
        for (std::size_t c = 0; c < out.size(); ++c) out[c](y, x) = (c == 0) ? T(1) : T(0);
      } else {
        for (auto& ch : out) ch(y, x) /= sum;
      }
    }
  }
  return out;
}

// Gradient of the warped+renormalized label w.r.t. the field. grad_out holds
// d(loss)/d(warped label channel); the renormalization Jacobian is applied
// before routing through each channel warp. Background-fallback pixels are
// constant in v and contribute nothing.
template <typename T>
void apply_deformation_to_label_backward(const std::vector<MatrixX<T>>& label_onehot,
                                         const DeformationFieldT<T>& field,
                                         const std::vector<MatrixX<T>>& grad_out,
                                         DeformationFieldT<T>* grad_field) {
  const Eigen::Index h = label_onehot[0].rows(), w = label_onehot[0].cols();
  const std::size_t C = label_onehot.size();

  std::vector<MatrixX<T>> raw;
  raw.reserve(C);
  for (const auto& ch : label_onehot)
    raw.push_back(apply_deformation(ch, field, PadMode::Zeros));

  // d(loss)/d(raw warped channel): quotient rule of q_c / sum(q).
  std::vector<MatrixX<T>> grad_raw(C, MatrixX<T>::Zero(h, w));
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      T sum = T(0);
      for (const auto& ch : raw) sum += std::min(std::max(ch(y, x), T(0)), T(1));
      if (sum < T(kLabelRenormEps)) continue;
      T dot = T(0);
      for (std::size_t c = 0; c < C; ++c) {
        const T t = std::min(std::max(raw[c](y, x), T(0)), T(1)) / sum;
        dot += grad_out[c](y, x) * t;
      }
      // The clamp is inactive for valid soft labels (bilinear keeps channels
      // in [0,1]), so the gradient passes straight through it.
      for (std::size_t c = 0; c < C; ++c)
        grad_raw[c](y, x) = (grad_out[c](y, x) - dot) / sum;
    }
  }
  for (std::size_t c = 0; c < C; ++c)
    apply_deformation_backward(label_onehot[c], field, grad_raw[c], PadMode::Zeros, grad_field,
                               static_cast<MatrixX<T>*>(nullptr));
}

// Additive intensity transform; no clipping so gradients never die, and the
// label is untouched by construction.
template <typename T>
MatrixX<T> apply_intensity(const MatrixX<T>& image, const IntensityFieldT<T>& field) {
  if (field.delta.rows() != image.rows() || field.delta.cols() != image.cols())
    throw std::invalid_argument("apply_intensity: field shape mismatch");
  return image + field.delta;
}

// Deformation first, additive intensity second; the label carries only the
// deformation.
template <typename T>
std::pair<MatrixX<T>, std::vector<MatrixX<T>>> compose_transforms(
    const MatrixX<T>& image, const std::vector<MatrixX<T>>& label_onehot,
    const DeformationFieldT<T>& field_v, const IntensityFieldT<T>& field_i) {
  MatrixX<T> warped = apply_deformation(image, field_v, PadMode::Zeros);
  std::vector<MatrixX<T>> label = apply_deformation_to_label(label_onehot, field_v);
  return {apply_intensity(warped, field_i), std::move(label)};
}

}  // namespace tdaug
