#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace tdaug {

template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Batched multi-channel feature maps. `data` is (channels x batch*height*width),
// column index ((i*h + y)*w + x); a full column (all channels of one pixel) is
// contiguous in memory, which makes im2col and per-pixel gathers cheap.
template <typename T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  MatrixX<T> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(MatrixX<T>::Zero(c_, static_cast<Eigen::Index>(n_) * h_ * w_)) {}

  Eigen::Index cols() const { return static_cast<Eigen::Index>(n) * h * w; }

  Eigen::Index col(int i, int y, int x) const {
    return (static_cast<Eigen::Index>(i) * h + y) * w + x;
  }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  Tensor4 zeros_like() const { return Tensor4(n, c, h, w); }

  MatrixX<T> channel(int i, int ch) const {
    MatrixX<T> img(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img(y, x) = data(ch, col(i, y, x));
    return img;
  }

  void set_channel(int i, int ch, const MatrixX<T>& img) {
    if (img.rows() != h || img.cols() != w)
      throw std::invalid_argument("set_channel: image shape mismatch");
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) data(ch, col(i, y, x)) = img(y, x);
  }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(n, c, h, w);
    out.data = data.template cast<U>();
    return out;
  }
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

}  // namespace tdaug
