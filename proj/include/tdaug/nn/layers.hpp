#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "tdaug/core/random.hpp"
#include "tdaug/core/tensor.hpp"

namespace tdaug::nn {

// Forward modes: Train uses batch statistics and updates running stats; Grad
// uses batch statistics without touching them (for steps that only need
// gradients through a frozen network); Eval uses running stats and is
// deterministic.
enum class Mode { Train, Grad, Eval };

template <typename T>
struct ParamRef {
  std::string name;
  MatrixX<T>* value;
  MatrixX<T>* grad;
};

template <typename T>
struct BufferRef {
  std::string name;
  MatrixX<T>* value;
};

template <typename T>
inline void init_truncated_normal(MatrixX<T>& m, RandomStream& rng, double stddev = 0.02) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      m(i, j) = static_cast<T>(rng.truncated_normal(stddev));
}

// ---------------------------------------------------------------------------
// Conv2d: im2col + GEMM. Weight layout (out_ch x k*k*in_ch), column block of
// the patch matrix is contiguous per output pixel.
// ---------------------------------------------------------------------------
template <typename T>
class Conv2d {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int ksize, int stride = 1, int pad = -1)
      : name_(std::move(name)), in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride),
        pad_(pad < 0 ? ksize / 2 : pad) {
    weight_ = MatrixX<T>::Zero(out_ch, k_ * k_ * in_ch);
    bias_ = MatrixX<T>::Zero(out_ch, 1);
    grad_weight_ = weight_;
    grad_bias_ = bias_;
  }

  void init(RandomStream& rng) { init_truncated_normal(weight_, rng); bias_.setZero(); }

  int out_size(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

  Tensor4<T> forward(const Tensor4<T>& x) {
    in_shape_ = {x.n, x.c, x.h, x.w};
    const int ho = out_size(x.h), wo = out_size(x.w);
    im2col(x, ho, wo);
    Tensor4<T> out(x.n, out_ch_, ho, wo);
    out.data.noalias() = weight_ * cols_;
    out.data.colwise() += bias_.col(0);
    return out;
  }

  // Returns grad w.r.t. input; accumulates parameter grads.
  Tensor4<T> backward(const Tensor4<T>& grad_out) {
    grad_weight_.noalias() += grad_out.data * cols_.transpose();
    grad_bias_.col(0).noalias() += grad_out.data.rowwise().sum();
    MatrixX<T> grad_cols = weight_.transpose() * grad_out.data;
    return col2im(grad_cols, grad_out.h, grad_out.w);
  }

  void collect(std::vector<ParamRef<T>>& out) {
    out.push_back({name_ + ".weight", &weight_, &grad_weight_});
    out.push_back({name_ + ".bias", &bias_, &grad_bias_});
  }
  void collect_buffers(std::vector<BufferRef<T>>&) {}

 private:
  void im2col(const Tensor4<T>& x, int ho, int wo) {
    const int c = x.c, h = x.h, w = x.w;
    const Eigen::Index kkcc = static_cast<Eigen::Index>(k_) * k_ * c;
    cols_.resize(kkcc, static_cast<Eigen::Index>(x.n) * ho * wo);
    const T* src = x.data.data();
    T* dst = cols_.data();

    if (stride_ == 1 && wo == w) {
      // stride-1 SAME convolution: within one output row, tap (ky,kx) reads a
      // contiguous run of input pixels, so each (row, tap) is one memcpy
      cols_.setZero();
      for (int i = 0; i < x.n; ++i) {
        for (int oy = 0; oy < ho; ++oy) {
          T* row_base = dst + (static_cast<Eigen::Index>(i) * ho + oy) * wo * kkcc;
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy - pad_ + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int dx = kx - pad_;
              const int ox_lo = std::max(0, -dx);
              const int ox_hi = std::min(wo, w - dx);
              if (ox_lo >= ox_hi) continue;
              const Eigen::Index p = (static_cast<Eigen::Index>(i) * h + iy) * w + ox_lo + dx;
              // strided destination: one tap slot per output pixel
              T* out = row_base + static_cast<Eigen::Index>(ox_lo) * kkcc +
                       (ky * k_ + kx) * c;
              const T* in = src + p * c;
              for (int ox = ox_lo; ox < ox_hi; ++ox) {
                std::memcpy(out, in, sizeof(T) * c);
                out += kkcc;
                in += c;
              }
            }
          }
        }
      }
      return;
    }

    for (int i = 0; i < x.n; ++i) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          T* colp = dst;
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ - pad_ + ky;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ox * stride_ - pad_ + kx;
              if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
                const Eigen::Index p = (static_cast<Eigen::Index>(i) * h + iy) * w + ix;
                std::memcpy(colp, src + p * c, sizeof(T) * c);
              } else {
                std::memset(colp, 0, sizeof(T) * c);
              }
              colp += c;
            }
          }
          dst += kkcc;
        }
      }
    }
  }

  // Gather form of the im2col adjoint: each input pixel sums its uses, which
  // keeps the loop write-disjoint.
  Tensor4<T> col2im(const MatrixX<T>& grad_cols, int ho, int wo) const {
    const auto [n, c, h, w] = in_shape_;
    Tensor4<T> gin(n, c, h, w);
    const Eigen::Index kkcc = static_cast<Eigen::Index>(k_) * k_ * c;
    const T* src = grad_cols.data();
    T* dst = gin.data.data();
    for (int i = 0; i < n; ++i) {
      for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
          T* pix = dst + ((static_cast<Eigen::Index>(i) * h + iy) * w + ix) * c;
          for (int ky = 0; ky < k_; ++ky) {
            const int oy_num = iy + pad_ - ky;
            if (oy_num < 0 || oy_num % stride_ != 0) continue;
            const int oy = oy_num / stride_;
            if (oy >= ho) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int ox_num = ix + pad_ - kx;
              if (ox_num < 0 || ox_num % stride_ != 0) continue;
              const int ox = ox_num / stride_;
              if (ox >= wo) continue;
              const Eigen::Index j = (static_cast<Eigen::Index>(i) * ho + oy) * wo + ox;
              const T* colp = src + j * kkcc + (ky * k_ + kx) * c;
              for (int cc = 0; cc < c; ++cc) pix[cc] += colp[cc];
            }
          }
        }
      }
    }
    return gin;
  }

  std::string name_;
  int in_ch_, out_ch_, k_, stride_, pad_;
  MatrixX<T> weight_, bias_, grad_weight_, grad_bias_;
  MatrixX<T> cols_;
  struct {
    int n, c, h, w;
  } in_shape_{};
};

// ---------------------------------------------------------------------------
// BatchNorm over channels. Normalization statistics are per channel across
// batch and spatial positions.
// ---------------------------------------------------------------------------
template <typename T>
class BatchNorm2d {
 public:
  explicit BatchNorm2d(std::string name, int channels, T momentum = T(0.9), T eps = T(1e-5))
      : name_(std::move(name)), c_(channels), momentum_(momentum), eps_(eps) {
    gamma_ = MatrixX<T>::Ones(channels, 1);
    beta_ = MatrixX<T>::Zero(channels, 1);
    grad_gamma_ = MatrixX<T>::Zero(channels, 1);
    grad_beta_ = MatrixX<T>::Zero(channels, 1);
    running_mean_ = MatrixX<T>::Zero(channels, 1);
    running_var_ = MatrixX<T>::Ones(channels, 1);
  }

  Tensor4<T> forward(const Tensor4<T>& x, Mode mode) {
    last_mode_ = mode;
    const Eigen::Index N = x.cols();
    Tensor4<T> out(x.n, x.c, x.h, x.w);
    if (mode == Mode::Eval) {
      eval_scale_.resize(c_, 1);
      for (int ch = 0; ch < c_; ++ch) {
        const T inv = T(1) / std::sqrt(running_var_(ch, 0) + eps_);
        eval_scale_(ch, 0) = gamma_(ch, 0) * inv;
        out.data.row(ch) =
            (x.data.row(ch).array() - running_mean_(ch, 0)) * eval_scale_(ch, 0) +
            beta_(ch, 0);
      }
      return out;
    }
    mean_ = x.data.rowwise().mean();
    MatrixX<T> centered = x.data.colwise() - mean_.col(0);
    var_ = centered.array().square().matrix().rowwise().mean();
    inv_std_.resize(c_, 1);
    for (int ch = 0; ch < c_; ++ch) inv_std_(ch, 0) = T(1) / std::sqrt(var_(ch, 0) + eps_);
    xhat_ = centered.array().colwise() * inv_std_.col(0).array();
    out.data = (xhat_.array().colwise() * gamma_.col(0).array()).colwise() + beta_.col(0).array();
    if (mode == Mode::Train) {
      const T unbias = N > 1 ? static_cast<T>(N) / static_cast<T>(N - 1) : T(1);
      running_mean_ = momentum_ * running_mean_ + (T(1) - momentum_) * mean_;
      running_var_ = momentum_ * running_var_ + (T(1) - momentum_) * (var_ * unbias);
    }
    return out;
  }

  Tensor4<T> backward(const Tensor4<T>& grad_out) {
    Tensor4<T> gin(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
    if (last_mode_ == Mode::Eval) {
      gin.data = grad_out.data.array().colwise() * eval_scale_.col(0).array();
      return gin;
    }
    const Eigen::Index N = grad_out.cols();
    MatrixX<T> gg = (grad_out.data.array() * xhat_.array()).rowwise().sum();
    MatrixX<T> gb = grad_out.data.rowwise().sum();
    grad_gamma_ += gg;
    grad_beta_ += gb;
    const T invN = T(1) / static_cast<T>(N);
    for (int ch = 0; ch < c_; ++ch) {
      const T a = gamma_(ch, 0) * inv_std_(ch, 0) * invN;
      gin.data.row(ch) = a * (static_cast<T>(N) * grad_out.data.row(ch).array() - gb(ch, 0) -
                              xhat_.row(ch).array() * gg(ch, 0));
    }
    return gin;
  }

  void collect(std::vector<ParamRef<T>>& out) {
    out.push_back({name_ + ".gamma", &gamma_, &grad_gamma_});
    out.push_back({name_ + ".beta", &beta_, &grad_beta_});
  }
  void collect_buffers(std::vector<BufferRef<T>>& out) {
    out.push_back({name_ + ".running_mean", &running_mean_});
    out.push_back({name_ + ".running_var", &running_var_});
  }

 private:
  std::string name_;
  int c_;
  T momentum_, eps_;
  MatrixX<T> gamma_, beta_, grad_gamma_, grad_beta_;
  MatrixX<T> running_mean_, running_var_;
  MatrixX<T> mean_, var_, inv_std_, xhat_, eval_scale_;
  Mode last_mode_ = Mode::Train;
};

// ---------------------------------------------------------------------------
// Elementwise activations.
// ---------------------------------------------------------------------------
template <typename T>
class ReLU {
 public:
  Tensor4<T> forward(const Tensor4<T>& x) {
    mask_ = (x.data.array() > T(0)).template cast<T>();
    Tensor4<T> out = x;
    out.data = x.data.cwiseMax(T(0));
    return out;
  }
  Tensor4<T> backward(const Tensor4<T>& g) {
    Tensor4<T> gin = g;
    gin.data = g.data.array() * mask_.array();
    return gin;
  }

 private:
  MatrixX<T> mask_;
};

template <typename T>
class LeakyReLU {
 public:
  explicit LeakyReLU(T slope = T(0.2)) : slope_(slope) {}
  Tensor4<T> forward(const Tensor4<T>& x) {
    mask_ = (x.data.array() > T(0)).template cast<T>();
    Tensor4<T> out = x;
    out.data = x.data.array() * (mask_.array() + slope_ * (T(1) - mask_.array()));
    return out;
  }
  Tensor4<T> backward(const Tensor4<T>& g) {
    Tensor4<T> gin = g;
    gin.data = g.data.array() * (mask_.array() + slope_ * (T(1) - mask_.array()));
    return gin;
  }

 private:
  T slope_;
  MatrixX<T> mask_;
};

template <typename T>
class Tanh {
 public:
  Tensor4<T> forward(const Tensor4<T>& x) {
    out_ = x.data.array().tanh();
    Tensor4<T> out = x;
    out.data = out_;
    return out;
  }
  Tensor4<T> backward(const Tensor4<T>& g) {
    Tensor4<T> gin = g;
    gin.data = g.data.array() * (T(1) - out_.array().square());
    return gin;
  }

 private:
  MatrixX<T> out_;
};

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2. Pool windows are disjoint so the backward
// scatter is write-disjoint.
// ---------------------------------------------------------------------------
template <typename T>
class MaxPool2 {
 public:
  Tensor4<T> forward(const Tensor4<T>& x) {
    const int ho = x.h / 2, wo = x.w / 2;
    in_shape_ = {x.n, x.c, x.h, x.w};
    Tensor4<T> out(x.n, x.c, ho, wo);
    argmax_.resize(x.c, out.cols());
    for (int i = 0; i < x.n; ++i) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          const Eigen::Index j = out.col(i, oy, ox);
          for (int ch = 0; ch < x.c; ++ch) {
            T best = x.data(ch, x.col(i, 2 * oy, 2 * ox));
            Eigen::Index best_p = x.col(i, 2 * oy, 2 * ox);
            for (int dy = 0; dy < 2; ++dy) {
              for (int dx = 0; dx < 2; ++dx) {
                const Eigen::Index p = x.col(i, 2 * oy + dy, 2 * ox + dx);
                if (x.data(ch, p) > best) {
                  best = x.data(ch, p);
                  best_p = p;
                }
              }
            }
            out.data(ch, j) = best;
            argmax_(ch, j) = best_p;
          }
        }
      }
    }
    return out;
  }

  Tensor4<T> backward(const Tensor4<T>& g) {
    auto [n, c, h, w] = in_shape_;
    Tensor4<T> gin(n, c, h, w);
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      for (int ch = 0; ch < c; ++ch) gin.data(ch, argmax_(ch, j)) += g.data(ch, j);
    return gin;
  }

 private:
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> argmax_;
  struct {
    int n, c, h, w;
  } in_shape_{};
};

// ---------------------------------------------------------------------------
// Bilinear 2x upsampling (half-pixel centers, edges replicated). Reproduces
// constants exactly; the adjoint reuses the same taps.
// ---------------------------------------------------------------------------
template <typename T>
class UpsampleBilinear2 {
 public:
  Tensor4<T> forward(const Tensor4<T>& x) {
    in_shape_ = {x.n, x.c, x.h, x.w};
    const int ho = x.h * 2, wo = x.w * 2;
    build_taps(x.h, row_taps_);
    build_taps(x.w, col_taps_);
    Tensor4<T> out(x.n, x.c, ho, wo);
    for (int i = 0; i < x.n; ++i) {
      for (int oy = 0; oy < ho; ++oy) {
        const auto& ry = row_taps_[oy];
        for (int ox = 0; ox < wo; ++ox) {
          const auto& rx = col_taps_[ox];
          out.data.col(out.col(i, oy, ox)).noalias() =
              ry.w0 * (rx.w0 * x.data.col(x.col(i, ry.i0, rx.i0)) +
                       rx.w1 * x.data.col(x.col(i, ry.i0, rx.i1))) +
              ry.w1 * (rx.w0 * x.data.col(x.col(i, ry.i1, rx.i0)) +
                       rx.w1 * x.data.col(x.col(i, ry.i1, rx.i1)));
        }
      }
    }
    return out;
  }

  Tensor4<T> backward(const Tensor4<T>& g) {
    auto [n, c, h, w] = in_shape_;
    Tensor4<T> gin(n, c, h, w);
    for (int i = 0; i < n; ++i) {
      for (int oy = 0; oy < g.h; ++oy) {
        const auto& ry = row_taps_[oy];
        for (int ox = 0; ox < g.w; ++ox) {
          const auto& rx = col_taps_[ox];
          const auto gcol = g.data.col(g.col(i, oy, ox));
          gin.data.col(gin.col(i, ry.i0, rx.i0)) += ry.w0 * rx.w0 * gcol;
          gin.data.col(gin.col(i, ry.i0, rx.i1)) += ry.w0 * rx.w1 * gcol;
          gin.data.col(gin.col(i, ry.i1, rx.i0)) += ry.w1 * rx.w0 * gcol;
          gin.data.col(gin.col(i, ry.i1, rx.i1)) += ry.w1 * rx.w1 * gcol;
        }
      }
    }
    return gin;
  }

 private:
  struct Tap {
    int i0, i1;
    T w0, w1;
  };

  static void build_taps(int in, std::vector<Tap>& taps) {
    taps.resize(in * 2);
    for (int o = 0; o < in * 2; ++o) {
      const double src = (o + 0.5) / 2.0 - 0.5;
      double f0 = std::floor(src);
      int i0 = static_cast<int>(f0);
      T frac = static_cast<T>(src - f0);
      int i1 = i0 + 1;
      if (i0 < 0) i0 = 0;
      if (i1 < 0) i1 = 0;
      if (i0 > in - 1) i0 = in - 1;
      if (i1 > in - 1) i1 = in - 1;
      taps[o] = {i0, i1, T(1) - frac, frac};
    }
  }

  std::vector<Tap> row_taps_, col_taps_;
  struct {
    int n, c, h, w;
  } in_shape_{};
};

// ---------------------------------------------------------------------------
// Fully connected layer on (features x batch) matrices.
// ---------------------------------------------------------------------------
template <typename T>
class Dense {
 public:
  Dense(std::string name, int in_f, int out_f) : name_(std::move(name)) {
    weight_ = MatrixX<T>::Zero(out_f, in_f);
    bias_ = MatrixX<T>::Zero(out_f, 1);
    grad_weight_ = weight_;
    grad_bias_ = bias_;
  }

  void init(RandomStream& rng) { init_truncated_normal(weight_, rng); bias_.setZero(); }

  MatrixX<T> forward(const MatrixX<T>& x) {
    in_ = x;
    MatrixX<T> out = weight_ * x;
    out.colwise() += bias_.col(0);
    return out;
  }

  MatrixX<T> backward(const MatrixX<T>& g) {
    grad_weight_.noalias() += g * in_.transpose();
    grad_bias_.col(0).noalias() += g.rowwise().sum();
    return weight_.transpose() * g;
  }

  void collect(std::vector<ParamRef<T>>& out) {
    out.push_back({name_ + ".weight", &weight_, &grad_weight_});
    out.push_back({name_ + ".bias", &bias_, &grad_bias_});
  }

 private:
  std::string name_;
  MatrixX<T> weight_, bias_, grad_weight_, grad_bias_;
  MatrixX<T> in_;
};

// Per-sample flatten: tensor memory is already (c*h*w x n) contiguous.
template <typename T>
MatrixX<T> flatten_samples(const Tensor4<T>& t) {
  return Eigen::Map<const MatrixX<T>>(t.data.data(),
                                      static_cast<Eigen::Index>(t.c) * t.h * t.w, t.n);
}

template <typename T>
Tensor4<T> unflatten_samples(const MatrixX<T>& m, int n, int c, int h, int w) {
  Tensor4<T> t(n, c, h, w);
  Eigen::Map<MatrixX<T>>(t.data.data(), static_cast<Eigen::Index>(c) * h * w, n) = m;
  return t;
}

// Channel concatenation and its split adjoint.
template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
  Tensor4<T> out(a.n, a.c + b.c, a.h, a.w);
  out.data.topRows(a.c) = a.data;
  out.data.bottomRows(b.c) = b.data;
  return out;
}

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& g, int c_a) {
  Tensor4<T> ga(g.n, c_a, g.h, g.w), gb(g.n, g.c - c_a, g.h, g.w);
  ga.data = g.data.topRows(c_a);
  gb.data = g.data.bottomRows(g.c - c_a);
  return {std::move(ga), std::move(gb)};
}

}  // namespace tdaug::nn
