#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdaug/nn/layers.hpp"

namespace tdaug::nn {

template <typename T>
struct NamedTensor {
  std::string name;
  MatrixX<T>* value;
};

// Common surface of the three trainable graphs: parameter/buffer access for
// optimizers and checkpoints.
template <typename T>
class ModelGraph {
 public:
  virtual ~ModelGraph() = default;
  virtual std::vector<ParamRef<T>> params() = 0;
  virtual std::vector<BufferRef<T>> buffers() = 0;
  virtual void init(RandomStream& rng) = 0;

  void zero_grads() {
    for (auto& p : params()) p.grad->setZero();
  }

  std::size_t param_count() {
    std::size_t total = 0;
    for (auto& p : params()) total += static_cast<std::size_t>(p.value->size());
    return total;
  }

  std::vector<NamedTensor<T>> state_tensors() {
    std::vector<NamedTensor<T>> out;
    for (auto& p : params()) out.push_back({p.name, p.value});
    for (auto& b : buffers()) out.push_back({b.name, b.value});
    return out;
  }
};

enum class GeneratorKind { Deform, Intensity };

struct GeneratorConfig {
  int z_dim = 100;
  int branch_width = 16;   // first conv width of both sub-networks
  int branch_out = 32;     // per-branch width at the concatenation point
  int common_width = 32;
  int z_seed_channels = 16;  // channels of the reshaped z block at 1/16 scale
};

// ---------------------------------------------------------------------------
// Conditional generator. An image sub-network and a z sub-network produce
// same-resolution feature maps which are concatenated and refined by a common
// stack; the head emits a 2-channel displacement field or a tanh-bounded
// single-channel intensity field.
// ---------------------------------------------------------------------------
template <typename T>
class GeneratorNet : public ModelGraph<T> {
 public:
  GeneratorNet(GeneratorKind kind, int h, int w, GeneratorConfig cfg = {})
      : kind_(kind), h_(h), w_(w), cfg_(cfg),
        conv_x1_("g.x1", 1, cfg.branch_width, 3),
        bn_x1_("g.x1.bn", cfg.branch_width),
        conv_x2_("g.x2", cfg.branch_width, cfg.branch_out, 3),
        bn_x2_("g.x2.bn", cfg.branch_out),
        fc_z_("g.z.fc", cfg.z_dim, cfg.z_seed_channels * (h / 16) * (w / 16)),
        out_channels_(kind == GeneratorKind::Deform ? 2 : 1),
        conv_c1_("g.c1", 2 * cfg.branch_out, cfg.common_width, 3),
        bn_c1_("g.c1.bn", cfg.common_width),
        conv_c2_("g.c2", cfg.common_width, cfg.common_width, 3),
        bn_c2_("g.c2.bn", cfg.common_width),
        conv_c3_("g.c3", cfg.common_width, cfg.common_width, 3),
        bn_c3_("g.c3.bn", cfg.common_width),
        conv_head_("g.head", cfg.common_width, out_channels_, 1) {
    if (h % 16 != 0 || w % 16 != 0)
      throw std::invalid_argument("generator: image size must be divisible by 16");
    const int zw[4] = {cfg.branch_width, cfg.branch_width, cfg.branch_out, cfg.branch_out};
    int in_ch = cfg.z_seed_channels;
    for (int s = 0; s < 4; ++s) {
      z_convs_.emplace_back("g.z" + std::to_string(s), in_ch, zw[s], 3);
      z_bns_.emplace_back("g.z" + std::to_string(s) + ".bn", zw[s]);
      in_ch = zw[s];
    }
  }

  GeneratorKind kind() const { return kind_; }
  int out_channels() const { return out_channels_; }

  void init(RandomStream& rng) override {
    conv_x1_.init(rng);
    conv_x2_.init(rng);
    fc_z_.init(rng);
    for (auto& c : z_convs_) c.init(rng);
    conv_c1_.init(rng);
    conv_c2_.init(rng);
    conv_c3_.init(rng);
    conv_head_.init(rng);
  }

  // x: (n,1,h,w), z: (z_dim x n). Output (n, out_channels, h, w).
  Tensor4<T> forward(const Tensor4<T>& x, const MatrixX<T>& z, Mode mode) {
    if (x.h != h_ || x.w != w_) throw std::invalid_argument("generator: input size mismatch");
    if (z.rows() != cfg_.z_dim || z.cols() != x.n)
      throw std::invalid_argument("generator: z shape mismatch");

    Tensor4<T> bx = relu_x1_.forward(bn_x1_.forward(conv_x1_.forward(x), mode));
    bx = relu_x2_.forward(bn_x2_.forward(conv_x2_.forward(bx), mode));

    MatrixX<T> zf = fc_z_.forward(z);
    Tensor4<T> bz = unflatten_samples(zf, x.n, cfg_.z_seed_channels, h_ / 16, w_ / 16);
    for (int s = 0; s < 4; ++s) {
      bz = z_ups_[s].forward(bz);
      bz = z_relus_[s].forward(z_bns_[s].forward(z_convs_[s].forward(bz), mode));
    }

    Tensor4<T> both = concat_channels(bz, bx);
    Tensor4<T> t = relu_c1_.forward(bn_c1_.forward(conv_c1_.forward(both), mode));
    t = relu_c2_.forward(bn_c2_.forward(conv_c2_.forward(t), mode));
    t = relu_c3_.forward(bn_c3_.forward(conv_c3_.forward(t), mode));
    t = conv_head_.forward(t);
    if (kind_ == GeneratorKind::Intensity) t = tanh_.forward(t);
    return t;
  }

  // Accumulates parameter gradients; input/z gradients are not propagated.
  void backward(const Tensor4<T>& grad_out) {
    Tensor4<T> g = grad_out;
    if (kind_ == GeneratorKind::Intensity) g = tanh_.backward(g);
    g = conv_head_.backward(g);
    g = bn_c3_.backward(relu_c3_.backward(g));
    g = conv_c3_.backward(g);
    g = bn_c2_.backward(relu_c2_.backward(g));
    g = conv_c2_.backward(g);
    g = bn_c1_.backward(relu_c1_.backward(g));
    g = conv_c1_.backward(g);

    auto [gz, gx] = split_channels(g, cfg_.branch_out);
    for (int s = 3; s >= 0; --s) {
      gz = z_bns_[s].backward(z_relus_[s].backward(gz));
      gz = z_convs_[s].backward(gz);
      gz = z_ups_[s].backward(gz);
    }
    fc_z_.backward(flatten_samples(gz));

    gx = bn_x2_.backward(relu_x2_.backward(gx));
    gx = conv_x2_.backward(gx);
    gx = bn_x1_.backward(relu_x1_.backward(gx));
    conv_x1_.backward(gx);
  }

  std::vector<ParamRef<T>> params() override {
    std::vector<ParamRef<T>> out;
    conv_x1_.collect(out);
    bn_x1_.collect(out);
    conv_x2_.collect(out);
    bn_x2_.collect(out);
    fc_z_.collect(out);
    for (int s = 0; s < 4; ++s) {
      z_convs_[s].collect(out);
      z_bns_[s].collect(out);
    }
    conv_c1_.collect(out);
    bn_c1_.collect(out);
    conv_c2_.collect(out);
    bn_c2_.collect(out);
    conv_c3_.collect(out);
    bn_c3_.collect(out);
    conv_head_.collect(out);
    return out;
  }

  std::vector<BufferRef<T>> buffers() override {
    std::vector<BufferRef<T>> out;
    bn_x1_.collect_buffers(out);
    bn_x2_.collect_buffers(out);
    for (auto& b : z_bns_) b.collect_buffers(out);
    bn_c1_.collect_buffers(out);
    bn_c2_.collect_buffers(out);
    bn_c3_.collect_buffers(out);
    return out;
  }

 private:
  GeneratorKind kind_;
  int h_, w_;
  GeneratorConfig cfg_;

  Conv2d<T> conv_x1_;
  BatchNorm2d<T> bn_x1_;
  ReLU<T> relu_x1_;
  Conv2d<T> conv_x2_;
  BatchNorm2d<T> bn_x2_;
  ReLU<T> relu_x2_;

  Dense<T> fc_z_;
  std::vector<Conv2d<T>> z_convs_;
  std::vector<BatchNorm2d<T>> z_bns_;
  UpsampleBilinear2<T> z_ups_[4];
  ReLU<T> z_relus_[4];

  int out_channels_;
  Conv2d<T> conv_c1_;
  BatchNorm2d<T> bn_c1_;
  ReLU<T> relu_c1_;
  Conv2d<T> conv_c2_;
  BatchNorm2d<T> bn_c2_;
  ReLU<T> relu_c2_;
  Conv2d<T> conv_c3_;
  BatchNorm2d<T> bn_c3_;
  ReLU<T> relu_c3_;
  Conv2d<T> conv_head_;
  Tanh<T> tanh_;
};

struct DiscriminatorConfig {
  int base_width = 32;  // doubled at each of the five stride-2 stages
  int fc1 = 128;
  int fc2 = 64;
};

// ---------------------------------------------------------------------------
// DCGAN-style discriminator: five 5x5 stride-2 convolutions with batch norm
// and leaky ReLU, then three fully connected layers onto two logits.
// ---------------------------------------------------------------------------
template <typename T>
class DiscriminatorNet : public ModelGraph<T> {
 public:
  DiscriminatorNet(int h, int w, DiscriminatorConfig cfg = {})
      : h_(h), w_(w), cfg_(cfg) {
    if (h < 32 || w < 32) throw std::invalid_argument("discriminator: input must be >= 32");
    int in_ch = 1, hh = h, ww = w;
    for (int s = 0; s < 5; ++s) {
      const int width = cfg.base_width << s;
      convs_.emplace_back("d.conv" + std::to_string(s), in_ch, width, 5, 2, 2);
      bns_.emplace_back("d.conv" + std::to_string(s) + ".bn", width);
      lrelus_.emplace_back(T(0.2));
      in_ch = width;
      hh = (hh + 4 - 5) / 2 + 1;
      ww = (ww + 4 - 5) / 2 + 1;
    }
    flat_h_ = hh;
    flat_w_ = ww;
    flat_ch_ = in_ch;
    const int flat = in_ch * hh * ww;
    fcs_.emplace_back("d.fc0", flat, cfg.fc1);
    fcs_.emplace_back("d.fc1", cfg.fc1, cfg.fc2);
    fcs_.emplace_back("d.fc2", cfg.fc2, 2);
  }

  int conv_out_h() const { return flat_h_; }
  int conv_out_w() const { return flat_w_; }

  void init(RandomStream& rng) override {
    for (auto& c : convs_) c.init(rng);
    for (auto& f : fcs_) f.init(rng);
  }

  // Returns (2 x n) logits.
  MatrixX<T> forward(const Tensor4<T>& x, Mode mode) {
    if (x.h != h_ || x.w != w_) throw std::invalid_argument("discriminator: input size mismatch");
    Tensor4<T> t = x;
    for (int s = 0; s < 5; ++s)
      t = lrelus_[s].forward(bns_[s].forward(convs_[s].forward(t), mode));
    MatrixX<T> f = flatten_samples(t);
    for (int s = 0; s < 2; ++s) {
      f = fcs_[s].forward(f);
      fc_masks_[s] = (f.array() > T(0)).template cast<T>();
      f = f.array() * (fc_masks_[s].array() + T(0.2) * (T(1) - fc_masks_[s].array()));
    }
    return fcs_[2].forward(f);
  }

  // grad_logits: (2 x n). Returns gradient w.r.t. the input image batch.
  Tensor4<T> backward(const MatrixX<T>& grad_logits) {
    MatrixX<T> g = fcs_[2].backward(grad_logits);
    for (int s = 1; s >= 0; --s) {
      g = g.array() * (fc_masks_[s].array() + T(0.2) * (T(1) - fc_masks_[s].array()));
      g = fcs_[s].backward(g);
    }
    Tensor4<T> t = unflatten_samples(g, static_cast<int>(grad_logits.cols()), flat_ch_,
                                     flat_h_, flat_w_);
    for (int s = 4; s >= 0; --s) {
      t = bns_[s].backward(lrelus_[s].backward(t));
      t = convs_[s].backward(t);
    }
    return t;
  }

  std::vector<ParamRef<T>> params() override {
    std::vector<ParamRef<T>> out;
    for (int s = 0; s < 5; ++s) {
      convs_[s].collect(out);
      bns_[s].collect(out);
    }
    for (auto& f : fcs_) f.collect(out);
    return out;
  }

  std::vector<BufferRef<T>> buffers() override {
    std::vector<BufferRef<T>> out;
    for (auto& b : bns_) b.collect_buffers(out);
    return out;
  }

 private:
  int h_, w_;
  DiscriminatorConfig cfg_;
  std::vector<Conv2d<T>> convs_;
  std::vector<BatchNorm2d<T>> bns_;
  std::vector<LeakyReLU<T>> lrelus_;
  std::vector<Dense<T>> fcs_;
  MatrixX<T> fc_masks_[2];
  int flat_h_ = 0, flat_w_ = 0, flat_ch_ = 0;
};

// ---------------------------------------------------------------------------
// U-Net style segmenter: four encoder blocks (two 3x3 convs + 2x2 max pool),
// four decoder blocks (2x bilinear upsample, skip concatenation, two 3x3
// convs), 1x1 head onto per-pixel class logits.
// ---------------------------------------------------------------------------
template <typename T>
class SegmenterNet : public ModelGraph<T> {
 public:
  SegmenterNet(int h, int w, int num_classes, int base_width = 16)
      : h_(h), w_(w), classes_(num_classes),
        head_("s.head", base_width, num_classes, 1) {
    if (h % 16 != 0 || w % 16 != 0)
      throw std::invalid_argument("segmenter: image size must be divisible by 16");
    int in_ch = 1;
    for (int lvl = 0; lvl < 4; ++lvl) {
      const int width = base_width << lvl;
      enc_widths_[lvl] = width;
      enc_convs_.emplace_back("s.enc" + std::to_string(lvl) + ".0", in_ch, width, 3);
      enc_bns_.emplace_back("s.enc" + std::to_string(lvl) + ".0.bn", width);
      enc_convs_.emplace_back("s.enc" + std::to_string(lvl) + ".1", width, width, 3);
      enc_bns_.emplace_back("s.enc" + std::to_string(lvl) + ".1.bn", width);
      in_ch = width;
    }
    for (int lvl = 3; lvl >= 0; --lvl) {
      const int skip = enc_widths_[lvl];
      dec_convs_.emplace_back("s.dec" + std::to_string(lvl) + ".0", in_ch + skip, skip, 3);
      dec_bns_.emplace_back("s.dec" + std::to_string(lvl) + ".0.bn", skip);
      dec_convs_.emplace_back("s.dec" + std::to_string(lvl) + ".1", skip, skip, 3);
      dec_bns_.emplace_back("s.dec" + std::to_string(lvl) + ".1.bn", skip);
      in_ch = skip;
    }
  }

  int num_classes() const { return classes_; }

  void init(RandomStream& rng) override {
    for (auto& c : enc_convs_) c.init(rng);
    for (auto& c : dec_convs_) c.init(rng);
    head_.init(rng);
  }

  // x: (n,1,h,w) -> logits (n,classes,h,w).
  Tensor4<T> forward(const Tensor4<T>& x, Mode mode) {
    if (x.h != h_ || x.w != w_) throw std::invalid_argument("segmenter: input size mismatch");
    Tensor4<T> t = x;
    for (int lvl = 0; lvl < 4; ++lvl) {
      t = enc_relus_[2 * lvl].forward(
          enc_bns_[2 * lvl].forward(enc_convs_[2 * lvl].forward(t), mode));
      t = enc_relus_[2 * lvl + 1].forward(
          enc_bns_[2 * lvl + 1].forward(enc_convs_[2 * lvl + 1].forward(t), mode));
      skips_[lvl] = t;
      t = pools_[lvl].forward(t);
    }
    for (int d = 0; d < 4; ++d) {
      t = ups_[d].forward(t);
      skip_channels_[d] = t.c;
      t = concat_channels(t, skips_[3 - d]);
      t = dec_relus_[2 * d].forward(dec_bns_[2 * d].forward(dec_convs_[2 * d].forward(t), mode));
      t = dec_relus_[2 * d + 1].forward(
          dec_bns_[2 * d + 1].forward(dec_convs_[2 * d + 1].forward(t), mode));
    }
    return head_.forward(t);
  }

  // Accumulates parameter gradients and returns gradient w.r.t. the input.
  Tensor4<T> backward(const Tensor4<T>& grad_logits) {
    Tensor4<T> g = head_.backward(grad_logits);
    Tensor4<T> skip_grads[4];
    for (int d = 3; d >= 0; --d) {
      g = dec_bns_[2 * d + 1].backward(dec_relus_[2 * d + 1].backward(g));
      g = dec_convs_[2 * d + 1].backward(g);
      g = dec_bns_[2 * d].backward(dec_relus_[2 * d].backward(g));
      g = dec_convs_[2 * d].backward(g);
      auto [gup, gskip] = split_channels(g, skip_channels_[d]);
      skip_grads[3 - d] = std::move(gskip);
      g = ups_[d].backward(gup);
    }
    for (int lvl = 3; lvl >= 0; --lvl) {
      g = pools_[lvl].backward(g);
      g.data += skip_grads[lvl].data;
      g = enc_bns_[2 * lvl + 1].backward(enc_relus_[2 * lvl + 1].backward(g));
      g = enc_convs_[2 * lvl + 1].backward(g);
      g = enc_bns_[2 * lvl].backward(enc_relus_[2 * lvl].backward(g));
      g = enc_convs_[2 * lvl].backward(g);
    }
    return g;
  }

  std::vector<ParamRef<T>> params() override {
    std::vector<ParamRef<T>> out;
    for (int i = 0; i < 8; ++i) {
      enc_convs_[i].collect(out);
      enc_bns_[i].collect(out);
    }
    for (int i = 0; i < 8; ++i) {
      dec_convs_[i].collect(out);
      dec_bns_[i].collect(out);
    }
    head_.collect(out);
    return out;
  }

  std::vector<BufferRef<T>> buffers() override {
    std::vector<BufferRef<T>> out;
    for (auto& b : enc_bns_) b.collect_buffers(out);
    for (auto& b : dec_bns_) b.collect_buffers(out);
    return out;
  }

 private:
  int h_, w_, classes_;
  int enc_widths_[4] = {};
  std::vector<Conv2d<T>> enc_convs_;
  std::vector<BatchNorm2d<T>> enc_bns_;
  ReLU<T> enc_relus_[8];
  MaxPool2<T> pools_[4];
  Tensor4<T> skips_[4];

  UpsampleBilinear2<T> ups_[4];
  std::vector<Conv2d<T>> dec_convs_;
  std::vector<BatchNorm2d<T>> dec_bns_;
  ReLU<T> dec_relus_[8];
  int skip_channels_[4] = {};

  Conv2d<T> head_;
};

template <typename T>
std::unique_ptr<GeneratorNet<T>> build_generator(GeneratorKind kind, int h, int w,
                                                 GeneratorConfig cfg = {}) {
  return std::make_unique<GeneratorNet<T>>(kind, h, w, cfg);
}

template <typename T>
std::unique_ptr<DiscriminatorNet<T>> build_discriminator(int h, int w,
                                                         DiscriminatorConfig cfg = {}) {
  return std::make_unique<DiscriminatorNet<T>>(h, w, cfg);
}

template <typename T>
std::unique_ptr<SegmenterNet<T>> build_segmenter(int h, int w, int num_classes,
                                                 int base_width = 16) {
  return std::make_unique<SegmenterNet<T>>(h, w, num_classes, base_width);
}

}  // namespace tdaug::nn
