#include "tdaug/aug/classic.hpp"

#include <cmath>
#include <stdexcept>

namespace tdaug {

DeformationField affine_field(AffineKind kind, float parameter, int h, int w) {
  // Backward map: sample point = A_inv * (p - c) + c, expressed as a
  // displacement from p.
  const double cy = 0.5 * (h - 1), cx = 0.5 * (w - 1);
  double a00 = 1, a01 = 0, a10 = 0, a11 = 1;  // A_inv in (y, x) coordinates
  switch (kind) {
    case AffineKind::Scale: {
      if (!(parameter > 0.f)) throw std::invalid_argument("affine_field: scale must be > 0");
      a00 = a11 = 1.0 / parameter;
      break;
    }
    case AffineKind::FlipX:
      a11 = -1;
      break;
    case AffineKind::RotateSmall:
    case AffineKind::RotateMultiple45: {
      const double t = -parameter * M_PI / 180.0;  // inverse rotation
      a00 = std::cos(t);
      a01 = -std::sin(t);
      a10 = std::sin(t);
      a11 = std::cos(t);
      break;
    }
  }
  DeformationField field(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dy = y - cy, dx = x - cx;
      field.dy(y, x) = static_cast<float>(a00 * dy + a01 * dx + cy - y);
      field.dx(y, x) = static_cast<float>(a10 * dy + a11 * dx + cx - x);
    }
  return field;
}

SliceSample apply_affine_transform(const SliceSample& sample, AffineKind kind, float parameter) {
  const int h = static_cast<int>(sample.image.rows());
  const int w = static_cast<int>(sample.image.cols());
  const DeformationField field = affine_field(kind, parameter, h, w);
  SliceSample out = sample;
  out.image = apply_deformation(sample.image, field, PadMode::Zeros);
  out.label_onehot = apply_deformation_to_label(sample.label_onehot, field);
  return out;
}

SliceSample random_affine(const SliceSample& sample, const AffineAugConfig& cfg,
                          RandomStream& rng) {
  if (!rng.bernoulli(cfg.apply_prob)) return sample;
  switch (rng.uniform_int(0, 3)) {
    case 0:
      return apply_affine_transform(
          sample, AffineKind::Scale,
          static_cast<float>(rng.uniform(cfg.scale_lo, cfg.scale_hi)));
    case 1:
      return apply_affine_transform(sample, AffineKind::FlipX, 0.f);
    case 2:
      return apply_affine_transform(
          sample, AffineKind::RotateSmall,
          static_cast<float>(rng.uniform(-cfg.rot_small_deg, cfg.rot_small_deg)));
    default:
      return apply_affine_transform(
          sample, AffineKind::RotateMultiple45,
          cfg.rot_multiple_base_deg *
              static_cast<float>(rng.uniform_int(0, cfg.rot_multiple_max_n)));
  }
}

std::pair<Eigen::MatrixXf, Eigen::MatrixXf> random_elastic_control(const ElasticAugConfig& cfg,
                                                                   RandomStream& rng) {
  if (cfg.grid_h < 2 || cfg.grid_w < 2)
    throw std::invalid_argument("elastic: control grid must be >= 2 per axis");
  if (!(cfg.sigma >= 0.f)) throw std::invalid_argument("elastic: sigma must be >= 0");
  Eigen::MatrixXf gy(cfg.grid_h, cfg.grid_w), gx(cfg.grid_h, cfg.grid_w);
  for (int y = 0; y < cfg.grid_h; ++y)
    for (int x = 0; x < cfg.grid_w; ++x) gy(y, x) = static_cast<float>(rng.normal(0.0, cfg.sigma));
  for (int y = 0; y < cfg.grid_h; ++y)
    for (int x = 0; x < cfg.grid_w; ++x) gx(y, x) = static_cast<float>(rng.normal(0.0, cfg.sigma));
  return {std::move(gy), std::move(gx)};
}

namespace {

// Catmull-Rom kernel weights for fractional position t over 4 taps.
inline void catmull_rom(double t, double w[4]) {
  const double t2 = t * t, t3 = t2 * t;
  w[0] = 0.5 * (-t3 + 2 * t2 - t);
  w[1] = 0.5 * (3 * t3 - 5 * t2 + 2);
  w[2] = 0.5 * (-3 * t3 + 4 * t2 + t);
  w[3] = 0.5 * (t3 - t2);
}

}  // namespace

Eigen::MatrixXf bicubic_upsample(const Eigen::MatrixXf& grid, int out_h, int out_w) {
  const int gh = static_cast<int>(grid.rows()), gw = static_cast<int>(grid.cols());
  if (out_h < gh || out_w < gw)
    throw std::invalid_argument("bicubic_upsample: output smaller than control grid");
  Eigen::MatrixXf out(out_h, out_w);
  const auto clamp_g = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
  for (int oy = 0; oy < out_h; ++oy) {
    const double gy = out_h > 1 ? static_cast<double>(oy) * (gh - 1) / (out_h - 1) : 0.0;
    int y1 = static_cast<int>(std::floor(gy));
    if (y1 > gh - 2) y1 = gh - 2;
    double wy[4];
    catmull_rom(gy - y1, wy);
    for (int ox = 0; ox < out_w; ++ox) {
      const double gx = out_w > 1 ? static_cast<double>(ox) * (gw - 1) / (out_w - 1) : 0.0;
      int x1 = static_cast<int>(std::floor(gx));
      if (x1 > gw - 2) x1 = gw - 2;
      double wx[4];
      catmull_rom(gx - x1, wx);
      double acc = 0.0;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          acc += wy[i] * wx[j] * grid(clamp_g(y1 - 1 + i, gh), clamp_g(x1 - 1 + j, gw));
      out(oy, ox) = static_cast<float>(acc);
    }
  }
  return out;
}

DeformationField random_elastic_field(int h, int w, const ElasticAugConfig& cfg,
                                      RandomStream& rng) {
  if (h < cfg.grid_h || w < cfg.grid_w)
    throw std::invalid_argument("elastic: image smaller than control grid");
  auto [gy, gx] = random_elastic_control(cfg, rng);
  DeformationField field(h, w);
  field.dy = bicubic_upsample(gy, h, w);
  field.dx = bicubic_upsample(gx, h, w);
  return field;
}

Eigen::MatrixXf contrast_brightness(const Eigen::MatrixXf& image, float contrast,
                                    float brightness) {
  const float mean = image.mean();
  return (((image.array() - mean) * contrast) + mean + brightness).matrix();
}

Eigen::MatrixXf random_contrast_brightness(const Eigen::MatrixXf& image,
                                           const IntensityAugConfig& cfg, RandomStream& rng) {
  const float c = static_cast<float>(rng.uniform(cfg.contrast_lo, cfg.contrast_hi));
  const float b = static_cast<float>(rng.uniform(cfg.brightness_lo, cfg.brightness_hi));
  return contrast_brightness(image, c, b);
}

SliceSample mixup_with_lambda(const SliceSample& a, const SliceSample& b, float lambda) {
  if (a.image.rows() != b.image.rows() || a.image.cols() != b.image.cols())
    throw std::invalid_argument("mixup: image shape mismatch");
  if (a.label_onehot.size() != b.label_onehot.size())
    throw std::invalid_argument("mixup: class count mismatch");
  SliceSample out = a;
  out.image = lambda * a.image + (1.f - lambda) * b.image;
  for (std::size_t c = 0; c < a.label_onehot.size(); ++c)
    out.label_onehot[c] = lambda * a.label_onehot[c] + (1.f - lambda) * b.label_onehot[c];
  return out;
}

SliceSample mixup(const SliceSample& a, const SliceSample& b, const MixupConfig& cfg,
                  RandomStream& rng) {
  if (!(cfg.alpha > 0.f)) throw std::invalid_argument("mixup: alpha must be > 0");
  const float lambda = static_cast<float>(rng.beta(cfg.alpha, cfg.alpha));
  return mixup_with_lambda(a, b, lambda);
}

}  // namespace tdaug
