#pragma once

#include "tdaug/core/random.hpp"
#include "tdaug/data/volume.hpp"
#include "tdaug/warp/warp.hpp"

namespace tdaug {

// ---------------------------------------------------------------------------
// Random affine: with probability `apply_prob` exactly one of {isotropic
// scale, x-flip, small rotation, multiple-of-45deg rotation} is applied;
// otherwise the sample passes through unchanged.
// ---------------------------------------------------------------------------
struct AffineAugConfig {
  float scale_lo = 0.9f, scale_hi = 1.1f;
  float rot_small_deg = 15.f;          // uniform in [-rot_small_deg, +rot_small_deg]
  float rot_multiple_base_deg = 45.f;  // angle = base * N, N uniform in [0, 8]
  int rot_multiple_max_n = 8;
  float apply_prob = 0.8f;
};

enum class AffineKind { Scale, FlipX, RotateSmall, RotateMultiple45 };

// Deformation-field equivalent of an affine map about the image center;
// images and labels then go through the same warp path as every other
// augmentation.
DeformationField affine_field(AffineKind kind, float parameter, int h, int w);

SliceSample apply_affine_transform(const SliceSample& sample, AffineKind kind, float parameter);

SliceSample random_affine(const SliceSample& sample, const AffineAugConfig& cfg,
                          RandomStream& rng);

// ---------------------------------------------------------------------------
// Random elastic deformation: a small control grid drawn i.i.d. from
// N(0, sigma^2) per displacement component, bicubically upsampled to image
// size.
// ---------------------------------------------------------------------------
struct ElasticAugConfig {
  int grid_h = 3, grid_w = 3;  // control matrix is grid_h x grid_w x 2
  float sigma = 10.f;
};

// One control draw per component; exposed so statistics can be checked at the
// source.
std::pair<Eigen::MatrixXf, Eigen::MatrixXf> random_elastic_control(const ElasticAugConfig& cfg,
                                                                   RandomStream& rng);

// Catmull-Rom upsampling; grid corners map to image corners, constants are
// reproduced exactly.
Eigen::MatrixXf bicubic_upsample(const Eigen::MatrixXf& grid, int out_h, int out_w);

DeformationField random_elastic_field(int h, int w, const ElasticAugConfig& cfg,
                                      RandomStream& rng);

// ---------------------------------------------------------------------------
// Random contrast/brightness: x = (x - mean(x)) * c + mean(x), then x = x + b.
// ---------------------------------------------------------------------------
struct IntensityAugConfig {
  float contrast_lo = 0.8f, contrast_hi = 1.2f;
  float brightness_lo = -0.1f, brightness_hi = 0.1f;
};

Eigen::MatrixXf contrast_brightness(const Eigen::MatrixXf& image, float contrast,
                                    float brightness);

Eigen::MatrixXf random_contrast_brightness(const Eigen::MatrixXf& image,
                                           const IntensityAugConfig& cfg, RandomStream& rng);

// ---------------------------------------------------------------------------
// Mixup: convex combination of two image/label pairs with lambda drawn from
// Beta(alpha, alpha).
// ---------------------------------------------------------------------------
struct MixupConfig {
  float alpha = 0.2f;
};

SliceSample mixup_with_lambda(const SliceSample& a, const SliceSample& b, float lambda);

SliceSample mixup(const SliceSample& a, const SliceSample& b, const MixupConfig& cfg,
                  RandomStream& rng);

}  // namespace tdaug
