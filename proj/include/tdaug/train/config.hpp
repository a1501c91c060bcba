#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "tdaug/aug/classic.hpp"
#include "tdaug/nn/models.hpp"

namespace tdaug {

// Final-training augmentation policies.
enum class AugPolicy { None, Aff, RD, RI, RDRI, GD, GI, GDGI, Mixup, GDGIMixup };

std::string to_string(AugPolicy policy);
AugPolicy policy_from_string(const std::string& name);
bool policy_needs_deform_generator(AugPolicy policy);
bool policy_needs_intensity_generator(AugPolicy policy);

struct TrainConfig {
  int batch_size = 20;
  int total_iters = 10000;
  int pretrain_iters = 1000;
  int val_eval_stride = 1;

  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;

  float lambda_adv = 1.f;
  float lambda_ld = 1e-3f;
  bool normalize_ld = true;    // per-pixel mean |field| instead of the raw sum
  bool nonsaturating_g = true; // generator maximizes log D(fake) rather than
                               // minimizing log(1 - D(fake))

  bool joint = true;            // false: generators trained without the segmentation loss
  bool use_validation = true;   // false: checkpoint taken at fixed_iters
  int fixed_iters = 0;
  bool pretrain_affine = false;

  std::uint64_t seed = 0;

  int seg_base_width = 16;
  nn::GeneratorConfig gen;
  nn::DiscriminatorConfig disc;

  AffineAugConfig affine;
  ElasticAugConfig elastic;       // sweepable via --rd-sigma / --rd-grid
  IntensityAugConfig intensity;   // sweepable via --ri-contrast / --ri-brightness
  MixupConfig mixup;

  void validate() const {
    if (batch_size < 2 || batch_size % 2 != 0)
      throw std::invalid_argument("TrainConfig: batch_size must be even and >= 2");
    if (total_iters < 0 || pretrain_iters < 0)
      throw std::invalid_argument("TrainConfig: negative iteration counts");
    if (val_eval_stride < 1)
      throw std::invalid_argument("TrainConfig: val_eval_stride must be >= 1");
    if (lambda_adv < 0.f || lambda_ld < 0.f)
      throw std::invalid_argument("TrainConfig: loss weights must be >= 0");
    if (!use_validation && fixed_iters < 1)
      throw std::invalid_argument("TrainConfig: fixed_iters required when validation is off");
  }
};

}  // namespace tdaug
