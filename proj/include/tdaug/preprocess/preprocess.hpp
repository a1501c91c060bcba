#pragma once

#include <optional>
#include <string>

#include "tdaug/data/volume.hpp"

namespace tdaug {

struct PreprocessConfig {
  float target_res_row = 1.367f;  // mm per pixel after resampling
  float target_res_col = 1.367f;
  int target_h = 224;
  int target_w = 224;
  float percentile_lo = 2.f;
  float percentile_hi = 98.f;

  void validate() const;

  static PreprocessConfig cardiac() { return {1.367f, 1.367f, 224, 224, 2.f, 98.f}; }
  static PreprocessConfig prostate() { return {0.6f, 0.6f, 224, 224, 2.f, 98.f}; }
  static PreprocessConfig pancreas() { return {0.8f, 0.8f, 320, 320, 2.f, 98.f}; }
};

PreprocessConfig preset_by_name(const std::string& name);

// Linear-interpolated percentile over all voxels.
float volume_percentile(const ImageVolume& volume, float pct);

// (x - x_lo) / (x_hi - x_lo) with percentiles over the full 3D volume; values
// outside [x_lo, x_hi] are not clipped. Throws on a degenerate intensity
// range (x_hi == x_lo).
ImageVolume normalize_percentile(const ImageVolume& volume, float pct_lo = 2.f,
                                 float pct_hi = 98.f);

// Resample each slice to the target in-plane resolution (bilinear for images,
// nearest-neighbour for labels), then center crop or zero pad to the target
// size. The through-plane axis is untouched. Odd crop/pad remainders place
// the extra pixel on the high-index side.
std::pair<ImageVolume, std::optional<LabelVolume>> resample_and_crop(
    const ImageVolume& volume, const std::optional<LabelVolume>& labels,
    const PreprocessConfig& cfg);

// Center crop/pad helpers shared with the augmentation module and tests.
Eigen::MatrixXf crop_or_pad(const Eigen::MatrixXf& img, int target_h, int target_w,
                            float pad_value = 0.f);
LabelMat crop_or_pad_labels(const LabelMat& img, int target_h, int target_w, int pad_value = 0);

}  // namespace tdaug
