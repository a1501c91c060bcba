#include "tdaug/preprocess/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace tdaug {

void PreprocessConfig::validate() const {
  if (!(target_res_row > 0.f) || !(target_res_col > 0.f))
    throw std::invalid_argument("preprocess: target resolution must be positive");
  if (target_h < 1 || target_w < 1)
    throw std::invalid_argument("preprocess: target size must be positive");
  if (!(percentile_lo < percentile_hi))
    throw std::invalid_argument("preprocess: percentile_lo must be < percentile_hi");
}

PreprocessConfig preset_by_name(const std::string& name) {
  if (name == "cardiac") return PreprocessConfig::cardiac();
  if (name == "prostate") return PreprocessConfig::prostate();
  if (name == "pancreas") return PreprocessConfig::pancreas();
  throw std::invalid_argument("unknown preprocessing preset: " + name);
}

float volume_percentile(const ImageVolume& volume, float pct) {
  std::vector<float> vals;
  vals.reserve(static_cast<std::size_t>(volume.depth()) * volume.height() * volume.width());
  for (const auto& sl : volume.slices)
    vals.insert(vals.end(), sl.data(), sl.data() + sl.size());
  if (vals.empty()) throw std::invalid_argument("volume_percentile: empty volume");
  std::sort(vals.begin(), vals.end());
  const double rank = (pct / 100.0) * (static_cast<double>(vals.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, vals.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return static_cast<float>(vals[lo] + frac * (vals[hi] - vals[lo]));
}

ImageVolume normalize_percentile(const ImageVolume& volume, float pct_lo, float pct_hi) {
  volume.validate();
  const float x_lo = volume_percentile(volume, pct_lo);
  const float x_hi = volume_percentile(volume, pct_hi);
  if (x_hi == x_lo)
    throw std::invalid_argument("normalize_percentile: degenerate intensity range");
  ImageVolume out = volume;
  const float inv = 1.f / (x_hi - x_lo);
  for (auto& sl : out.slices) sl = ((sl.array() - x_lo) * inv).matrix();
  return out;
}

namespace {

// Half-pixel-center bilinear resampling by in/out scale. scale == 1 is the
// identity by construction (sample points land exactly on input pixels).
Eigen::MatrixXf resample_bilinear(const Eigen::MatrixXf& img, double scale_y, double scale_x,
                                  int out_h, int out_w) {
  Eigen::MatrixXf out(out_h, out_w);
  const int h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  for (int oy = 0; oy < out_h; ++oy) {
    const double sy = (oy + 0.5) / scale_y - 0.5;
    int y0 = static_cast<int>(std::floor(sy));
    const double fy = sy - y0;
    const int y1 = std::clamp(y0 + 1, 0, h - 1);
    y0 = std::clamp(y0, 0, h - 1);
    for (int ox = 0; ox < out_w; ++ox) {
      const double sx = (ox + 0.5) / scale_x - 0.5;
      int x0 = static_cast<int>(std::floor(sx));
      const double fx = sx - x0;
      const int x1 = std::clamp(x0 + 1, 0, w - 1);
      x0 = std::clamp(x0, 0, w - 1);
      const double v = (1 - fy) * ((1 - fx) * img(y0, x0) + fx * img(y0, x1)) +
                       fy * ((1 - fx) * img(y1, x0) + fx * img(y1, x1));
      out(oy, ox) = static_cast<float>(v);
    }
  }
  return out;
}

LabelMat resample_nearest(const LabelMat& img, double scale_y, double scale_x, int out_h,
                          int out_w) {
  LabelMat out(out_h, out_w);
  const int h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  for (int oy = 0; oy < out_h; ++oy) {
    const double sy = (oy + 0.5) / scale_y - 0.5;
    const int y = std::clamp(static_cast<int>(std::lround(sy)), 0, h - 1);
    for (int ox = 0; ox < out_w; ++ox) {
      const double sx = (ox + 0.5) / scale_x - 0.5;
      const int x = std::clamp(static_cast<int>(std::lround(sx)), 0, w - 1);
      out(oy, ox) = img(y, x);
    }
  }
  return out;
}

}  // namespace

template <typename Mat, typename Scalar>
static Mat crop_or_pad_impl(const Mat& img, int target_h, int target_w, Scalar pad_value) {
  const int h = static_cast<int>(img.rows()), w = static_cast<int>(img.cols());
  Mat out = Mat::Constant(target_h, target_w, pad_value);
  // centered copy window; the extra pixel of odd differences sits on the
  // high-index side
  const int copy_h = std::min(h, target_h), copy_w = std::min(w, target_w);
  const int src_y = h > target_h ? (h - target_h) / 2 : 0;
  const int src_x = w > target_w ? (w - target_w) / 2 : 0;
  const int dst_y = target_h > h ? (target_h - h) / 2 : 0;
  const int dst_x = target_w > w ? (target_w - w) / 2 : 0;
  out.block(dst_y, dst_x, copy_h, copy_w) = img.block(src_y, src_x, copy_h, copy_w);
  return out;
}

Eigen::MatrixXf crop_or_pad(const Eigen::MatrixXf& img, int target_h, int target_w,
                            float pad_value) {
  return crop_or_pad_impl<Eigen::MatrixXf, float>(img, target_h, target_w, pad_value);
}

LabelMat crop_or_pad_labels(const LabelMat& img, int target_h, int target_w, int pad_value) {
  return crop_or_pad_impl<LabelMat, int>(img, target_h, target_w, pad_value);
}

std::pair<ImageVolume, std::optional<LabelVolume>> resample_and_crop(
    const ImageVolume& volume, const std::optional<LabelVolume>& labels,
    const PreprocessConfig& cfg) {
  cfg.validate();
  volume.validate();
  if (!(volume.spacing[0] > 0.f) || !(volume.spacing[1] > 0.f))
    throw std::invalid_argument("resample_and_crop: missing spacing metadata");
  if (labels) labels->validate_against(volume);

  const double scale_y = static_cast<double>(volume.spacing[0]) / cfg.target_res_row;
  const double scale_x = static_cast<double>(volume.spacing[1]) / cfg.target_res_col;
  const bool identity_scale = volume.spacing[0] == cfg.target_res_row &&
                              volume.spacing[1] == cfg.target_res_col;
  const int rs_h = identity_scale
                       ? volume.height()
                       : std::max(1, static_cast<int>(std::lround(volume.height() * scale_y)));
  const int rs_w = identity_scale
                       ? volume.width()
                       : std::max(1, static_cast<int>(std::lround(volume.width() * scale_x)));

  ImageVolume out_img;
  out_img.spacing = {cfg.target_res_row, cfg.target_res_col, volume.spacing[2]};
  out_img.subject_id = volume.subject_id;
  out_img.phase_tag = volume.phase_tag;
  out_img.structure_names = volume.structure_names;
  for (const auto& sl : volume.slices) {
    Eigen::MatrixXf rs = identity_scale ? sl : resample_bilinear(sl, scale_y, scale_x, rs_h, rs_w);
    out_img.slices.push_back(crop_or_pad(rs, cfg.target_h, cfg.target_w, 0.f));
  }

  std::optional<LabelVolume> out_lab;
  if (labels) {
    out_lab.emplace();
    out_lab->num_classes = labels->num_classes;
    for (const auto& sl : labels->slices) {
      LabelMat rs = identity_scale ? sl : resample_nearest(sl, scale_y, scale_x, rs_h, rs_w);
      out_lab->slices.push_back(crop_or_pad_labels(rs, cfg.target_h, cfg.target_w, 0));
    }
  }
  return {std::move(out_img), std::move(out_lab)};
}

}  // namespace tdaug
