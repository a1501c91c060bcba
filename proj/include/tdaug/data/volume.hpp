#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdaug/core/tensor.hpp"

namespace tdaug {

// 3D scalar volume, sliced along the through-plane axis: slices[z](y, x).
// spacing is (row mm, col mm, slice mm).
struct ImageVolume {
  std::vector<Eigen::MatrixXf> slices;
  std::array<float, 3> spacing = {1.f, 1.f, 1.f};
  std::string subject_id;
  std::string phase_tag;
  std::vector<std::string> structure_names;

  int depth() const { return static_cast<int>(slices.size()); }
  int height() const { return slices.empty() ? 0 : static_cast<int>(slices[0].rows()); }
  int width() const { return slices.empty() ? 0 : static_cast<int>(slices[0].cols()); }

  void validate() const {
    if (slices.empty()) throw std::invalid_argument("ImageVolume: empty volume");
    for (const auto& s : spacing)
      if (!(s > 0.f)) throw std::invalid_argument("ImageVolume: non-positive spacing");
    for (const auto& sl : slices) {
      if (sl.rows() != slices[0].rows() || sl.cols() != slices[0].cols())
        throw std::invalid_argument("ImageVolume: ragged slices");
      if (!sl.allFinite()) throw std::invalid_argument("ImageVolume: non-finite voxels");
    }
  }
};

using LabelMat = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

struct LabelVolume {
  std::vector<LabelMat> slices;
  int num_classes = 0;  // including background (class 0)

  int depth() const { return static_cast<int>(slices.size()); }

  void validate() const {
    if (num_classes < 1) throw std::invalid_argument("LabelVolume: num_classes < 1");
    for (const auto& sl : slices) {
      if ((sl.array() < 0).any() || (sl.array() >= num_classes).any())
        throw std::invalid_argument("LabelVolume: label id out of range");
    }
  }

  void validate_against(const ImageVolume& img) const {
    validate();
    if (depth() != img.depth())
      throw std::invalid_argument("LabelVolume: depth mismatch with image");
    for (std::size_t z = 0; z < slices.size(); ++z)
      if (slices[z].rows() != img.slices[z].rows() || slices[z].cols() != img.slices[z].cols())
        throw std::invalid_argument("LabelVolume: slice shape mismatch with image");
  }
};

struct VolumePair {
  ImageVolume image;
  LabelVolume label;
};

inline std::vector<Eigen::MatrixXf> one_hot(const LabelMat& labels, int num_classes) {
  std::vector<Eigen::MatrixXf> out(num_classes,
                                   Eigen::MatrixXf::Zero(labels.rows(), labels.cols()));
  for (Eigen::Index y = 0; y < labels.rows(); ++y)
    for (Eigen::Index x = 0; x < labels.cols(); ++x) {
      const int c = labels(y, x);
      if (c < 0 || c >= num_classes)
        throw std::invalid_argument("one_hot: label id out of range");
      out[c](y, x) = 1.f;
    }
  return out;
}

inline LabelMat onehot_argmax(const std::vector<Eigen::MatrixXf>& onehot) {
  if (onehot.empty()) throw std::invalid_argument("onehot_argmax: no channels");
  LabelMat out(onehot[0].rows(), onehot[0].cols());
  for (Eigen::Index y = 0; y < out.rows(); ++y)
    for (Eigen::Index x = 0; x < out.cols(); ++x) {
      int best = 0;
      float bv = onehot[0](y, x);
      for (std::size_t c = 1; c < onehot.size(); ++c)
        if (onehot[c](y, x) > bv) {
          bv = onehot[c](y, x);
          best = static_cast<int>(c);
        }
      out(y, x) = best;
    }
  return out;
}

// One 2D training unit: image plus soft label map.
struct SliceSample {
  Eigen::MatrixXf image;
  std::vector<Eigen::MatrixXf> label_onehot;
  std::string subject_id;
  int slice_index = 0;

  int num_classes() const { return static_cast<int>(label_onehot.size()); }
};

// All slices of a volume pair, along the through-plane axis.
inline std::vector<SliceSample> extract_slices(const VolumePair& pair) {
  pair.label.validate_against(pair.image);
  std::vector<SliceSample> out;
  out.reserve(pair.image.slices.size());
  for (int z = 0; z < pair.image.depth(); ++z) {
    SliceSample s;
    s.image = pair.image.slices[z];
    s.label_onehot = one_hot(pair.label.slices[z], pair.label.num_classes);
    s.subject_id = pair.image.subject_id;
    s.slice_index = z;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace tdaug
