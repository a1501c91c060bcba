#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tdaug/data/volume.hpp"
#include "tdaug/warp/warp.hpp"

namespace tdaug {

// 8-bit PNG output for sample and field dumps. `lo`/`hi` map to black/white;
// values outside the range are clipped for display only.
void write_png_gray(const Eigen::MatrixXf& img, const std::string& path, float lo = 0.f,
                    float hi = 1.f);

void write_png_rgb(const Eigen::MatrixXf& r, const Eigen::MatrixXf& g, const Eigen::MatrixXf& b,
                   const std::string& path);

// Label map rendered with a fixed per-class palette.
void write_png_labels(const LabelMat& labels, const std::string& path);

// Field diagnostics: displacement magnitude heatmap with a coarse arrow
// overlay, and a signed heatmap for intensity fields.
void write_png_deformation(const DeformationField& field, const std::string& path,
                           int arrow_stride = 8);
void write_png_intensity_field(const IntensityField& field, const std::string& path);

}  // namespace tdaug
