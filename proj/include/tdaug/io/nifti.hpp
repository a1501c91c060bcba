#pragma once

#include <string>

#include "tdaug/data/volume.hpp"

namespace tdaug {

// Minimal NIfTI-1 support (.nii and .nii.gz, little-endian). Enough for the
// volumes this pipeline consumes: 3D, common scalar datatypes, scl_slope
// scaling, pixdim spacing.
ImageVolume read_nifti_image(const std::string& path);
LabelVolume read_nifti_labels(const std::string& path, int num_classes);

void write_nifti_image(const ImageVolume& volume, const std::string& path);
void write_nifti_labels(const LabelVolume& labels, const std::array<float, 3>& spacing,
                        const std::string& path);

}  // namespace tdaug
