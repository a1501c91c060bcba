#pragma once

#include <string>

#include "tdaug/data/volume.hpp"

namespace tdaug {

// Portable array cache for preprocessed volumes: a one-line JSON header
// (shape, dtype, free-form metadata) followed by raw little-endian data.
// Training reads these instead of re-parsing NIfTI.
void save_image_array(const ImageVolume& vol, const std::string& path,
                      const std::string& meta_json = "{}");
ImageVolume load_image_array(const std::string& path, std::string* meta_json = nullptr);

void save_label_array(const LabelVolume& vol, const std::string& path,
                      const std::string& meta_json = "{}");
LabelVolume load_label_array(const std::string& path, std::string* meta_json = nullptr);

}  // namespace tdaug
