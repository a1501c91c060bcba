#pragma once

#include <cstdint>
#include <vector>

#include "tdaug/data/volume.hpp"

namespace tdaug {

// Parameterized family of nested-ellipse phantoms. Each subject varies in
// shape (center/axes/orientation jitter, through-plane taper) and intensity
// (per-class mean offsets, oriented background ramp), so a population of
// phantoms carries variation a single volume does not.
struct SyntheticPhantomSpec {
  int image_size = 64;
  int num_slices = 6;
  int num_structures = 2;  // foreground classes, nested outside-in (1..3)

  float center_jitter = 0.08f;    // fraction of image size, per axis
  float axis_base = 0.27f;        // outer semi-axis as fraction of image size
  float axis_jitter = 0.22f;      // relative +- range on subject scale
  float eccentricity = 0.25f;     // max relative difference between semi-axes
  float slice_taper = 0.35f;      // axis shrink toward the outer slices
  float nesting = 0.62f;          // axis ratio between consecutive structures

  std::vector<float> class_means = {0.30f, 0.62f, 0.85f, 0.50f};  // background first
  float intensity_jitter = 0.16f;  // per-subject per-class mean offset range
  float gradient_strength = 0.20f; // background ramp amplitude
  float noise_std = 0.03f;

  void validate() const;
};

// Deterministic given (spec, n_volumes, seed); per-subject streams derive
// from the root seed.
std::vector<VolumePair> generate_phantom_dataset(const SyntheticPhantomSpec& spec,
                                                 int n_volumes, std::uint64_t seed);

}  // namespace tdaug
