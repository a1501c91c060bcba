#include "tdaug/data/phantom.hpp"

#include <cmath>
#include <stdexcept>

#include "tdaug/core/random.hpp"

namespace tdaug {

void SyntheticPhantomSpec::validate() const {
  if (image_size < 16) throw std::invalid_argument("phantom: image_size must be >= 16");
  if (num_slices < 1) throw std::invalid_argument("phantom: num_slices must be >= 1");
  if (num_structures < 1 || num_structures > 3)
    throw std::invalid_argument("phantom: num_structures must be in [1,3]");
  if (!(axis_base > 0.f)) throw std::invalid_argument("phantom: degenerate structure size");
  if (static_cast<int>(class_means.size()) < num_structures + 1)
    throw std::invalid_argument("phantom: class_means must cover background + structures");
}

namespace {

struct SubjectParams {
  float cy, cx;          // ellipse center (pixels)
  float ay, ax;          // outer semi-axes (pixels)
  float cos_t, sin_t;    // orientation
  std::vector<float> means;
  float gy, gx;          // background ramp direction * strength
};

SubjectParams draw_subject(const SyntheticPhantomSpec& spec, RandomStream& rng) {
  SubjectParams p;
  const float s = static_cast<float>(spec.image_size);
  p.cy = 0.5f * s + s * static_cast<float>(rng.uniform(-spec.center_jitter, spec.center_jitter));
  p.cx = 0.5f * s + s * static_cast<float>(rng.uniform(-spec.center_jitter, spec.center_jitter));
  const float scale = 1.f + static_cast<float>(rng.uniform(-spec.axis_jitter, spec.axis_jitter));
  const float ecc = static_cast<float>(rng.uniform(-spec.eccentricity, spec.eccentricity));
  p.ay = s * spec.axis_base * scale * (1.f + ecc);
  p.ax = s * spec.axis_base * scale * (1.f - ecc);
  const float theta = static_cast<float>(rng.uniform(-M_PI, M_PI));
  p.cos_t = std::cos(theta);
  p.sin_t = std::sin(theta);
  p.means.resize(spec.num_structures + 1);
  for (int c = 0; c <= spec.num_structures; ++c)
    p.means[c] = spec.class_means[c] +
                 static_cast<float>(rng.uniform(-spec.intensity_jitter, spec.intensity_jitter));
  const float gdir = static_cast<float>(rng.uniform(0.0, 2.0 * M_PI));
  const float gmag = static_cast<float>(rng.uniform(0.0, spec.gradient_strength));
  p.gy = gmag * std::sin(gdir);
  p.gx = gmag * std::cos(gdir);
  return p;
}

}  // namespace

std::vector<VolumePair> generate_phantom_dataset(const SyntheticPhantomSpec& spec, int n_volumes,
                                                 std::uint64_t seed) {
  spec.validate();
  if (n_volumes < 1) throw std::invalid_argument("phantom: n_volumes must be >= 1");

  std::vector<VolumePair> out;
  out.reserve(n_volumes);
  const int S = spec.image_size;

  for (int vi = 0; vi < n_volumes; ++vi) {
    RandomStream rng(derive_seed(seed, static_cast<std::uint64_t>(vi)));
    const SubjectParams p = draw_subject(spec, rng);

    VolumePair pair;
    pair.image.subject_id = "phantom_" + std::to_string(vi);
    pair.image.spacing = {1.f, 1.f, 5.f};
    pair.label.num_classes = spec.num_structures + 1;
    for (int c = 1; c <= spec.num_structures; ++c)
      pair.image.structure_names.push_back("structure_" + std::to_string(c));

    long long fg_total = 0;
    for (int z = 0; z < spec.num_slices; ++z) {
      // Axes taper toward the first/last slices (apex-like profile).
      const float mid = 0.5f * static_cast<float>(spec.num_slices - 1);
      const float rel = spec.num_slices > 1 ? std::abs(z - mid) / std::max(mid, 1.f) : 0.f;
      const float taper = 1.f - spec.slice_taper * rel;

      Eigen::MatrixXf img(S, S);
      LabelMat lab(S, S);
      for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) {
          // Rotated elliptical coordinate of this pixel.
          const float dy = (y - p.cy);
          const float dx = (x - p.cx);
          const float ry = p.cos_t * dy - p.sin_t * dx;
          const float rx = p.sin_t * dy + p.cos_t * dx;

          int cls = 0;
          float ring = spec.nesting;
          float ay = p.ay * taper, ax = p.ax * taper;
          for (int c = 1; c <= spec.num_structures; ++c) {
            const float q = (ry * ry) / (ay * ay) + (rx * rx) / (ax * ax);
            if (q <= 1.f) cls = c;
            ay *= ring;
            ax *= ring;
          }
          lab(y, x) = cls;
          if (cls > 0) ++fg_total;

          float v = p.means[cls];
          if (cls == 0)
            v += p.gy * (static_cast<float>(y) / S - 0.5f) +
                 p.gx * (static_cast<float>(x) / S - 0.5f);
          v += static_cast<float>(rng.normal(0.0, spec.noise_std));
          img(y, x) = v;
        }
      }
      pair.image.slices.push_back(std::move(img));
      pair.label.slices.push_back(std::move(lab));
    }

    const double fg_frac =
        static_cast<double>(fg_total) / (static_cast<double>(S) * S * spec.num_slices);
    if (fg_frac <= 0.0 || fg_frac >= 0.5)
      throw std::runtime_error("phantom: foreground fraction " + std::to_string(fg_frac) +
                               " outside (0, 0.5); adjust the spec");

    pair.image.validate();
    pair.label.validate_against(pair.image);
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace tdaug
