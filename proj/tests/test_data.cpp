#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <tdaug/core/random.hpp>
#include <tdaug/data/phantom.hpp>
#include <tdaug/data/split.hpp>
#include <tdaug/data/volume.hpp>
#include <tdaug/io/array_file.hpp>
#include <tdaug/io/nifti.hpp>

using namespace tdaug;

namespace {

std::vector<SubjectRecord> grouped_subjects(int per_group, int n_groups) {
  std::vector<SubjectRecord> out;
  for (int g = 0; g < n_groups; ++g)
    for (int i = 0; i < per_group; ++i)
      out.push_back({"s" + std::to_string(g) + "_" + std::to_string(i), "grp" + std::to_string(g)});
  return out;
}

bool disjoint(const DatasetSplit& s) {
  std::set<std::string> seen;
  std::size_t total = 0;
  for (const auto* set : {&s.labeled_pool, &s.unlabeled, &s.validation, &s.test}) {
    total += set->size();
    for (const auto& id : *set) seen.insert(id);
  }
  return seen.size() == total;
}

}  // namespace

TEST_CASE("build_split carves 100 grouped volumes into 53 + 25 + 20 + 2") {
  const auto subjects = grouped_subjects(20, 5);
  const DatasetSplit split = build_split(subjects, {25, 20, 2}, 0);
  CHECK(split.labeled_pool.size() == 53);
  CHECK(split.unlabeled.size() == 25);
  CHECK(split.test.size() == 20);
  CHECK(split.validation.size() == 2);
  CHECK(disjoint(split));

  // balanced per sub-group where the count divides evenly
  std::map<std::string, int> ul_counts, ts_counts;
  for (const auto& id : split.unlabeled) ul_counts[split.groups.at(id)]++;
  for (const auto& id : split.test) ts_counts[split.groups.at(id)]++;
  for (const auto& [g, n] : ul_counts) CHECK(n == 5);
  for (const auto& [g, n] : ts_counts) CHECK(n == 4);
}

TEST_CASE("build_split rejects impossible requests by naming the deficit") {
  std::vector<SubjectRecord> four;
  for (int i = 0; i < 4; ++i) four.push_back({"s" + std::to_string(i), ""});
  CHECK_THROWS_WITH_AS(build_split(four, {25, 20, 2}, 0),
                       doctest::Contains("insufficient volumes"), std::invalid_argument);
}

TEST_CASE("build_split is deterministic and disjoint across many seeds") {
  const auto subjects = grouped_subjects(8, 5);
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    const DatasetSplit a = build_split(subjects, {10, 8, 2}, seed);
    CHECK(disjoint(a));
    const DatasetSplit b = build_split(subjects, {10, 8, 2}, seed);
    CHECK(a.labeled_pool == b.labeled_pool);
    CHECK(a.unlabeled == b.unlabeled);
    CHECK(a.validation == b.validation);
    CHECK(a.test == b.test);
  }
}

TEST_CASE("labeled subset sampling") {
  const auto subjects = grouped_subjects(20, 5);
  const DatasetSplit split = build_split(subjects, {25, 20, 2}, 3);

  SUBCASE("five single-volume replicates cover five distinct sub-groups") {
    std::set<std::string> groups_hit;
    for (int rep = 0; rep < 5; ++rep) {
      const auto picked = sample_labeled_subset(split, 1, rep);
      REQUIRE(picked.size() == 1);
      groups_hit.insert(split.groups.at(picked[0]));
    }
    CHECK(groups_hit.size() == 5);
  }

  SUBCASE("requesting the whole pool returns the whole pool") {
    const auto all = sample_labeled_subset(split, static_cast<int>(split.labeled_pool.size()), 2);
    CHECK(all.size() == split.labeled_pool.size());
  }

  SUBCASE("the same replicate draws the same subset") {
    CHECK(sample_labeled_subset(split, 3, 1) == sample_labeled_subset(split, 3, 1));
  }

  SUBCASE("replicates outside [0,4] are rejected") {
    CHECK_THROWS_AS(sample_labeled_subset(split, 1, 5), std::invalid_argument);
    CHECK_THROWS_AS(sample_labeled_subset(split, 1, -1), std::invalid_argument);
  }

  SUBCASE("oversized requests are rejected") {
    CHECK_THROWS_AS(
        sample_labeled_subset(split, static_cast<int>(split.labeled_pool.size()) + 1, 0),
        std::invalid_argument);
  }
}

TEST_CASE("split manifest round-trips through JSON") {
  const auto subjects = grouped_subjects(10, 2);
  const DatasetSplit split = build_split(subjects, {6, 4, 2}, 11);
  const DatasetSplit back = split_from_json(split_to_json(split));
  CHECK(back.labeled_pool == split.labeled_pool);
  CHECK(back.unlabeled == split.unlabeled);
  CHECK(back.validation == split.validation);
  CHECK(back.test == split.test);
  CHECK(back.seed == split.seed);
}

TEST_CASE("one-hot then argmax recovers the labels exactly") {
  RandomStream rng(5);
  LabelMat labels(12, 9);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 9; ++x) labels(y, x) = rng.uniform_int(0, 3);
  const auto oh = one_hot(labels, 4);
  // valid probability map
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 9; ++x) {
      float sum = 0.f;
      for (const auto& ch : oh) sum += ch(y, x);
      CHECK(sum == doctest::Approx(1.f));
    }
  CHECK((onehot_argmax(oh) - labels).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("phantom generation") {
  SyntheticPhantomSpec spec;
  spec.image_size = 32;
  spec.num_slices = 3;

  SUBCASE("single-structure phantoms label only {0,1}") {
    SyntheticPhantomSpec one = spec;
    one.num_structures = 1;
    const auto volumes = generate_phantom_dataset(one, 32, 7);
    CHECK(volumes.size() == 32);
    for (const auto& pair : volumes) {
      CHECK(pair.label.num_classes == 2);
      int max_label = 0;
      for (const auto& sl : pair.label.slices) max_label = std::max(max_label, sl.maxCoeff());
      CHECK(max_label == 1);
    }
  }

  SUBCASE("degenerate specs are rejected") {
    SyntheticPhantomSpec bad = spec;
    bad.num_structures = 0;
    CHECK_THROWS_AS(generate_phantom_dataset(bad, 4, 0), std::invalid_argument);
    SyntheticPhantomSpec tiny = spec;
    tiny.axis_base = 0.f;
    CHECK_THROWS_AS(generate_phantom_dataset(tiny, 4, 0), std::invalid_argument);
  }

  SUBCASE("different seeds give different voxels") {
    const auto a = generate_phantom_dataset(spec, 2, 1);
    const auto b = generate_phantom_dataset(spec, 2, 2);
    bool any_diff = false;
    for (std::size_t v = 0; v < a.size() && !any_diff; ++v)
      for (int z = 0; z < a[v].image.depth() && !any_diff; ++z)
        any_diff = (a[v].image.slices[z] - b[v].image.slices[z]).cwiseAbs().maxCoeff() > 0.f;
    CHECK(any_diff);
  }

  SUBCASE("generation is bit-reproducible for a fixed seed") {
    const auto a = generate_phantom_dataset(spec, 3, 99);
    const auto b = generate_phantom_dataset(spec, 3, 99);
    for (std::size_t v = 0; v < a.size(); ++v)
      for (int z = 0; z < a[v].image.depth(); ++z) {
        CHECK((a[v].image.slices[z] - b[v].image.slices[z]).cwiseAbs().maxCoeff() == 0.f);
        CHECK((a[v].label.slices[z] - b[v].label.slices[z]).cwiseAbs().maxCoeff() == 0);
      }
  }

  SUBCASE("foreground occupies a sane fraction and shapes vary across subjects") {
    const auto volumes = generate_phantom_dataset(spec, 8, 3);
    long long fg0 = -1;
    bool shape_varies = false;
    for (const auto& pair : volumes) {
      long long fg = 0, total = 0;
      for (const auto& sl : pair.label.slices) {
        fg += (sl.array() > 0).count();
        total += sl.size();
      }
      CHECK(fg > 0);
      CHECK(fg < total / 2);
      if (fg0 < 0)
        fg0 = fg;
      else if (fg != fg0)
        shape_varies = true;
    }
    CHECK(shape_varies);
  }
}

TEST_CASE("volumes survive the NIfTI round trip") {
  SyntheticPhantomSpec spec;
  spec.image_size = 24;
  spec.num_slices = 2;
  const auto volumes = generate_phantom_dataset(spec, 1, 4);
  const auto& pair = volumes[0];

  for (const char* suffix : {".nii", ".nii.gz"}) {
    const std::string img_path = std::string("/tmp/tdaug_test_img") + suffix;
    const std::string lab_path = std::string("/tmp/tdaug_test_lab") + suffix;
    write_nifti_image(pair.image, img_path);
    write_nifti_labels(pair.label, pair.image.spacing, lab_path);

    const ImageVolume img = read_nifti_image(img_path);
    CHECK(img.depth() == pair.image.depth());
    CHECK(img.height() == pair.image.height());
    CHECK(img.spacing[0] == doctest::Approx(pair.image.spacing[0]));
    for (int z = 0; z < img.depth(); ++z)
      CHECK((img.slices[z] - pair.image.slices[z]).cwiseAbs().maxCoeff() == 0.f);

    const LabelVolume lab = read_nifti_labels(lab_path, pair.label.num_classes);
    for (int z = 0; z < lab.depth(); ++z)
      CHECK((lab.slices[z] - pair.label.slices[z]).cwiseAbs().maxCoeff() == 0);
  }
}

TEST_CASE("volumes survive the array cache round trip") {
  SyntheticPhantomSpec spec;
  spec.image_size = 16;
  spec.num_slices = 2;
  const auto volumes = generate_phantom_dataset(spec, 1, 6);
  const auto& pair = volumes[0];

  save_image_array(pair.image, "/tmp/tdaug_test_img.tda", "{\"origin\":\"test\"}");
  std::string meta;
  const ImageVolume img = load_image_array("/tmp/tdaug_test_img.tda", &meta);
  CHECK(meta.find("origin") != std::string::npos);
  CHECK(img.subject_id == pair.image.subject_id);
  for (int z = 0; z < img.depth(); ++z)
    CHECK((img.slices[z] - pair.image.slices[z]).cwiseAbs().maxCoeff() == 0.f);

  save_label_array(pair.label, "/tmp/tdaug_test_lab.tda");
  const LabelVolume lab = load_label_array("/tmp/tdaug_test_lab.tda");
  CHECK(lab.num_classes == pair.label.num_classes);
  for (int z = 0; z < lab.depth(); ++z)
    CHECK((lab.slices[z] - pair.label.slices[z]).cwiseAbs().maxCoeff() == 0);
}
