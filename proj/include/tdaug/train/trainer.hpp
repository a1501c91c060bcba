#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tdaug/aug/classic.hpp"
#include "tdaug/data/split.hpp"
#include "tdaug/data/volume.hpp"
#include "tdaug/eval/stats.hpp"
#include "tdaug/nn/adam.hpp"
#include "tdaug/nn/checkpoint.hpp"
#include "tdaug/train/config.hpp"

namespace tdaug {

// Slice-level training pools plus the 3D volumes evaluation needs.
struct TrainData {
  std::vector<SliceSample> labeled;
  std::vector<Eigen::MatrixXf> unlabeled;
  std::vector<VolumePair> validation;
  std::vector<VolumePair> test;
  int num_classes = 0;
  int h = 0, w = 0;

  // include_empty_slices keeps slices whose label map is all background in
  // the labeled pool (the default); set false to drop them.
  static TrainData assemble(const std::vector<VolumePair>& volumes, const DatasetSplit& split,
                            const std::vector<std::string>& labeled_subjects,
                            bool include_empty_slices = true);
};

struct GeneratorSelection {
  int best_iter = -1;
  double best_val_dsc = 0.0;
  nn::Checkpoint checkpoint;
};

struct LossRow {
  int iter = 0;
  double l_s = 0.0, l_adv_d = 0.0, l_adv_g = 0.0, l_ld = 0.0, l_reg = 0.0;
  double val_dsc = -1.0;  // -1 when not evaluated this iteration
};

struct TrainLog {
  std::vector<LossRow> rows;
  void write_csv(const std::string& path) const;
};

struct BatchComposition {
  int n_affine = 0;
  int n_policy = 0;
};

struct AugmentedSets {
  std::vector<SliceSample> gv, gi, gvi;
};

// Orchestrates the training sequence: supervised pre-training of the
// segmenter, joint adversarial training of (segmenter, generator,
// discriminator) per generator kind, conditional sampling from the selected
// generators, and the final from-scratch retrain under an augmentation
// policy.
class Trainer {
 public:
  Trainer(TrainData data, TrainConfig cfg);

  const TrainData& data() const { return data_; }
  const TrainConfig& config() const { return cfg_; }

  nn::Checkpoint pretrain_segmenter(TrainLog* log = nullptr);
  void set_pretrained(nn::Checkpoint ckpt) { pretrained_ = std::move(ckpt); }
  const std::optional<nn::Checkpoint>& pretrained() const { return pretrained_; }

  GeneratorSelection train_generator_jointly(nn::GeneratorKind kind, TrainLog* log = nullptr);
  void set_generator_selection(nn::GeneratorKind kind, GeneratorSelection sel);
  const std::optional<GeneratorSelection>& selection(nn::GeneratorKind kind) const {
    return kind == nn::GeneratorKind::Deform ? sel_v_ : sel_i_;
  }

  AugmentedSets sample_augmented_set(int n_per_source, RandomStream& rng);

  nn::Checkpoint final_retrain(AugPolicy policy, TrainLog* log = nullptr);
  const std::vector<BatchComposition>& retrain_batch_log() const { return retrain_batches_; }

  RunResult evaluate_checkpoint(const nn::Checkpoint& seg_ckpt,
                                const std::string& policy_name) const;

  // Mean per-pixel L1 magnitude of generated fields over a fixed probe set;
  // used to quantify the large-deviation effect.
  double mean_abs_field(const nn::Checkpoint& gen_ckpt, nn::GeneratorKind kind,
                        const std::vector<int>& probe_slices,
                        const std::vector<MatrixX<float>>& probe_z) const;

  double validation_dsc(nn::SegmenterNet<float>& seg) const;

 private:
  friend struct TrainerTestHook;

  struct GeneratedPair {
    Eigen::MatrixXf image;
    std::vector<Eigen::MatrixXf> label;
  };

  Tensor4f image_batch(const std::vector<const SliceSample*>& samples) const;
  Tensor4f label_batch(const std::vector<const SliceSample*>& samples) const;
  std::vector<const SliceSample*> draw_labeled(int n, RandomStream& rng) const;

  MatrixX<float> draw_z(int n, RandomStream& rng) const;
  std::vector<GeneratedPair> generate_batch(nn::GeneratorNet<float>& gen,
                                            const std::vector<const SliceSample*>& srcs,
                                            RandomStream& rng) const;
  GeneratedPair generate_one(nn::GeneratorNet<float>& gen, const SliceSample& src,
                             RandomStream& rng) const;
  std::vector<SliceSample> policy_batch(AugPolicy policy, int count, RandomStream& rng);

  LabelVolume predict_volume(nn::SegmenterNet<float>& seg, const ImageVolume& vol) const;

  TrainData data_;
  TrainConfig cfg_;
  VectorX<float> class_weights_;

  std::optional<nn::Checkpoint> pretrained_;
  std::optional<GeneratorSelection> sel_v_, sel_i_;
  std::unique_ptr<nn::GeneratorNet<float>> frozen_v_, frozen_i_;

  std::vector<BatchComposition> retrain_batches_;
};

}  // namespace tdaug
