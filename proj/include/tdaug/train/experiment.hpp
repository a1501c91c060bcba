#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tdaug/data/phantom.hpp"
#include "tdaug/train/trainer.hpp"

namespace tdaug {

// Everything one experiment needs, JSON round-trippable for the CLI.
struct ExperimentConfig {
  TrainConfig train;
  SyntheticPhantomSpec phantom;
  SplitCounts counts;
  int n_volumes = 32;      // phantom dataset size
  int n_labeled = 1;       // N_L
  int replicate = 0;       // which of the five pre-committed labeled draws
  std::string policy = "GD+GI";
  std::string dataset = "phantom";  // "phantom" or a manifest path for real data
  std::string preset;               // preprocessing preset for real data
  std::uint64_t split_seed = 0;
  bool include_empty_slices = true;

  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;
  std::string config_hash() const;
};

// Full single run: pretrain, train whichever generators the policy needs,
// final retrain, evaluate on the test set.
RunResult run_single(const std::vector<VolumePair>& volumes, const DatasetSplit& split,
                     const TrainConfig& cfg, int n_labeled, int replicate, AugPolicy policy,
                     const std::string& run_dir = "");

// replicates x restarts grid; failures are recorded in the result rather than
// aborting the matrix.
struct MatrixEntry {
  RunResult result;
  bool failed = false;
  std::string error;
};

std::vector<MatrixEntry> run_experiment_matrix(const std::vector<VolumePair>& volumes,
                                               const DatasetSplit& split, const TrainConfig& base,
                                               int n_labeled, AugPolicy policy, int replicates = 5,
                                               int restarts = 3);

// Ablation drivers. Each returns one labelled group of run results per
// configuration point.
struct AblationGroup {
  std::string label;
  std::vector<MatrixEntry> runs;
};

std::vector<AblationGroup> ablate_lambda_grid(const std::vector<VolumePair>& volumes,
                                              const DatasetSplit& split, const TrainConfig& base,
                                              int n_labeled, int replicates, int restarts);
std::vector<AblationGroup> ablate_joint_vs_independent(const std::vector<VolumePair>& volumes,
                                                       const DatasetSplit& split,
                                                       const TrainConfig& base, int n_labeled,
                                                       int replicates, int restarts);
std::vector<AblationGroup> ablate_unlabeled_count(const std::vector<VolumePair>& volumes,
                                                  const DatasetSplit& split,
                                                  const TrainConfig& base, int n_labeled,
                                                  const std::vector<int>& n_ul_values,
                                                  int replicates, int restarts);
std::vector<AblationGroup> ablate_labeled_count(const std::vector<VolumePair>& volumes,
                                                const DatasetSplit& split, const TrainConfig& base,
                                                const std::vector<int>& n_l_values, int replicates,
                                                int restarts);
std::vector<AblationGroup> ablate_new_split(const std::vector<VolumePair>& volumes,
                                            const TrainConfig& base, const SplitCounts& counts,
                                            std::uint64_t new_split_seed, int n_labeled,
                                            int replicates, int restarts);
std::vector<AblationGroup> ablate_fixed_iters(const std::vector<VolumePair>& volumes,
                                              const DatasetSplit& split, const TrainConfig& base,
                                              int n_labeled, const std::vector<int>& iter_values,
                                              int replicates, int restarts);

}  // namespace tdaug
