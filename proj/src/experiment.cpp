#include <filesystem>

#include "tdaug/nn/checkpoint.hpp"
#include "tdaug/train/experiment.hpp"

namespace tdaug {

namespace fs = std::filesystem;

RunResult run_single(const std::vector<VolumePair>& volumes, const DatasetSplit& split,
                     const TrainConfig& cfg, int n_labeled, int replicate, AugPolicy policy,
                     const std::string& run_dir) {
  const auto labeled = sample_labeled_subset(split, n_labeled, replicate);
  Trainer trainer(TrainData::assemble(volumes, split, labeled), cfg);

  const bool dump = !run_dir.empty();
  if (dump) fs::create_directories(fs::path(run_dir) / "checkpoints");

  TrainLog pre_log;
  nn::Checkpoint pre = trainer.pretrain_segmenter(&pre_log);
  if (dump) save_checkpoint(pre, (fs::path(run_dir) / "checkpoints" / "pretrain.ckpt").string());

  if (policy_needs_deform_generator(policy)) {
    TrainLog glog;
    const auto sel = trainer.train_generator_jointly(nn::GeneratorKind::Deform, &glog);
    if (dump) {
      save_checkpoint(sel.checkpoint,
                      (fs::path(run_dir) / "checkpoints" / "gen_v.ckpt").string());
      glog.write_csv((fs::path(run_dir) / "gen_v_losses.csv").string());
    }
  }
  if (policy_needs_intensity_generator(policy)) {
    TrainLog glog;
    const auto sel = trainer.train_generator_jointly(nn::GeneratorKind::Intensity, &glog);
    if (dump) {
      save_checkpoint(sel.checkpoint,
                      (fs::path(run_dir) / "checkpoints" / "gen_i.ckpt").string());
      glog.write_csv((fs::path(run_dir) / "gen_i_losses.csv").string());
    }
  }

  TrainLog final_log;
  nn::Checkpoint final_ckpt = trainer.final_retrain(policy, &final_log);
  if (dump) {
    save_checkpoint(final_ckpt, (fs::path(run_dir) / "checkpoints" / "final.ckpt").string());
    final_log.write_csv((fs::path(run_dir) / "losses.csv").string());
  }

  RunResult result = trainer.evaluate_checkpoint(final_ckpt, to_string(policy));
  result.replicate = replicate;
  return result;
}

std::vector<MatrixEntry> run_experiment_matrix(const std::vector<VolumePair>& volumes,
                                               const DatasetSplit& split, const TrainConfig& base,
                                               int n_labeled, AugPolicy policy, int replicates,
                                               int restarts) {
  std::vector<MatrixEntry> out;
  for (int rep = 0; rep < replicates; ++rep) {
    for (int restart = 0; restart < restarts; ++restart) {
      MatrixEntry entry;
      entry.result.replicate = rep;
      entry.result.restart = restart;
      try {
        TrainConfig cfg = base;
        cfg.seed = derive_seed(base.seed, 7919ULL * rep + restart);
        entry.result = run_single(volumes, split, cfg, n_labeled, rep, policy);
        entry.result.replicate = rep;
        entry.result.restart = restart;
      } catch (const std::exception& e) {
        entry.failed = true;
        entry.error = e.what();
        entry.result.policy = to_string(policy);
      }
      out.push_back(std::move(entry));
    }
  }
  return out;
}

std::vector<AblationGroup> ablate_lambda_grid(const std::vector<VolumePair>& volumes,
                                              const DatasetSplit& split, const TrainConfig& base,
                                              int n_labeled, int replicates, int restarts) {
  std::vector<AblationGroup> out;
  const float advs[2] = {0.f, 1.f};
  const float lds[2] = {0.f, 1e-3f};
  for (float adv : advs)
    for (float ld : lds) {
      TrainConfig cfg = base;
      cfg.lambda_adv = adv;
      cfg.lambda_ld = ld;
      AblationGroup group;
      group.label = "adv=" + std::to_string(adv) + ",ld=" + std::to_string(ld);
      group.runs =
          run_experiment_matrix(volumes, split, cfg, n_labeled, AugPolicy::GDGI, replicates,
                                restarts);
      out.push_back(std::move(group));
    }
  return out;
}

std::vector<AblationGroup> ablate_joint_vs_independent(const std::vector<VolumePair>& volumes,
                                                       const DatasetSplit& split,
                                                       const TrainConfig& base, int n_labeled,
                                                       int replicates, int restarts) {
  std::vector<AblationGroup> out;
  for (bool joint : {true, false}) {
    TrainConfig cfg = base;
    cfg.joint = joint;
    AblationGroup group;
    group.label = joint ? "joint" : "independent";
    group.runs = run_experiment_matrix(volumes, split, cfg, n_labeled, AugPolicy::GDGI,
                                       replicates, restarts);
    out.push_back(std::move(group));
  }
  return out;
}

std::vector<AblationGroup> ablate_unlabeled_count(const std::vector<VolumePair>& volumes,
                                                  const DatasetSplit& split,
                                                  const TrainConfig& base, int n_labeled,
                                                  const std::vector<int>& n_ul_values,
                                                  int replicates, int restarts) {
  std::vector<AblationGroup> out;
  for (int n_ul : n_ul_values) {
    if (n_ul < 1 || n_ul > static_cast<int>(split.unlabeled.size()))
      throw std::invalid_argument("ablate_unlabeled_count: N_UL out of range: " +
                                  std::to_string(n_ul));
    DatasetSplit reduced = split;
    reduced.unlabeled.resize(n_ul);
    AblationGroup group;
    group.label = "N_UL=" + std::to_string(n_ul);
    group.runs = run_experiment_matrix(volumes, reduced, base, n_labeled, AugPolicy::GDGI,
                                       replicates, restarts);
    out.push_back(std::move(group));
  }
  return out;
}

std::vector<AblationGroup> ablate_labeled_count(const std::vector<VolumePair>& volumes,
                                                const DatasetSplit& split, const TrainConfig& base,
                                                const std::vector<int>& n_l_values, int replicates,
                                                int restarts) {
  std::vector<AblationGroup> out;
  for (int n_l : n_l_values) {
    AblationGroup group;
    group.label = "N_L=" + std::to_string(n_l);
    group.runs =
        run_experiment_matrix(volumes, split, base, n_l, AugPolicy::GDGI, replicates, restarts);
    out.push_back(std::move(group));
  }
  return out;
}

std::vector<AblationGroup> ablate_new_split(const std::vector<VolumePair>& volumes,
                                            const TrainConfig& base, const SplitCounts& counts,
                                            std::uint64_t new_split_seed, int n_labeled,
                                            int replicates, int restarts) {
  std::vector<SubjectRecord> subjects;
  for (const auto& v : volumes) subjects.push_back({v.image.subject_id, ""});
  const DatasetSplit fresh = build_split(subjects, counts, new_split_seed);
  AblationGroup group;
  group.label = "split_seed=" + std::to_string(new_split_seed);
  group.runs = run_experiment_matrix(volumes, fresh, base, n_labeled, AugPolicy::GDGI, replicates,
                                     restarts);
  return {std::move(group)};
}

std::vector<AblationGroup> ablate_fixed_iters(const std::vector<VolumePair>& volumes,
                                              const DatasetSplit& split, const TrainConfig& base,
                                              int n_labeled, const std::vector<int>& iter_values,
                                              int replicates, int restarts) {
  std::vector<AblationGroup> out;
  for (int iters : iter_values) {
    TrainConfig cfg = base;
    cfg.use_validation = false;
    cfg.fixed_iters = iters;
    AblationGroup group;
    group.label = "fixed_iters=" + std::to_string(iters);
    group.runs = run_experiment_matrix(volumes, split, cfg, n_labeled, AugPolicy::GDGI,
                                       replicates, restarts);
    out.push_back(std::move(group));
  }
  return out;
}

}  // namespace tdaug
