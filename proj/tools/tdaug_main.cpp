#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "tdaug/data/phantom.hpp"
#include "tdaug/eval/report.hpp"
#include "tdaug/io/array_file.hpp"
#include "tdaug/io/nifti.hpp"
#include "tdaug/io/png.hpp"
#include "tdaug/preprocess/preprocess.hpp"
#include "tdaug/train/experiment.hpp"

namespace fs = std::filesystem;
using namespace tdaug;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string run_dir = "run";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config JSON");
  cmd->add_option("--run", opts.run_dir, "run directory");
  cmd->add_option("--seed", opts.seed, "training seed override")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
}

ExperimentConfig load_config(const CommonOpts& opts) {
  ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = ExperimentConfig::load(opts.config_path);
  if (opts.seed_set) cfg.train.seed = opts.seed;
  return cfg;
}

ImageVolume load_any_image(const std::string& path) {
  if (path.size() > 4 && path.compare(path.size() - 4, 4, ".tda") == 0)
    return load_image_array(path);
  return read_nifti_image(path);
}

LabelVolume load_any_labels(const std::string& path, int num_classes) {
  if (path.size() > 4 && path.compare(path.size() - 4, 4, ".tda") == 0) {
    LabelVolume v = load_label_array(path);
    if (num_classes > 0) v.num_classes = std::max(v.num_classes, num_classes);
    return v;
  }
  return read_nifti_labels(path, num_classes);
}

int infer_num_classes(const std::vector<ManifestEntry>& entries) {
  int classes = 2;
  for (const auto& e : entries) {
    if (e.label_path.empty()) continue;
    LabelVolume v = load_any_labels(e.label_path, 0);
    int max_label = 0;
    for (const auto& sl : v.slices) max_label = std::max(max_label, sl.maxCoeff());
    classes = std::max(classes, max_label + 1);
  }
  return classes;
}

// Materializes the dataset an experiment runs on: either the bundled phantom
// family (deterministic from the config) or a manifest of preprocessed files.
std::vector<VolumePair> materialize_volumes(const ExperimentConfig& cfg) {
  std::vector<VolumePair> volumes;
  if (cfg.dataset == "phantom") {
    volumes = generate_phantom_dataset(cfg.phantom, cfg.n_volumes, cfg.split_seed);
    for (auto& pair : volumes)
      pair.image = normalize_percentile(pair.image);
  } else {
    const auto entries = load_manifest(cfg.dataset);
    const int classes = infer_num_classes(entries);
    for (const auto& e : entries) {
      VolumePair pair;
      pair.image = load_any_image(e.image_path);
      pair.image.subject_id = e.subject_id;
      if (e.label_path.empty())
        throw std::runtime_error("subject without labels in training manifest: " + e.subject_id);
      pair.label = load_any_labels(e.label_path, classes);
      volumes.push_back(std::move(pair));
    }
  }
  return volumes;
}

DatasetSplit obtain_split(const ExperimentConfig& cfg, const std::vector<VolumePair>& volumes,
                          const std::string& run_dir) {
  const fs::path split_path = fs::path(run_dir) / "splits.json";
  if (fs::exists(split_path)) return load_split(split_path.string());
  std::vector<SubjectRecord> subjects;
  for (const auto& v : volumes) subjects.push_back({v.image.subject_id, ""});
  DatasetSplit split = build_split(subjects, cfg.counts, cfg.split_seed);
  fs::create_directories(run_dir);
  save_split(split, split_path.string());
  return split;
}

Trainer make_trainer(const ExperimentConfig& cfg, const std::vector<VolumePair>& volumes,
                     const DatasetSplit& split) {
  const auto labeled = sample_labeled_subset(split, cfg.n_labeled, cfg.replicate);
  return Trainer(
      TrainData::assemble(volumes, split, labeled, cfg.include_empty_slices), cfg.train);
}

void load_generator_if_present(Trainer& trainer, nn::GeneratorKind kind,
                               const std::string& run_dir) {
  const char* name = kind == nn::GeneratorKind::Deform ? "gen_v.ckpt" : "gen_i.ckpt";
  const fs::path path = fs::path(run_dir) / "checkpoints" / name;
  if (!fs::exists(path)) return;
  GeneratorSelection sel;
  sel.checkpoint = nn::load_checkpoint(path.string());
  trainer.set_generator_selection(kind, std::move(sel));
}

void write_val_trace(const TrainLog& log, const std::string& path) {
  std::ofstream out(path);
  out << "iter,val_DSC\n";
  for (const auto& r : log.rows)
    if (r.val_dsc >= 0.0) out << r.iter << ',' << r.val_dsc << '\n';
}

// ---------------------------------------------------------------------------

int cmd_make_phantoms(const CommonOpts& opts, const std::string& out_dir, int n, int size,
                      int slices, int structures, std::uint64_t seed) {
  ExperimentConfig cfg = load_config(opts);
  if (n > 0) cfg.n_volumes = n;
  if (size > 0) cfg.phantom.image_size = size;
  if (slices > 0) cfg.phantom.num_slices = slices;
  if (structures > 0) cfg.phantom.num_structures = structures;

  const auto volumes = generate_phantom_dataset(cfg.phantom, cfg.n_volumes, seed);
  fs::create_directories(out_dir);
  std::vector<ManifestEntry> entries;
  for (const auto& pair : volumes) {
    ManifestEntry e;
    e.subject_id = pair.image.subject_id;
    e.image_path = (fs::path(out_dir) / (pair.image.subject_id + "_img.nii.gz")).string();
    e.label_path = (fs::path(out_dir) / (pair.image.subject_id + "_lab.nii.gz")).string();
    write_nifti_image(pair.image, e.image_path);
    write_nifti_labels(pair.label, pair.image.spacing, e.label_path);
    entries.push_back(std::move(e));
  }
  save_manifest(entries, (fs::path(out_dir) / "manifest.json").string());
  std::cout << "wrote " << volumes.size() << " phantom volumes to " << out_dir << "\n";
  return 0;
}

int cmd_preprocess(const CommonOpts& opts, const std::string& manifest_path,
                   const std::string& out_dir, const std::string& preset,
                   std::vector<float> res, std::vector<int> size) {
  PreprocessConfig cfg;
  std::string chosen = preset;
  if (chosen.empty() && !opts.config_path.empty())
    chosen = ExperimentConfig::load(opts.config_path).preset;
  if (!chosen.empty()) cfg = preset_by_name(chosen);
  if (res.size() == 2) {
    cfg.target_res_row = res[0];
    cfg.target_res_col = res[1];
  }
  if (size.size() == 2) {
    cfg.target_h = size[0];
    cfg.target_w = size[1];
  }

  const auto entries = load_manifest(manifest_path);
  const int classes = infer_num_classes(entries);
  fs::create_directories(out_dir);
  std::vector<ManifestEntry> out_entries;
  for (const auto& e : entries) {
    ImageVolume img = load_any_image(e.image_path);
    img.subject_id = e.subject_id;
    std::optional<LabelVolume> lab;
    if (!e.label_path.empty()) lab = load_any_labels(e.label_path, classes);

    const std::array<float, 3> native_spacing = img.spacing;
    img = normalize_percentile(img, cfg.percentile_lo, cfg.percentile_hi);
    auto [rimg, rlab] = resample_and_crop(img, lab, cfg);

    nlohmann::json meta;
    meta["native_spacing"] = {native_spacing[0], native_spacing[1], native_spacing[2]};
    meta["target_resolution"] = {cfg.target_res_row, cfg.target_res_col};
    meta["target_size"] = {cfg.target_h, cfg.target_w};
    meta["percentiles"] = {cfg.percentile_lo, cfg.percentile_hi};

    ManifestEntry oe;
    oe.subject_id = e.subject_id;
    oe.group = e.group;
    oe.image_path = (fs::path(out_dir) / (e.subject_id + "_img.tda")).string();
    save_image_array(rimg, oe.image_path, meta.dump());
    if (rlab) {
      oe.label_path = (fs::path(out_dir) / (e.subject_id + "_lab.tda")).string();
      save_label_array(*rlab, oe.label_path, meta.dump());
    }
    out_entries.push_back(std::move(oe));
  }
  save_manifest(out_entries, (fs::path(out_dir) / "manifest.json").string());
  std::cout << "preprocessed " << out_entries.size() << " volumes into " << out_dir << "\n";
  return 0;
}

int cmd_make_split(const CommonOpts& opts, const std::string& manifest_path,
                   const std::string& out_path, int n_ul, int n_ts, int n_vl,
                   std::uint64_t seed) {
  std::vector<SubjectRecord> subjects;
  if (!manifest_path.empty()) {
    for (const auto& e : load_manifest(manifest_path)) subjects.push_back({e.subject_id, e.group});
  } else {
    ExperimentConfig cfg = load_config(opts);
    const auto volumes = materialize_volumes(cfg);
    for (const auto& v : volumes) subjects.push_back({v.image.subject_id, ""});
  }
  SplitCounts counts{n_ul, n_ts, n_vl};
  const DatasetSplit split = build_split(subjects, counts, seed);
  save_split(split, out_path);
  std::cout << "split written to " << out_path << " (pool " << split.labeled_pool.size()
            << ", unlabeled " << split.unlabeled.size() << ", test " << split.test.size()
            << ", val " << split.validation.size() << ")\n";
  return 0;
}

int cmd_pretrain(const CommonOpts& opts) {
  ExperimentConfig cfg = load_config(opts);
  const auto volumes = materialize_volumes(cfg);
  const auto split = obtain_split(cfg, volumes, opts.run_dir);
  Trainer trainer = make_trainer(cfg, volumes, split);

  TrainLog log;
  nn::Checkpoint ckpt = trainer.pretrain_segmenter(&log);
  fs::create_directories(fs::path(opts.run_dir) / "checkpoints");
  cfg.save((fs::path(opts.run_dir) / "config.json").string());
  save_checkpoint(ckpt, (fs::path(opts.run_dir) / "checkpoints" / "pretrain.ckpt").string());
  log.write_csv((fs::path(opts.run_dir) / "pretrain_losses.csv").string());
  std::cout << "pretrained segmenter saved (" << cfg.train.pretrain_iters << " iters)\n";
  return 0;
}

int cmd_train_gen(const CommonOpts& opts, const std::string& kind_name) {
  const nn::GeneratorKind kind =
      kind_name == "deform" ? nn::GeneratorKind::Deform : nn::GeneratorKind::Intensity;
  ExperimentConfig cfg = load_config(opts);
  const auto volumes = materialize_volumes(cfg);
  const auto split = obtain_split(cfg, volumes, opts.run_dir);
  Trainer trainer = make_trainer(cfg, volumes, split);

  const fs::path pre = fs::path(opts.run_dir) / "checkpoints" / "pretrain.ckpt";
  if (!fs::exists(pre))
    throw std::runtime_error("pretrain checkpoint missing; run `tdaug pretrain` first");
  trainer.set_pretrained(nn::load_checkpoint(pre.string()));

  TrainLog log;
  GeneratorSelection sel = trainer.train_generator_jointly(kind, &log);

  const std::string stem = kind == nn::GeneratorKind::Deform ? "gen_v" : "gen_i";
  nlohmann::json sel_meta = {{"best_iter", sel.best_iter}, {"best_val_dsc", sel.best_val_dsc}};
  sel.checkpoint.spec_json = sel_meta.dump();
  save_checkpoint(sel.checkpoint,
                  (fs::path(opts.run_dir) / "checkpoints" / (stem + ".ckpt")).string());
  log.write_csv((fs::path(opts.run_dir) / (stem + "_losses.csv")).string());
  write_val_trace(log, (fs::path(opts.run_dir) / (stem + "_val_trace.csv")).string());
  std::cout << stem << " selected at iter " << sel.best_iter << " (val DSC " << sel.best_val_dsc
            << ")\n";
  return 0;
}

int cmd_train_seg(const CommonOpts& opts, const std::string& policy_name, float rd_sigma,
                  int rd_grid, std::vector<float> ri_contrast, std::vector<float> ri_brightness) {
  ExperimentConfig cfg = load_config(opts);
  cfg.policy = policy_name;
  if (rd_sigma > 0.f) cfg.train.elastic.sigma = rd_sigma;
  if (rd_grid > 0) {
    cfg.train.elastic.grid_h = rd_grid;
    cfg.train.elastic.grid_w = rd_grid;
  }
  if (ri_contrast.size() == 2) {
    cfg.train.intensity.contrast_lo = ri_contrast[0];
    cfg.train.intensity.contrast_hi = ri_contrast[1];
  }
  if (ri_brightness.size() == 2) {
    cfg.train.intensity.brightness_lo = ri_brightness[0];
    cfg.train.intensity.brightness_hi = ri_brightness[1];
  }

  const AugPolicy policy = policy_from_string(policy_name);
  const auto volumes = materialize_volumes(cfg);
  const auto split = obtain_split(cfg, volumes, opts.run_dir);
  Trainer trainer = make_trainer(cfg, volumes, split);

  load_generator_if_present(trainer, nn::GeneratorKind::Deform, opts.run_dir);
  load_generator_if_present(trainer, nn::GeneratorKind::Intensity, opts.run_dir);

  TrainLog log;
  nn::Checkpoint final_ckpt = trainer.final_retrain(policy, &log);
  fs::create_directories(fs::path(opts.run_dir) / "checkpoints");
  cfg.save((fs::path(opts.run_dir) / "config.json").string());
  save_checkpoint(final_ckpt, (fs::path(opts.run_dir) / "checkpoints" / "final.ckpt").string());
  log.write_csv((fs::path(opts.run_dir) / "losses.csv").string());
  write_val_trace(log, (fs::path(opts.run_dir) / "val_trace.csv").string());
  std::cout << "final segmenter (" << policy_name << ") saved\n";
  return 0;
}

int cmd_evaluate(const CommonOpts& opts) {
  ExperimentConfig cfg = ExperimentConfig::load(
      (fs::path(opts.run_dir) / "config.json").string());
  const auto volumes = materialize_volumes(cfg);
  const auto split = obtain_split(cfg, volumes, opts.run_dir);
  Trainer trainer = make_trainer(cfg, volumes, split);

  const fs::path final_path = fs::path(opts.run_dir) / "checkpoints" / "final.ckpt";
  if (!fs::exists(final_path))
    throw std::runtime_error("final checkpoint missing; run `tdaug train-seg` first");
  RunResult result =
      trainer.evaluate_checkpoint(nn::load_checkpoint(final_path.string()), cfg.policy);
  result.config_hash = cfg.config_hash();
  result.replicate = cfg.replicate;

  save_runs({result}, (fs::path(opts.run_dir) / "runs.json").string());
  save_report({result}, {}, (fs::path(opts.run_dir) / "report.json").string());
  save_results_csv({result}, (fs::path(opts.run_dir) / "results.csv").string());

  // qualitative panels: input | ground truth | prediction, mid slice per subject
  {
    nn::SegmenterNet<float> seg(trainer.data().h, trainer.data().w,
                                trainer.data().num_classes, cfg.train.seg_base_width);
    nn::restore(seg, nn::load_checkpoint(final_path.string()));
    const fs::path dir = fs::path(opts.run_dir) / "samples";
    fs::create_directories(dir);
    for (const auto& pair : trainer.data().test) {
      const int z = pair.image.depth() / 2;
      Tensor4f x(1, 1, trainer.data().h, trainer.data().w);
      x.set_channel(0, 0, pair.image.slices[z]);
      Tensor4f logits = seg.forward(x, nn::Mode::Eval);
      LabelMat pred(trainer.data().h, trainer.data().w);
      for (int y = 0; y < trainer.data().h; ++y)
        for (int xx = 0; xx < trainer.data().w; ++xx) {
          const Eigen::Index p = logits.col(0, y, xx);
          int best = 0;
          for (int c = 1; c < trainer.data().num_classes; ++c)
            if (logits.data(c, p) > logits.data(best, p)) best = c;
          pred(y, xx) = best;
        }
      const std::string stem = (dir / ("eval_" + pair.image.subject_id)).string();
      write_png_gray(pair.image.slices[z], stem + "_input.png");
      write_png_labels(pair.label.slices[z], stem + "_gt.png");
      write_png_labels(pred, stem + "_pred.png");
    }
  }
  std::cout << "mean test DSC " << result.mean_dsc() << "; report written to "
            << (fs::path(opts.run_dir) / "report.json").string() << "\n";
  return 0;
}

int cmd_sample_aug(const CommonOpts& opts, int n) {
  ExperimentConfig cfg = load_config(opts);
  const auto volumes = materialize_volumes(cfg);
  const auto split = obtain_split(cfg, volumes, opts.run_dir);
  Trainer trainer = make_trainer(cfg, volumes, split);
  load_generator_if_present(trainer, nn::GeneratorKind::Deform, opts.run_dir);
  load_generator_if_present(trainer, nn::GeneratorKind::Intensity, opts.run_dir);

  RandomStream rng(derive_seed(cfg.train.seed, 0x5a3e));
  AugmentedSets sets = trainer.sample_augmented_set(n, rng);
  const fs::path dir = fs::path(opts.run_dir) / "samples";
  fs::create_directories(dir);
  for (int k = 0; k < n; ++k) {
    write_png_gray(sets.gv[k].image, (dir / ("gv_" + std::to_string(k) + ".png")).string());
    write_png_gray(sets.gi[k].image, (dir / ("gi_" + std::to_string(k) + ".png")).string());
    write_png_gray(sets.gvi[k].image, (dir / ("gvi_" + std::to_string(k) + ".png")).string());
    write_png_labels(onehot_argmax(sets.gv[k].label_onehot),
                     (dir / ("gv_" + std::to_string(k) + "_label.png")).string());
  }
  std::cout << "wrote " << 4 * n << " sample images to " << dir.string() << "\n";
  return 0;
}

int cmd_dump_samples(const CommonOpts& opts, int n) {
  ExperimentConfig cfg = load_config(opts);
  const auto volumes = materialize_volumes(cfg);
  const auto split = obtain_split(cfg, volumes, opts.run_dir);
  Trainer trainer = make_trainer(cfg, volumes, split);

  const fs::path dir = fs::path(opts.run_dir) / "samples";
  fs::create_directories(dir);
  RandomStream rng(derive_seed(cfg.train.seed, 0xd0b9));

  const auto dump_kind = [&](nn::GeneratorKind kind, const std::string& stem) {
    const char* ckpt_name = kind == nn::GeneratorKind::Deform ? "gen_v.ckpt" : "gen_i.ckpt";
    const fs::path path = fs::path(opts.run_dir) / "checkpoints" / ckpt_name;
    if (!fs::exists(path)) return;
    nn::GeneratorNet<float> gen(kind, trainer.data().h, trainer.data().w, cfg.train.gen);
    nn::restore(gen, nn::load_checkpoint(path.string()));
    for (int k = 0; k < n; ++k) {
      const auto& src = trainer.data().labeled[rng.uniform_int(
          0, static_cast<int>(trainer.data().labeled.size()) - 1)];
      Tensor4f x(1, 1, trainer.data().h, trainer.data().w);
      x.set_channel(0, 0, src.image);
      MatrixX<float> z(cfg.train.gen.z_dim, 1);
      for (int i = 0; i < cfg.train.gen.z_dim; ++i) z(i, 0) = static_cast<float>(rng.normal());
      Tensor4f field = gen.forward(x, z, nn::Mode::Grad);
      write_png_gray(src.image, (dir / (stem + "_" + std::to_string(k) + "_input.png")).string());
      if (kind == nn::GeneratorKind::Deform) {
        DeformationField v(trainer.data().h, trainer.data().w);
        v.dy = field.channel(0, 0);
        v.dx = field.channel(0, 1);
        write_png_deformation(v, (dir / (stem + "_" + std::to_string(k) + "_field.png")).string());
        write_png_gray(apply_deformation(src.image, v, PadMode::Zeros),
                       (dir / (stem + "_" + std::to_string(k) + "_warped.png")).string());
      } else {
        IntensityField di(trainer.data().h, trainer.data().w);
        di.delta = field.channel(0, 0);
        write_png_intensity_field(
            di, (dir / (stem + "_" + std::to_string(k) + "_field.png")).string());
        write_png_gray(apply_intensity(src.image, di),
                       (dir / (stem + "_" + std::to_string(k) + "_transformed.png")).string());
      }
    }
  };
  dump_kind(nn::GeneratorKind::Deform, "deform");
  dump_kind(nn::GeneratorKind::Intensity, "intensity");
  std::cout << "field dumps written to " << dir.string() << "\n";
  return 0;
}

int cmd_compare(const std::string& a_path, const std::string& b_path,
                const std::string& out_path, bool per_subject_mean) {
  const auto a = load_runs(a_path);
  const auto b = load_runs(b_path);
  const ComparisonReport cmp = compare_policies(a, b, per_subject_mean);
  save_report(a, {cmp}, out_path);
  std::cout << cmp.policy_a << " vs " << cmp.policy_b << ": p = " << cmp.p_value << "\n";
  return 0;
}

int cmd_ablate(const CommonOpts& opts, const std::string& which, int replicates, int restarts) {
  ExperimentConfig cfg = load_config(opts);
  const auto volumes = materialize_volumes(cfg);
  const auto split = obtain_split(cfg, volumes, opts.run_dir);

  std::vector<AblationGroup> groups;
  if (which == "A") {
    groups = ablate_lambda_grid(volumes, split, cfg.train, cfg.n_labeled, replicates, restarts);
  } else if (which == "B") {
    groups = ablate_joint_vs_independent(volumes, split, cfg.train, cfg.n_labeled, replicates,
                                         restarts);
  } else if (which == "C") {
    std::vector<int> values;
    for (int v : {1, 3, 5, 10, 20, 25, 50})
      if (v <= static_cast<int>(split.unlabeled.size())) values.push_back(v);
    groups = ablate_unlabeled_count(volumes, split, cfg.train, cfg.n_labeled, values, replicates,
                                    restarts);
  } else if (which == "D") {
    std::vector<int> values;
    for (int v : {1, 3, 5, 10, 15, 40})
      if (v <= static_cast<int>(split.labeled_pool.size())) values.push_back(v);
    groups = ablate_labeled_count(volumes, split, cfg.train, values, replicates, restarts);
  } else if (which == "E") {
    groups = ablate_new_split(volumes, cfg.train, cfg.counts, derive_seed(cfg.split_seed, 99),
                              cfg.n_labeled, replicates, restarts);
  } else if (which == "F") {
    groups = ablate_fixed_iters(volumes, split, cfg.train, cfg.n_labeled,
                                {1000, 2000, 4000, 6000, 10000}, replicates, restarts);
  } else {
    throw CLI::ValidationError("--which must be one of A,B,C,D,E,F");
  }

  fs::create_directories(opts.run_dir);
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& group : groups) {
    std::vector<RunResult> ok_runs;
    int failures = 0;
    for (const auto& entry : group.runs)
      if (entry.failed)
        ++failures;
      else
        ok_runs.push_back(entry.result);
    std::string safe = group.label;
    for (auto& c : safe)
      if (c == '=' || c == ',' || c == '.') c = '_';
    if (!ok_runs.empty())
      save_runs(ok_runs, (fs::path(opts.run_dir) / ("runs_" + safe + ".json")).string());
    std::vector<double> means;
    for (const auto& r : ok_runs) means.push_back(r.mean_dsc());
    summary.push_back({{"group", group.label},
                       {"runs", ok_runs.size()},
                       {"failures", failures},
                       {"mean_dsc", mean_of(means)},
                       {"std_dsc", stddev_of(means)}});
    std::cout << which << " " << group.label << ": mean DSC " << mean_of(means) << " over "
              << ok_runs.size() << " runs (" << failures << " failed)\n";
  }
  std::ofstream((fs::path(opts.run_dir) / ("ablation_" + which + ".json")).string())
      << summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-driven data augmentation for medical image segmentation"};
  app.require_subcommand(1);

  CommonOpts opts;

  // make-phantoms
  auto* mk = app.add_subcommand("make-phantoms", "generate the synthetic phantom dataset");
  std::string mk_out = "phantoms";
  int mk_n = 0, mk_size = 0, mk_slices = 0, mk_structures = 0;
  std::uint64_t mk_seed = 42;
  mk->add_option("--out", mk_out, "output directory");
  mk->add_option("--n", mk_n, "number of volumes");
  mk->add_option("--size", mk_size, "in-plane image size");
  mk->add_option("--slices", mk_slices, "slices per volume");
  mk->add_option("--structures", mk_structures, "foreground structures (1-3)");
  mk->add_option("--seed", mk_seed, "generation seed");
  mk->add_option("--config", opts.config_path, "experiment config JSON");

  // preprocess
  auto* pp = app.add_subcommand("preprocess", "normalize, resample and crop a dataset");
  std::string pp_manifest, pp_out = "preprocessed", pp_preset;
  std::vector<float> pp_res;
  std::vector<int> pp_size;
  pp->add_option("--data", pp_manifest, "input manifest.json")->required();
  pp->add_option("--out", pp_out, "output cache directory");
  pp->add_option("--preset", pp_preset, "cardiac | prostate | pancreas");
  pp->add_option("--res", pp_res, "target resolution (row col, mm)")->expected(2);
  pp->add_option("--size", pp_size, "target size (H W)")->expected(2);
  std::uint64_t pp_seed = 0;
  pp->add_option("--config", opts.config_path, "experiment config JSON (supplies the preset)");
  pp->add_option("--seed", pp_seed, "unused; accepted for interface uniformity");

  // make-split
  auto* ms = app.add_subcommand("make-split", "build the four-way subject split");
  std::string ms_manifest, ms_out = "splits.json";
  int ms_ul = 25, ms_ts = 20, ms_vl = 2;
  std::uint64_t ms_seed = 0;
  ms->add_option("--data", ms_manifest, "manifest.json (omit to use config dataset)");
  ms->add_option("--out", ms_out, "output split JSON");
  ms->add_option("--n-unlabeled", ms_ul, "unlabeled volume count");
  ms->add_option("--n-test", ms_ts, "test volume count");
  ms->add_option("--n-val", ms_vl, "validation volume count");
  ms->add_option("--seed", ms_seed, "split seed");
  ms->add_option("--config", opts.config_path, "experiment config JSON");

  // training / evaluation commands share the common options
  auto* pt = app.add_subcommand("pretrain", "supervised pre-training of the segmenter");
  add_common(pt, opts);

  auto* tg = app.add_subcommand("train-gen", "joint training of one conditional generator");
  std::string tg_kind;
  tg->add_option("--kind", tg_kind, "deform | intensity")
      ->required()
      ->check(CLI::IsMember({"deform", "intensity"}));
  add_common(tg, opts);

  auto* ts = app.add_subcommand("train-seg", "final from-scratch retrain under a policy");
  std::string ts_policy = "GD+GI";
  float ts_rd_sigma = 0.f;
  int ts_rd_grid = 0;
  std::vector<float> ts_ri_contrast, ts_ri_brightness;
  ts->add_option("--policy", ts_policy,
                 "none|Aff|RD|RI|RD+RI|GD|GI|GD+GI|Mixup|GD+GI+Mixup");
  ts->add_option("--rd-sigma", ts_rd_sigma, "elastic control-point sigma");
  ts->add_option("--rd-grid", ts_rd_grid, "elastic control grid size");
  ts->add_option("--ri-contrast", ts_ri_contrast, "contrast range (lo hi)")->expected(2);
  ts->add_option("--ri-brightness", ts_ri_brightness, "brightness range (lo hi)")->expected(2);
  add_common(ts, opts);

  auto* ev = app.add_subcommand("evaluate", "per-structure test Dice for a finished run");
  add_common(ev, opts);

  auto* sa = app.add_subcommand("sample-aug", "sample augmented pairs from the generators");
  int sa_n = 8;
  sa->add_option("--n", sa_n, "samples per source");
  add_common(sa, opts);

  auto* ds = app.add_subcommand("dump-samples", "field visualizations from trained generators");
  int ds_n = 4;
  ds->add_option("--n", ds_n, "samples per generator");
  add_common(ds, opts);

  auto* cp = app.add_subcommand("compare", "Wilcoxon comparison between two run sets");
  std::string cp_a, cp_b, cp_out = "comparison.json";
  bool cp_subject_mean = false;
  cp->add_option("--a", cp_a, "runs.json of the candidate policy")->required();
  cp->add_option("--b", cp_b, "runs.json of the baseline policy")->required();
  cp->add_option("--out", cp_out, "output report path");
  cp->add_flag("--per-subject-mean", cp_subject_mean, "pair per run instead of per subject");
  std::uint64_t cp_seed = 0;
  cp->add_option("--config", opts.config_path, "experiment config JSON");
  cp->add_option("--seed", cp_seed, "unused; accepted for interface uniformity");

  auto* ab = app.add_subcommand("ablate", "run one of the ablation studies");
  std::string ab_which;
  int ab_replicates = 5, ab_restarts = 3;
  ab->add_option("--which", ab_which, "A|B|C|D|E|F")->required();
  ab->add_option("--replicates", ab_replicates, "labeled-subset replicates");
  ab->add_option("--restarts", ab_restarts, "restart seeds per replicate");
  add_common(ab, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (mk->parsed()) return cmd_make_phantoms(opts, mk_out, mk_n, mk_size, mk_slices,
                                               mk_structures, mk_seed);
    if (pp->parsed()) return cmd_preprocess(opts, pp_manifest, pp_out, pp_preset, pp_res, pp_size);
    if (ms->parsed()) return cmd_make_split(opts, ms_manifest, ms_out, ms_ul, ms_ts, ms_vl,
                                            ms_seed);
    if (pt->parsed()) return cmd_pretrain(opts);
    if (tg->parsed()) return cmd_train_gen(opts, tg_kind);
    if (ts->parsed())
      return cmd_train_seg(opts, ts_policy, ts_rd_sigma, ts_rd_grid, ts_ri_contrast,
                           ts_ri_brightness);
    if (ev->parsed()) return cmd_evaluate(opts);
    if (sa->parsed()) return cmd_sample_aug(opts, sa_n);
    if (ds->parsed()) return cmd_dump_samples(opts, ds_n);
    if (cp->parsed()) return cmd_compare(cp_a, cp_b, cp_out, cp_subject_mean);
    if (ab->parsed()) return cmd_ablate(opts, ab_which, ab_replicates, ab_restarts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
