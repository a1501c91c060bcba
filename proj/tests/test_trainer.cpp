#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <tdaug/data/phantom.hpp>
#include <tdaug/preprocess/preprocess.hpp>
#include <tdaug/train/experiment.hpp>

using namespace tdaug;

namespace {

// Small phantom world shared by the trainer tests.
struct TinyWorld {
  std::vector<VolumePair> volumes;
  DatasetSplit split;

  explicit TinyWorld(int n = 10, int size = 32, int slices = 2) {
    SyntheticPhantomSpec spec;
    spec.image_size = size;
    spec.num_slices = slices;
    spec.num_structures = 2;
    volumes = generate_phantom_dataset(spec, n, 17);
    for (auto& pair : volumes) pair.image = normalize_percentile(pair.image);
    std::vector<SubjectRecord> subjects;
    for (const auto& v : volumes) subjects.push_back({v.image.subject_id, ""});
    split = build_split(subjects, {3, 2, 2}, 5);
  }
};

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.pretrain_iters = 10;
  cfg.total_iters = 8;
  cfg.val_eval_stride = 4;
  cfg.seg_base_width = 2;
  cfg.gen.z_dim = 8;
  cfg.gen.branch_width = 2;
  cfg.gen.branch_out = 2;
  cfg.gen.common_width = 2;
  cfg.gen.z_seed_channels = 2;
  cfg.disc.base_width = 2;
  cfg.disc.fc1 = 8;
  cfg.disc.fc2 = 4;
  cfg.seed = 1;
  return cfg;
}

Trainer make_tiny_trainer(const TinyWorld& world, const TrainConfig& cfg) {
  const auto labeled = sample_labeled_subset(world.split, 1, 0);
  return Trainer(TrainData::assemble(world.volumes, world.split, labeled), cfg);
}

}  // namespace

TEST_CASE("pretraining reduces the supervised loss") {
  TinyWorld world;
  TrainConfig cfg = tiny_config();
  cfg.pretrain_iters = 200;
  Trainer trainer = make_tiny_trainer(world, cfg);
  TrainLog log;
  trainer.pretrain_segmenter(&log);
  REQUIRE(log.rows.size() == 200);
  CHECK(log.rows.back().l_s < log.rows.front().l_s);
}

TEST_CASE("zero pretraining iterations return the initialization unchanged") {
  TinyWorld world;
  TrainConfig cfg = tiny_config();
  cfg.pretrain_iters = 0;
  Trainer a = make_tiny_trainer(world, cfg);
  Trainer b = make_tiny_trainer(world, cfg);
  CHECK(a.pretrain_segmenter().content_hash() == b.pretrain_segmenter().content_hash());
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
  TinyWorld world;
  const TrainConfig cfg = tiny_config();
  Trainer a = make_tiny_trainer(world, cfg);
  Trainer b = make_tiny_trainer(world, cfg);
  CHECK(a.pretrain_segmenter().content_hash() == b.pretrain_segmenter().content_hash());

  const auto sel_a = a.train_generator_jointly(nn::GeneratorKind::Deform);
  const auto sel_b = b.train_generator_jointly(nn::GeneratorKind::Deform);
  CHECK(sel_a.checkpoint.content_hash() == sel_b.checkpoint.content_hash());
  CHECK(sel_a.best_iter == sel_b.best_iter);
}

TEST_CASE("joint generator training produces a usable selection") {
  TinyWorld world;
  TrainConfig cfg = tiny_config();
  Trainer trainer = make_tiny_trainer(world, cfg);
  trainer.pretrain_segmenter();

  TrainLog log;
  const auto sel = trainer.train_generator_jointly(nn::GeneratorKind::Deform, &log);
  CHECK(sel.best_iter >= 1);
  CHECK(sel.best_iter <= cfg.total_iters);
  CHECK(sel.best_val_dsc >= 0.0);
  CHECK(sel.best_val_dsc <= 1.0);
  CHECK(!sel.checkpoint.tensors.empty());
  REQUIRE(log.rows.size() == 8);
  // selection is the argmax of the recorded validation trace
  double best = -1.0;
  for (const auto& row : log.rows)
    if (row.val_dsc >= 0.0) best = std::max(best, row.val_dsc);
  CHECK(sel.best_val_dsc == doctest::Approx(best));
}

TEST_CASE("generator training demands a pretrained segmenter and unlabeled data") {
  TinyWorld world;
  TrainConfig cfg = tiny_config();
  Trainer trainer = make_tiny_trainer(world, cfg);
  CHECK_THROWS_AS(trainer.train_generator_jointly(nn::GeneratorKind::Deform),
                  std::runtime_error);

  DatasetSplit crippled = world.split;
  crippled.unlabeled.clear();
  const auto labeled = sample_labeled_subset(world.split, 1, 0);
  Trainer t2(TrainData::assemble(world.volumes, crippled, labeled), cfg);
  t2.pretrain_segmenter();
  CHECK_THROWS_AS(t2.train_generator_jointly(nn::GeneratorKind::Deform),
                  std::invalid_argument);
}

TEST_CASE("sampled augmentation sets") {
  TinyWorld world;
  TrainConfig cfg = tiny_config();
  Trainer trainer = make_tiny_trainer(world, cfg);
  trainer.pretrain_segmenter();
  trainer.train_generator_jointly(nn::GeneratorKind::Deform);
  trainer.train_generator_jointly(nn::GeneratorKind::Intensity);

  SUBCASE("zero requested samples give empty sets") {
    RandomStream rng(3);
    const AugmentedSets sets = trainer.sample_augmented_set(0, rng);
    CHECK(sets.gv.empty());
    CHECK(sets.gi.empty());
    CHECK(sets.gvi.empty());
  }

  SUBCASE("composite samples keep the deformation-only label") {
    RandomStream rng(4);
    const AugmentedSets sets = trainer.sample_augmented_set(5, rng);
    REQUIRE(sets.gv.size() == 5);
    REQUIRE(sets.gvi.size() == 5);
    for (int k = 0; k < 5; ++k)
      for (std::size_t c = 0; c < sets.gv[k].label_onehot.size(); ++c)
        CHECK((sets.gvi[k].label_onehot[c] - sets.gv[k].label_onehot[c])
                  .cwiseAbs()
                  .maxCoeff() == 0.f);
  }

  SUBCASE("fresh z per draw gives distinct fields") {
    // generators with macroscopic weights so the z response is far above
    // float rounding; the additive path makes z differences directly visible
    Trainer t2 = make_tiny_trainer(world, cfg);
    for (auto kind : {nn::GeneratorKind::Deform, nn::GeneratorKind::Intensity}) {
      nn::GeneratorNet<float> g(kind, t2.data().h, t2.data().w, cfg.gen);
      RandomStream init(kind == nn::GeneratorKind::Deform ? 91 : 92);
      for (auto& p : g.params()) nn::init_truncated_normal(*p.value, init, 0.5);
      GeneratorSelection sel;
      sel.checkpoint = nn::snapshot(g, "g");
      t2.set_generator_selection(kind, std::move(sel));
    }
    RandomStream rng(5);
    const AugmentedSets sets = t2.sample_augmented_set(6, rng);
    bool any_pair_differs = false;
    for (int i = 0; i < 6 && !any_pair_differs; ++i)
      for (int j = i + 1; j < 6 && !any_pair_differs; ++j)
        if (sets.gi[i].subject_id == sets.gi[j].subject_id &&
            sets.gi[i].slice_index == sets.gi[j].slice_index)
          any_pair_differs =
              (sets.gi[i].image - sets.gi[j].image).cwiseAbs().maxCoeff() > 0.f;
    CHECK(any_pair_differs);
  }
}

TEST_CASE("final retrain composes batches exactly half affine, half policy") {
  TinyWorld world;
  TrainConfig cfg = tiny_config();
  Trainer trainer = make_tiny_trainer(world, cfg);
  trainer.final_retrain(AugPolicy::RDRI);
  REQUIRE(trainer.retrain_batch_log().size() == 8);
  for (const auto& comp : trainer.retrain_batch_log()) {
    CHECK(comp.n_affine == cfg.batch_size / 2);
    CHECK(comp.n_policy == cfg.batch_size / 2);
  }
}

TEST_CASE("final retrain starts from a fresh initialization") {
  TinyWorld world;
  TrainConfig cfg = tiny_config();
  cfg.pretrain_iters = 0;
  cfg.total_iters = 0;  // keep both checkpoints at their initializations
  Trainer trainer = make_tiny_trainer(world, cfg);
  const auto pre = trainer.pretrain_segmenter();
  const auto fresh = trainer.final_retrain(AugPolicy::None);
  CHECK(pre.content_hash() != fresh.content_hash());
}

TEST_CASE("learned policies require their generator selections") {
  TinyWorld world;
  Trainer trainer = make_tiny_trainer(world, tiny_config());
  CHECK_THROWS_AS(trainer.final_retrain(AugPolicy::GDGI), std::runtime_error);
  CHECK_THROWS_AS(trainer.final_retrain(AugPolicy::GD), std::runtime_error);
}

TEST_CASE("unknown policy names are rejected") {
  CHECK_THROWS_AS(policy_from_string("GAN+magic"), std::invalid_argument);
  CHECK(policy_from_string("GD+GI") == AugPolicy::GDGI);
  CHECK(to_string(AugPolicy::GDGIMixup) == "GD+GI+Mixup");
}

TEST_CASE("evaluation covers the whole subject-structure grid") {
  TinyWorld world;
  TrainConfig cfg = tiny_config();
  Trainer trainer = make_tiny_trainer(world, cfg);
  const auto ckpt = trainer.final_retrain(AugPolicy::None);
  const RunResult result = trainer.evaluate_checkpoint(ckpt, "none");
  CHECK(result.dsc.size() == 2);                 // two test volumes
  CHECK(result.structures.size() == 2);          // two foreground structures
  for (const auto& [subject, values] : result.dsc) {
    CHECK(values.size() == 2);
    for (double v : values) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("checkpoints restore to identical forward behavior") {
  TinyWorld world;
  TrainConfig cfg = tiny_config();
  Trainer trainer = make_tiny_trainer(world, cfg);
  const auto ckpt = trainer.final_retrain(AugPolicy::Aff);
  const RunResult a = trainer.evaluate_checkpoint(ckpt, "Aff");

  save_checkpoint(ckpt, "/tmp/tdaug_trainer_ckpt.bin");
  const auto loaded = nn::load_checkpoint("/tmp/tdaug_trainer_ckpt.bin");
  const RunResult b = trainer.evaluate_checkpoint(loaded, "Aff");
  for (const auto& [subject, values] : a.dsc) {
    const auto& other = b.dsc.at(subject);
    for (std::size_t i = 0; i < values.size(); ++i) CHECK(values[i] == other[i]);
  }
}

TEST_CASE("experiment matrix bookkeeping") {
  TinyWorld world;
  TrainConfig cfg = tiny_config();
  cfg.pretrain_iters = 2;
  cfg.total_iters = 2;

  SUBCASE("one replicate, one restart, one result") {
    const auto entries =
        run_experiment_matrix(world.volumes, world.split, cfg, 1, AugPolicy::None, 1, 1);
    CHECK(entries.size() == 1);
    CHECK(!entries[0].failed);
  }

  SUBCASE("five replicates by three restarts give fifteen results") {
    const auto entries =
        run_experiment_matrix(world.volumes, world.split, cfg, 1, AugPolicy::None, 5, 3);
    CHECK(entries.size() == 15);
    std::set<std::pair<int, int>> seen;
    for (const auto& e : entries) {
      CHECK(!e.failed);
      seen.insert({e.result.replicate, e.result.restart});
    }
    CHECK(seen.size() == 15);
  }
}

TEST_CASE("fixed-iteration stopping takes the final state") {
  TinyWorld world;
  TrainConfig cfg = tiny_config();
  cfg.use_validation = false;
  cfg.fixed_iters = 5;
  Trainer trainer = make_tiny_trainer(world, cfg);
  trainer.pretrain_segmenter();
  TrainLog log;
  const auto sel = trainer.train_generator_jointly(nn::GeneratorKind::Deform, &log);
  CHECK(sel.best_iter == 5);
  CHECK(log.rows.size() == 5);
}

TEST_CASE("independent mode keeps the segmenter frozen during generator training") {
  TinyWorld world;
  TrainConfig cfg = tiny_config();
  cfg.joint = false;
  Trainer trainer = make_tiny_trainer(world, cfg);
  trainer.pretrain_segmenter();
  TrainLog log;
  const auto sel = trainer.train_generator_jointly(nn::GeneratorKind::Deform, &log);
  // flat validation trace: the segmenter never moves in this phase
  double first = -1.0;
  for (const auto& row : log.rows)
    if (row.val_dsc >= 0.0) {
      if (first < 0)
        first = row.val_dsc;
      else
        CHECK(row.val_dsc == doctest::Approx(first));
    }
  // the fully trained generator is kept
  CHECK(sel.best_iter == cfg.total_iters);
}
