#include "tdaug/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "tdaug/eval/dice.hpp"
#include "tdaug/loss/losses.hpp"

namespace tdaug {

namespace {

DeformationField field_from_tensor(const Tensor4f& t, int i) {
  DeformationField f(t.h, t.w);
  for (int y = 0; y < t.h; ++y)
    for (int x = 0; x < t.w; ++x) {
      const Eigen::Index p = t.col(i, y, x);
      f.dy(y, x) = t.data(0, p);
      f.dx(y, x) = t.data(1, p);
    }
  return f;
}

IntensityField intensity_from_tensor(const Tensor4f& t, int i) {
  IntensityField f(t.h, t.w);
  for (int y = 0; y < t.h; ++y)
    for (int x = 0; x < t.w; ++x) f.delta(y, x) = t.data(0, t.col(i, y, x));
  return f;
}

void add_deform_grad(Tensor4f& gt, int i, const DeformationField& gf) {
  for (int y = 0; y < gt.h; ++y)
    for (int x = 0; x < gt.w; ++x) {
      const Eigen::Index p = gt.col(i, y, x);
      gt.data(0, p) += gf.dy(y, x);
      gt.data(1, p) += gf.dx(y, x);
    }
}

void add_intensity_grad(Tensor4f& gt, int i, const Eigen::MatrixXf& gd) {
  for (int y = 0; y < gt.h; ++y)
    for (int x = 0; x < gt.w; ++x) gt.data(0, gt.col(i, y, x)) += gd(y, x);
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("training diverged: non-finite ") + what);
}

}  // namespace

// ---------------------------------------------------------------------------
// TrainData
// ---------------------------------------------------------------------------

TrainData TrainData::assemble(const std::vector<VolumePair>& volumes, const DatasetSplit& split,
                              const std::vector<std::string>& labeled_subjects,
                              bool include_empty_slices) {
  std::map<std::string, const VolumePair*> by_id;
  for (const auto& v : volumes) by_id[v.image.subject_id] = &v;
  const auto lookup = [&](const std::string& id) -> const VolumePair& {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw std::invalid_argument("TrainData: unknown subject " + id);
    return *it->second;
  };

  TrainData data;
  for (const auto& id : labeled_subjects) {
    for (auto& slice : extract_slices(lookup(id))) {
      if (!include_empty_slices) {
        float fg = 0.f;
        for (std::size_t c = 1; c < slice.label_onehot.size(); ++c)
          fg += slice.label_onehot[c].sum();
        if (fg == 0.f) continue;
      }
      data.labeled.push_back(std::move(slice));
    }
  }
  for (const auto& id : split.unlabeled) {
    const auto& vol = lookup(id).image;
    data.unlabeled.insert(data.unlabeled.end(), vol.slices.begin(), vol.slices.end());
  }
  for (const auto& id : split.validation) data.validation.push_back(lookup(id));
  for (const auto& id : split.test) data.test.push_back(lookup(id));

  if (data.labeled.empty()) throw std::invalid_argument("TrainData: no labeled slices");
  data.num_classes = data.labeled.front().num_classes();
  data.h = static_cast<int>(data.labeled.front().image.rows());
  data.w = static_cast<int>(data.labeled.front().image.cols());
  return data;
}

void TrainLog::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write log: " + path);
  out << "iter,L_S,L_adv_D,L_adv_G,L_LD,L_reg,val_DSC\n";
  for (const auto& r : rows) {
    out << r.iter << ',' << r.l_s << ',' << r.l_adv_d << ',' << r.l_adv_g << ',' << r.l_ld
        << ',' << r.l_reg << ',';
    if (r.val_dsc >= 0.0) out << r.val_dsc;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

Trainer::Trainer(TrainData data, TrainConfig cfg) : data_(std::move(data)), cfg_(cfg) {
  cfg_.validate();
  if (data_.num_classes < 2) throw std::invalid_argument("Trainer: need >= 2 classes");
  class_weights_ = default_class_weights<float>(data_.num_classes);
}

Tensor4f Trainer::image_batch(const std::vector<const SliceSample*>& samples) const {
  Tensor4f t(static_cast<int>(samples.size()), 1, data_.h, data_.w);
  for (std::size_t i = 0; i < samples.size(); ++i)
    t.set_channel(static_cast<int>(i), 0, samples[i]->image);
  return t;
}

Tensor4f Trainer::label_batch(const std::vector<const SliceSample*>& samples) const {
  Tensor4f t(static_cast<int>(samples.size()), data_.num_classes, data_.h, data_.w);
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (int c = 0; c < data_.num_classes; ++c)
      t.set_channel(static_cast<int>(i), c, samples[i]->label_onehot[c]);
  return t;
}

std::vector<const SliceSample*> Trainer::draw_labeled(int n, RandomStream& rng) const {
  std::vector<const SliceSample*> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = &data_.labeled[rng.uniform_int(0, static_cast<int>(data_.labeled.size()) - 1)];
  return out;
}

MatrixX<float> Trainer::draw_z(int n, RandomStream& rng) const {
  MatrixX<float> z(cfg_.gen.z_dim, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < cfg_.gen.z_dim; ++i) z(i, j) = static_cast<float>(rng.normal());
  return z;
}

// ---------------------------------------------------------------------------
// Pre-training
// ---------------------------------------------------------------------------

nn::Checkpoint Trainer::pretrain_segmenter(TrainLog* log) {
  nn::SegmenterNet<float> seg(data_.h, data_.w, data_.num_classes, cfg_.seg_base_width);
  RandomStream init_rng(derive_seed(cfg_.seed, 0x5e61));
  seg.init(init_rng);

  nn::AdamOptimizer<float> adam(cfg_.lr, cfg_.beta1, cfg_.beta2);
  RandomStream rng(derive_seed(cfg_.seed, 0x5e62));
  const AffineAugConfig& aff = cfg_.affine;

  for (int it = 1; it <= cfg_.pretrain_iters; ++it) {
    auto ptrs = draw_labeled(cfg_.batch_size, rng);
    std::vector<SliceSample> staged;
    if (cfg_.pretrain_affine) {
      staged.reserve(ptrs.size());
      for (const auto* p : ptrs) staged.push_back(random_affine(*p, aff, rng));
      for (std::size_t i = 0; i < ptrs.size(); ++i) ptrs[i] = &staged[i];
    }
    Tensor4f xb = image_batch(ptrs);
    Tensor4f yb = label_batch(ptrs);

    seg.zero_grads();
    Tensor4f logits = seg.forward(xb, nn::Mode::Train);
    Tensor4f g_logits;
    const float loss = weighted_cross_entropy(logits, yb, class_weights_, &g_logits);
    require_finite(loss, "segmentation loss");
    seg.backward(g_logits);
    adam.step(seg.params());

    if (log) log->rows.push_back({it, loss, 0.0, 0.0, 0.0, 0.0, -1.0});
  }

  nn::Checkpoint ckpt = nn::snapshot(seg, "segmenter");
  pretrained_ = ckpt;
  return ckpt;
}

// ---------------------------------------------------------------------------
// Joint adversarial training of one generator
// ---------------------------------------------------------------------------

GeneratorSelection Trainer::train_generator_jointly(nn::GeneratorKind kind, TrainLog* log) {
  if (!pretrained_) throw std::runtime_error("train_generator_jointly: pretrain first");
  if (data_.unlabeled.empty())
    throw std::invalid_argument("train_generator_jointly: unlabeled set is empty");

  const bool deform = kind == nn::GeneratorKind::Deform;
  const std::uint64_t tag = deform ? 0xd3f0 : 0x17e5;

  nn::SegmenterNet<float> seg(data_.h, data_.w, data_.num_classes, cfg_.seg_base_width);
  nn::restore(seg, *pretrained_);
  nn::GeneratorNet<float> gen(kind, data_.h, data_.w, cfg_.gen);
  nn::DiscriminatorNet<float> disc(data_.h, data_.w, cfg_.disc);
  {
    RandomStream r1(derive_seed(cfg_.seed, tag + 1));
    gen.init(r1);
    RandomStream r2(derive_seed(cfg_.seed, tag + 2));
    disc.init(r2);
  }

  nn::AdamOptimizer<float> adam_s(cfg_.lr, cfg_.beta1, cfg_.beta2);
  nn::AdamOptimizer<float> adam_g(cfg_.lr, cfg_.beta1, cfg_.beta2);
  nn::AdamOptimizer<float> adam_d(cfg_.lr, cfg_.beta1, cfg_.beta2);
  RandomStream rng(derive_seed(cfg_.seed, tag + 3));

  const int B = cfg_.batch_size;
  const int HW = data_.h * data_.w;
  const float ld_norm = cfg_.normalize_ld ? 1.f / static_cast<float>(HW) : 1.f;
  const int run_iters = cfg_.use_validation ? cfg_.total_iters : cfg_.fixed_iters;

  GeneratorSelection sel;
  sel.best_val_dsc = -1.0;
  const auto snapshot_gen = [&](int iter, double dsc) {
    sel.best_iter = iter;
    sel.best_val_dsc = dsc;
    sel.checkpoint = nn::snapshot(gen, deform ? "generator_deform" : "generator_intensity");
  };

  // Builds transformed images (and labels for the deformation generator) from
  // a generator output batch.
  const auto transform_batch = [&](const std::vector<const SliceSample*>& srcs,
                                   const Tensor4f& field_t, Tensor4f& x_out, Tensor4f* y_out) {
    const int n = static_cast<int>(srcs.size());
    x_out = Tensor4f(n, 1, data_.h, data_.w);
    if (y_out) *y_out = Tensor4f(n, data_.num_classes, data_.h, data_.w);
    for (int i = 0; i < n; ++i) {
      if (deform) {
        const DeformationField v = field_from_tensor(field_t, i);
        x_out.set_channel(i, 0, apply_deformation(srcs[i]->image, v, PadMode::Zeros));
        if (y_out) {
          const auto warped = apply_deformation_to_label(srcs[i]->label_onehot, v);
          for (int c = 0; c < data_.num_classes; ++c) y_out->set_channel(i, c, warped[c]);
        }
      } else {
        const IntensityField di = intensity_from_tensor(field_t, i);
        x_out.set_channel(i, 0, apply_intensity(srcs[i]->image, di));
        if (y_out)
          for (int c = 0; c < data_.num_classes; ++c)
            y_out->set_channel(i, c, srcs[i]->label_onehot[c]);
      }
    }
  };

  for (int it = 1; it <= run_iters; ++it) {
    double loss_d = 0.0, loss_advg = 0.0, loss_s = 0.0, loss_ld = 0.0;

    // --- discriminator step ---
    if (cfg_.lambda_adv > 0.f) {
      Tensor4f real(B, 1, data_.h, data_.w);
      for (int i = 0; i < B; ++i)
        real.set_channel(
            i, 0, data_.unlabeled[rng.uniform_int(0, static_cast<int>(data_.unlabeled.size()) - 1)]);

      auto fake_srcs = draw_labeled(B, rng);
      Tensor4f fake_x;
      {
        Tensor4f xb = image_batch(fake_srcs);
        Tensor4f field_t = gen.forward(xb, draw_z(B, rng), nn::Mode::Grad);
        transform_batch(fake_srcs, field_t, fake_x, nullptr);
      }

      disc.zero_grads();
      MatrixX<float> g_real, g_fake;
      MatrixX<float> d_real = disc.forward(real, nn::Mode::Train);
      loss_d += two_class_cross_entropy(d_real, 1, &g_real);
      disc.backward(g_real);
      MatrixX<float> d_fake = disc.forward(fake_x, nn::Mode::Train);
      loss_d += two_class_cross_entropy(d_fake, 0, &g_fake);
      disc.backward(g_fake);
      require_finite(loss_d, "discriminator loss");
      adam_d.step(disc.params());
    }

    // --- generator step ---
    {
      auto srcs = draw_labeled(B, rng);
      Tensor4f xb = image_batch(srcs);
      gen.zero_grads();
      Tensor4f field_t = gen.forward(xb, draw_z(B, rng), nn::Mode::Train);

      Tensor4f x_g, y_g;
      transform_batch(srcs, field_t, x_g, &y_g);

      Tensor4f gx_total(B, 1, data_.h, data_.w);
      Tensor4f g_target;
      if (cfg_.joint) {
        Tensor4f logits = seg.forward(x_g, nn::Mode::Grad);
        Tensor4f g_logits;
        loss_s = weighted_cross_entropy(logits, y_g, class_weights_, &g_logits, &g_target);
        Tensor4f gx_s = seg.backward(g_logits);
        gx_total.data += gx_s.data;
      }
      if (cfg_.lambda_adv > 0.f) {
        MatrixX<float> d_fake = disc.forward(x_g, nn::Mode::Grad);
        MatrixX<float> g_dlogits;
        loss_advg = generator_adversarial_loss(d_fake, cfg_.nonsaturating_g, &g_dlogits);
        g_dlogits *= cfg_.lambda_adv;
        Tensor4f gx_d = disc.backward(g_dlogits);
        gx_total.data += gx_d.data;
      }

      Tensor4f grad_field = field_t.zeros_like();
      const float ld_scale = cfg_.lambda_ld * ld_norm / static_cast<float>(B);
      for (int i = 0; i < B; ++i) {
        if (deform) {
          const DeformationField v = field_from_tensor(field_t, i);
          loss_ld += large_deviation_loss(v) * ld_norm / B;
          DeformationField gf(data_.h, data_.w);
          apply_deformation_backward(srcs[i]->image, v, gx_total.channel(i, 0), PadMode::Zeros,
                                     &gf, static_cast<Eigen::MatrixXf*>(nullptr));
          if (cfg_.joint) {
            std::vector<Eigen::MatrixXf> g_label(data_.num_classes);
            for (int c = 0; c < data_.num_classes; ++c) g_label[c] = g_target.channel(i, c);
            apply_deformation_to_label_backward(srcs[i]->label_onehot, v, g_label, &gf);
          }
          if (cfg_.lambda_ld > 0.f) large_deviation_grad(v, ld_scale, &gf);
          add_deform_grad(grad_field, i, gf);
        } else {
          const IntensityField di = intensity_from_tensor(field_t, i);
          loss_ld += large_deviation_loss(di) * ld_norm / B;
          Eigen::MatrixXf gd = gx_total.channel(i, 0);
          if (cfg_.lambda_ld > 0.f) large_deviation_grad(di, ld_scale, &gd);
          add_intensity_grad(grad_field, i, gd);
        }
      }
      require_finite(loss_s + loss_advg + loss_ld, "generator objective");
      gen.backward(grad_field);
      adam_g.step(gen.params());
    }

    // --- segmenter step on the union batch ---
    if (cfg_.joint) {
      const int half = B / 2;
      auto real_ptrs = draw_labeled(half, rng);
      auto gen_srcs = draw_labeled(half, rng);
      Tensor4f gen_x, gen_y;
      {
        Tensor4f xb = image_batch(gen_srcs);
        Tensor4f field_t = gen.forward(xb, draw_z(half, rng), nn::Mode::Grad);
        transform_batch(gen_srcs, field_t, gen_x, &gen_y);
      }
      Tensor4f xb(B, 1, data_.h, data_.w), yb(B, data_.num_classes, data_.h, data_.w);
      for (int i = 0; i < half; ++i) {
        xb.set_channel(i, 0, real_ptrs[i]->image);
        for (int c = 0; c < data_.num_classes; ++c)
          yb.set_channel(i, c, real_ptrs[i]->label_onehot[c]);
      }
      xb.data.rightCols(static_cast<Eigen::Index>(half) * data_.h * data_.w) = gen_x.data;
      yb.data.rightCols(static_cast<Eigen::Index>(half) * data_.h * data_.w) = gen_y.data;

      seg.zero_grads();
      Tensor4f logits = seg.forward(xb, nn::Mode::Train);
      Tensor4f g_logits;
      loss_s = weighted_cross_entropy(logits, yb, class_weights_, &g_logits);
      require_finite(loss_s, "segmentation loss");
      seg.backward(g_logits);
      adam_s.step(seg.params());
    }

    double val = -1.0;
    if (cfg_.use_validation && (it % cfg_.val_eval_stride == 0 || it == run_iters)) {
      val = validation_dsc(seg);
      if (val > sel.best_val_dsc) snapshot_gen(it, val);
    }
    if (log) {
      const double reg = cfg_.lambda_adv * loss_advg + cfg_.lambda_ld * loss_ld;
      log->rows.push_back({it, loss_s, loss_d, loss_advg, loss_ld, reg, val});
    }
  }

  if (!cfg_.use_validation || sel.best_iter < 0) {
    // fixed-iteration stopping, or a run too short to evaluate
    snapshot_gen(run_iters, std::max(0.0, validation_dsc(seg)));
  } else if (!cfg_.joint) {
    // Without the segmentation loss the validation trace is flat (the
    // segmenter never moves), so the fully trained generator is kept.
    snapshot_gen(run_iters, sel.best_val_dsc);
  }

  set_generator_selection(kind, sel);
  return sel;
}

void Trainer::set_generator_selection(nn::GeneratorKind kind, GeneratorSelection sel) {
  auto frozen = std::make_unique<nn::GeneratorNet<float>>(kind, data_.h, data_.w, cfg_.gen);
  nn::restore(*frozen, sel.checkpoint);
  if (kind == nn::GeneratorKind::Deform) {
    sel_v_ = std::move(sel);
    frozen_v_ = std::move(frozen);
  } else {
    sel_i_ = std::move(sel);
    frozen_i_ = std::move(frozen);
  }
}

// ---------------------------------------------------------------------------
// Sampling from the frozen generators
// ---------------------------------------------------------------------------

// Frozen generators are sampled the same way they ran during joint training:
// batched, with batch statistics. Running-average statistics lag behind the
// z-driven shifts in generator feature distributions, so eval-mode sampling
// would produce fields the validation selection never saw.
std::vector<Trainer::GeneratedPair> Trainer::generate_batch(
    nn::GeneratorNet<float>& gen, const std::vector<const SliceSample*>& srcs,
    RandomStream& rng) const {
  std::vector<GeneratedPair> out(srcs.size());
  if (srcs.empty()) return out;
  const int n = static_cast<int>(srcs.size());
  Tensor4f x(n, 1, data_.h, data_.w);
  for (int i = 0; i < n; ++i) x.set_channel(i, 0, srcs[i]->image);
  Tensor4f field_t = gen.forward(x, draw_z(n, rng), nn::Mode::Grad);
  for (int i = 0; i < n; ++i) {
    if (gen.kind() == nn::GeneratorKind::Deform) {
      const DeformationField v = field_from_tensor(field_t, i);
      out[i].image = apply_deformation(srcs[i]->image, v, PadMode::Zeros);
      out[i].label = apply_deformation_to_label(srcs[i]->label_onehot, v);
    } else {
      out[i].image = apply_intensity(srcs[i]->image, intensity_from_tensor(field_t, i));
      out[i].label = srcs[i]->label_onehot;
    }
  }
  return out;
}

Trainer::GeneratedPair Trainer::generate_one(nn::GeneratorNet<float>& gen,
                                             const SliceSample& src, RandomStream& rng) const {
  return generate_batch(gen, {&src}, rng)[0];
}

AugmentedSets Trainer::sample_augmented_set(int n_per_source, RandomStream& rng) {
  if (!frozen_v_ || !frozen_i_)
    throw std::runtime_error("sample_augmented_set: generator selections missing");
  AugmentedSets sets;
  if (n_per_source <= 0) return sets;

  std::vector<const SliceSample*> srcs = draw_labeled(n_per_source, rng);
  const auto gv = generate_batch(*frozen_v_, srcs, rng);
  for (int k = 0; k < n_per_source; ++k) {
    SliceSample s = *srcs[k];
    s.image = gv[k].image;
    s.label_onehot = gv[k].label;
    sets.gv.push_back(std::move(s));
  }
  const auto gi = generate_batch(*frozen_i_, srcs, rng);
  for (int k = 0; k < n_per_source; ++k) {
    SliceSample s = *srcs[k];
    s.image = gi[k].image;
    sets.gi.push_back(std::move(s));
  }
  // both transformations: the intensity generator is conditioned on the
  // already-deformed images; labels carry only the deformation
  std::vector<const SliceSample*> gv_ptrs;
  for (const auto& s : sets.gv) gv_ptrs.push_back(&s);
  const auto gvi = generate_batch(*frozen_i_, gv_ptrs, rng);
  for (int k = 0; k < n_per_source; ++k) {
    SliceSample s = sets.gv[k];
    s.image = gvi[k].image;
    sets.gvi.push_back(std::move(s));
  }
  return sets;
}

// ---------------------------------------------------------------------------
// Final retrain under an augmentation policy
// ---------------------------------------------------------------------------

std::vector<SliceSample> Trainer::policy_batch(AugPolicy policy, int count, RandomStream& rng) {
  const auto random_labeled = [&]() -> const SliceSample& {
    return data_.labeled[rng.uniform_int(0, static_cast<int>(data_.labeled.size()) - 1)];
  };
  const ElasticAugConfig& elastic = cfg_.elastic;
  const IntensityAugConfig& intensity = cfg_.intensity;
  const AffineAugConfig& affine = cfg_.affine;
  const MixupConfig& mix = cfg_.mixup;

  const auto rd_sample = [&](const SliceSample& src) {
    const DeformationField f = random_elastic_field(data_.h, data_.w, elastic, rng);
    SliceSample out = src;
    out.image = apply_deformation(src.image, f, PadMode::Zeros);
    out.label_onehot = apply_deformation_to_label(src.label_onehot, f);
    return out;
  };
  const auto ri_sample = [&](const SliceSample& src) {
    SliceSample out = src;
    out.image = random_contrast_brightness(src.image, intensity, rng);
    return out;
  };
  const auto gd_sample = [&](const SliceSample& src) {
    const GeneratedPair p = generate_one(*frozen_v_, src, rng);
    SliceSample out = src;
    out.image = p.image;
    out.label_onehot = p.label;
    return out;
  };
  const auto gi_sample = [&](const SliceSample& src) {
    const GeneratedPair p = generate_one(*frozen_i_, src, rng);
    SliceSample out = src;
    out.image = p.image;
    return out;
  };

  std::vector<SliceSample> batch;
  batch.reserve(count);

  switch (policy) {
    case AugPolicy::RD:
      for (int i = 0; i < count; ++i) batch.push_back(rd_sample(random_labeled()));
      return batch;
    case AugPolicy::RI:
      for (int i = 0; i < count; ++i) batch.push_back(ri_sample(random_labeled()));
      return batch;
    case AugPolicy::RDRI:
      // mirror of the three-source learned pool: deform-only, intensity-only,
      // or both back to back
      for (int i = 0; i < count; ++i) {
        switch (rng.uniform_int(0, 2)) {
          case 0: batch.push_back(rd_sample(random_labeled())); break;
          case 1: batch.push_back(ri_sample(random_labeled())); break;
          default: batch.push_back(ri_sample(rd_sample(random_labeled())));
        }
      }
      return batch;
    case AugPolicy::GD:
    case AugPolicy::GI:
    case AugPolicy::GDGI: {
      // sources per slot: 0 = deform, 1 = intensity, 2 = both
      std::vector<int> kinds(count);
      for (int i = 0; i < count; ++i)
        kinds[i] = policy == AugPolicy::GD   ? 0
                   : policy == AugPolicy::GI ? 1
                                             : rng.uniform_int(0, 2);
      std::vector<const SliceSample*> srcs(count);
      for (int i = 0; i < count; ++i) srcs[i] = &random_labeled();

      std::vector<SliceSample> staged(count);
      // deformation pass for slots 0 and 2
      std::vector<int> v_slots;
      std::vector<const SliceSample*> v_srcs;
      for (int i = 0; i < count; ++i) {
        if (kinds[i] != 1) {
          v_slots.push_back(i);
          v_srcs.push_back(srcs[i]);
        }
      }
      const auto v_out = generate_batch(*frozen_v_, v_srcs, rng);
      for (std::size_t k = 0; k < v_slots.size(); ++k) {
        staged[v_slots[k]] = *srcs[v_slots[k]];
        staged[v_slots[k]].image = v_out[k].image;
        staged[v_slots[k]].label_onehot = v_out[k].label;
      }
      // intensity pass for slots 1 (on originals) and 2 (on deformed images)
      std::vector<int> i_slots;
      std::vector<const SliceSample*> i_srcs;
      for (int i = 0; i < count; ++i) {
        if (kinds[i] == 1) {
          staged[i] = *srcs[i];
          i_slots.push_back(i);
          i_srcs.push_back(&staged[i]);
        } else if (kinds[i] == 2) {
          i_slots.push_back(i);
          i_srcs.push_back(&staged[i]);
        }
      }
      const auto i_out = generate_batch(*frozen_i_, i_srcs, rng);
      for (std::size_t k = 0; k < i_slots.size(); ++k) staged[i_slots[k]].image = i_out[k].image;
      return staged;
    }
    case AugPolicy::Mixup: {
      // pool: originals and their affine copies
      const auto draw = [&]() {
        const SliceSample& s = random_labeled();
        return rng.bernoulli(0.5) ? random_affine(s, affine, rng) : s;
      };
      for (int i = 0; i < count; ++i) {
        const SliceSample a = draw(), b = draw();
        batch.push_back(mixup(a, b, mix, rng));
      }
      return batch;
    }
    case AugPolicy::GDGIMixup: {
      // pool: originals, affine copies and all three generated sources
      const auto draw = [&]() -> SliceSample {
        const SliceSample& s = random_labeled();
        switch (rng.uniform_int(0, 4)) {
          case 0: return s;
          case 1: return random_affine(s, affine, rng);
          case 2: return gd_sample(s);
          case 3: return gi_sample(s);
          default: return gi_sample(gd_sample(s));
        }
      };
      for (int i = 0; i < count; ++i) {
        const SliceSample a = draw(), b = draw();
        batch.push_back(mixup(a, b, mix, rng));
      }
      return batch;
    }
    default:
      throw std::invalid_argument("policy_batch: unsupported policy " + to_string(policy));
  }
}

nn::Checkpoint Trainer::final_retrain(AugPolicy policy, TrainLog* log) {
  if (policy_needs_deform_generator(policy) && !frozen_v_)
    throw std::runtime_error("final_retrain: deformation generator selection missing");
  if (policy_needs_intensity_generator(policy) && !frozen_i_)
    throw std::runtime_error("final_retrain: intensity generator selection missing");

  nn::SegmenterNet<float> seg(data_.h, data_.w, data_.num_classes, cfg_.seg_base_width);
  {
    RandomStream init_rng(derive_seed(cfg_.seed, 0xf17a));
    seg.init(init_rng);
  }
  nn::AdamOptimizer<float> adam(cfg_.lr, cfg_.beta1, cfg_.beta2);
  RandomStream rng(derive_seed(cfg_.seed, 0xf17b + static_cast<std::uint64_t>(policy)));
  const AffineAugConfig& affine = cfg_.affine;

  retrain_batches_.clear();
  const int B = cfg_.batch_size;
  const int run_iters = cfg_.use_validation ? cfg_.total_iters : cfg_.fixed_iters;

  double best_dsc = -1.0;
  int best_iter = 0;
  nn::Checkpoint best = nn::snapshot(seg, "segmenter");

  for (int it = 1; it <= run_iters; ++it) {
    std::vector<SliceSample> staged;
    staged.reserve(B);
    BatchComposition comp;
    if (policy == AugPolicy::None) {
      for (int i = 0; i < B; ++i)
        staged.push_back(data_.labeled[rng.uniform_int(0, static_cast<int>(data_.labeled.size()) - 1)]);
    } else if (policy == AugPolicy::Aff) {
      for (int i = 0; i < B; ++i) {
        const SliceSample& s =
            data_.labeled[rng.uniform_int(0, static_cast<int>(data_.labeled.size()) - 1)];
        staged.push_back(random_affine(s, affine, rng));
      }
      comp.n_affine = B;
    } else {
      // half random-affine labeled data, half policy samples, exactly
      const int half = B / 2;
      for (int i = 0; i < half; ++i) {
        const SliceSample& s =
            data_.labeled[rng.uniform_int(0, static_cast<int>(data_.labeled.size()) - 1)];
        staged.push_back(random_affine(s, affine, rng));
      }
      for (auto& s : policy_batch(policy, half, rng)) staged.push_back(std::move(s));
      comp.n_affine = half;
      comp.n_policy = half;
    }
    retrain_batches_.push_back(comp);

    std::vector<const SliceSample*> ptrs;
    ptrs.reserve(B);
    for (const auto& s : staged) ptrs.push_back(&s);
    Tensor4f xb = image_batch(ptrs);
    Tensor4f yb = label_batch(ptrs);

    seg.zero_grads();
    Tensor4f logits = seg.forward(xb, nn::Mode::Train);
    Tensor4f g_logits;
    const float loss = weighted_cross_entropy(logits, yb, class_weights_, &g_logits);
    require_finite(loss, "segmentation loss");
    seg.backward(g_logits);
    adam.step(seg.params());

    double val = -1.0;
    if (cfg_.use_validation && (it % cfg_.val_eval_stride == 0 || it == run_iters)) {
      val = validation_dsc(seg);
      if (val > best_dsc) {
        best_dsc = val;
        best_iter = it;
        best = nn::snapshot(seg, "segmenter");
      }
    }
    if (log) log->rows.push_back({it, loss, 0.0, 0.0, 0.0, 0.0, val});
  }

  if (!cfg_.use_validation && run_iters > 0) best = nn::snapshot(seg, "segmenter");
  (void)best_iter;
  return best;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

LabelVolume Trainer::predict_volume(nn::SegmenterNet<float>& seg, const ImageVolume& vol) const {
  const int nz = vol.depth();
  Tensor4f xb(nz, 1, data_.h, data_.w);
  for (int z = 0; z < nz; ++z) xb.set_channel(z, 0, vol.slices[z]);
  Tensor4f logits = seg.forward(xb, nn::Mode::Eval);

  LabelVolume pred;
  pred.num_classes = data_.num_classes;
  for (int z = 0; z < nz; ++z) {
    LabelMat sl(data_.h, data_.w);
    for (int y = 0; y < data_.h; ++y)
      for (int x = 0; x < data_.w; ++x) {
        const Eigen::Index p = logits.col(z, y, x);
        int best = 0;
        float bv = logits.data(0, p);
        for (int c = 1; c < data_.num_classes; ++c)
          if (logits.data(c, p) > bv) {
            bv = logits.data(c, p);
            best = c;
          }
        sl(y, x) = best;
      }
    pred.slices.push_back(std::move(sl));
  }
  return pred;
}

double Trainer::validation_dsc(nn::SegmenterNet<float>& seg) const {
  std::vector<double> all;
  for (const auto& pair : data_.validation) {
    const LabelVolume pred = predict_volume(seg, pair.image);
    for (double d : dice_per_structure(pred, pair.label)) all.push_back(d);
  }
  return mean_of(all);
}

RunResult Trainer::evaluate_checkpoint(const nn::Checkpoint& seg_ckpt,
                                       const std::string& policy_name) const {
  nn::SegmenterNet<float> seg(data_.h, data_.w, data_.num_classes, cfg_.seg_base_width);
  nn::restore(seg, seg_ckpt);

  RunResult result;
  result.policy = policy_name;
  for (int c = 1; c < data_.num_classes; ++c) {
    std::string name = "structure_" + std::to_string(c);
    if (!data_.test.empty() &&
        static_cast<int>(data_.test.front().image.structure_names.size()) >= c)
      name = data_.test.front().image.structure_names[c - 1];
    result.structures.push_back(name);
  }
  for (const auto& pair : data_.test) {
    if (pair.label.num_classes != data_.num_classes)
      throw std::invalid_argument("evaluate_checkpoint: class count mismatch for subject " +
                                  pair.image.subject_id);
    const LabelVolume pred = predict_volume(seg, pair.image);
    result.dsc[pair.image.subject_id] = dice_per_structure(pred, pair.label);
  }
  return result;
}

double Trainer::mean_abs_field(const nn::Checkpoint& gen_ckpt, nn::GeneratorKind kind,
                               const std::vector<int>& probe_slices,
                               const std::vector<MatrixX<float>>& probe_z) const {
  nn::GeneratorNet<float> gen(kind, data_.h, data_.w, cfg_.gen);
  nn::restore(gen, gen_ckpt);
  if (probe_slices.size() != probe_z.size() || probe_slices.empty())
    throw std::invalid_argument("mean_abs_field: probe set mismatch");
  const int n = static_cast<int>(probe_slices.size());
  Tensor4f x(n, 1, data_.h, data_.w);
  MatrixX<float> z(cfg_.gen.z_dim, n);
  for (int k = 0; k < n; ++k) {
    x.set_channel(k, 0, data_.labeled.at(probe_slices[k]).image);
    z.col(k) = probe_z[k].col(0);
  }
  const Tensor4f field_t = gen.forward(x, z, nn::Mode::Grad);
  return field_t.data.array().abs().sum() /
         (static_cast<double>(data_.h * data_.w) * n);
}

}  // namespace tdaug
