#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <tdaug/core/random.hpp>
#include <tdaug/loss/losses.hpp>
#include <tdaug/nn/models.hpp>

using namespace tdaug;

namespace {

template <typename T>
Tensor4<T> random_tensor(int n, int c, int h, int w, RandomStream& rng, double lo = -2.0,
                         double hi = 2.0) {
  Tensor4<T> t(n, c, h, w);
  for (Eigen::Index j = 0; j < t.cols(); ++j)
    for (int ch = 0; ch < c; ++ch) t.data(ch, j) = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
Tensor4<T> random_soft_target(int n, int c, int h, int w, RandomStream& rng) {
  Tensor4<T> t(n, c, h, w);
  for (Eigen::Index j = 0; j < t.cols(); ++j) {
    T sum = T(0);
    for (int ch = 0; ch < c; ++ch) {
      t.data(ch, j) = static_cast<T>(rng.uniform(0.01, 1.0));
      sum += t.data(ch, j);
    }
    for (int ch = 0; ch < c; ++ch) t.data(ch, j) /= sum;
  }
  return t;
}

// Independent per-pixel evaluation: explicit softmax, explicit sum.
double brute_force_wce(const Tensor4d& logits, const Tensor4d& target,
                       const VectorX<double>& w) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    double denom = 0.0;
    for (int c = 0; c < logits.c; ++c) denom += std::exp(logits.data(c, j));
    for (int c = 0; c < logits.c; ++c) {
      const double p = std::exp(logits.data(c, j)) / denom;
      total -= w(c) * target.data(c, j) * std::log(p);
    }
  }
  return total / static_cast<double>(logits.cols());
}


// Central difference with a smoothness guard: two step sizes must agree,
// otherwise the objective has a kink at this point and the estimate is
// meaningless.
template <typename Fn>
std::pair<bool, double> guarded_fd(Fn&& eval, double& slot, double saved) {
  const auto fd_at = [&](double step) {
    slot = saved + step;
    const double up = eval();
    slot = saved - step;
    const double dn = eval();
    slot = saved;
    return (up - dn) / (2 * step);
  };
  const double coarse = fd_at(1e-5);
  const double fine = fd_at(1e-6);
  const double denom = std::max({std::abs(coarse), std::abs(fine), 1e-10});
  if (std::abs(coarse - fine) / denom > 5e-4) return {false, fine};
  return {true, fine};
}

}  // namespace

TEST_CASE("class weights put 0.1 on background and split 0.9 over the foreground") {
  const auto w4 = default_class_weights<float>(4);
  CHECK(w4(0) == doctest::Approx(0.1f));
  for (int c = 1; c < 4; ++c) CHECK(w4(c) == doctest::Approx(0.3f));
  const auto w3 = default_class_weights<float>(3);
  CHECK(w3(1) == doctest::Approx(0.45f));
  const auto w2 = default_class_weights<float>(2);
  CHECK(w2(1) == doctest::Approx(0.9f));
}

TEST_CASE("weighted cross entropy") {
  RandomStream rng(11);

  SUBCASE("uniform logits against a hard background target cost w_bg*log(C)") {
    Tensor4d logits(1, 4, 3, 3);  // all zeros -> uniform softmax
    Tensor4d target(1, 4, 3, 3);
    target.data.row(0).setOnes();
    const double loss = weighted_cross_entropy(logits, target, default_class_weights<double>(4));
    CHECK(loss == doctest::Approx(0.1 * std::log(4.0)).epsilon(1e-9));
  }

  SUBCASE("confident correct predictions drive the loss to zero") {
    Tensor4d logits(1, 4, 3, 3);
    Tensor4d target(1, 4, 3, 3);
    target.data.row(2).setOnes();
    logits.data.row(2).setConstant(50.0);
    const double loss = weighted_cross_entropy(logits, target, default_class_weights<double>(4));
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-9);
  }

  SUBCASE("matches the brute-force per-pixel evaluation on random data") {
    const auto logits = random_tensor<double>(2, 4, 16, 16, rng);
    const auto target = random_soft_target<double>(2, 4, 16, 16, rng);
    const auto w = default_class_weights<double>(4);
    const double loss = weighted_cross_entropy(logits, target, w);
    CHECK(loss == doctest::Approx(brute_force_wce(logits, target, w)).epsilon(1e-6));
  }

  SUBCASE("is non-negative on random inputs") {
    for (int trial = 0; trial < 20; ++trial) {
      const auto logits = random_tensor<double>(1, 3, 8, 8, rng);
      const auto target = random_soft_target<double>(1, 3, 8, 8, rng);
      CHECK(weighted_cross_entropy(logits, target, default_class_weights<double>(3)) >= 0.0);
    }
  }

  SUBCASE("logit and target gradients match finite differences") {
    const auto logits = random_tensor<double>(1, 3, 4, 4, rng);
    const auto target = random_soft_target<double>(1, 3, 4, 4, rng);
    const auto w = default_class_weights<double>(3);
    Tensor4d g_logits, g_target;
    weighted_cross_entropy(logits, target, w, &g_logits, &g_target);
    const double step = 1e-6;
    for (Eigen::Index j = 0; j < logits.cols(); j += 5) {
      for (int c = 0; c < 3; ++c) {
        Tensor4d lp = logits, lm = logits;
        lp.data(c, j) += step;
        lm.data(c, j) -= step;
        const double fd =
            (weighted_cross_entropy(lp, target, w) - weighted_cross_entropy(lm, target, w)) /
            (2 * step);
        CHECK(g_logits.data(c, j) == doctest::Approx(fd).epsilon(1e-4));

        Tensor4d tp = target, tm = target;
        tp.data(c, j) += step;
        tm.data(c, j) -= step;
        const double fd_t =
            (weighted_cross_entropy(logits, tp, w) - weighted_cross_entropy(logits, tm, w)) /
            (2 * step);
        CHECK(g_target.data(c, j) == doctest::Approx(fd_t).epsilon(1e-4));
      }
    }
  }

  SUBCASE("non-finite logits are rejected") {
    Tensor4d logits(1, 2, 2, 2);
    Tensor4d target = random_soft_target<double>(1, 2, 2, 2, rng);
    logits.data(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(
        weighted_cross_entropy(logits, target, default_class_weights<double>(2)),
        std::invalid_argument);
  }
}

TEST_CASE("adversarial losses") {
  SUBCASE("an undecided discriminator costs 2 log 2") {
    MatrixX<double> real = MatrixX<double>::Zero(2, 8);  // equal logits -> p = 0.5
    MatrixX<double> fake = MatrixX<double>::Zero(2, 8);
    const auto [loss_d, loss_g] = adversarial_losses(real, fake);
    CHECK(loss_d == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-9));
    CHECK(loss_g == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  }

  SUBCASE("perfect separation drives the discriminator loss to zero") {
    MatrixX<double> real(2, 4), fake(2, 4);
    real.row(0).setConstant(-40.0);
    real.row(1).setConstant(40.0);
    fake.row(0).setConstant(40.0);
    fake.row(1).setConstant(-40.0);
    const auto [loss_d, loss_g] = adversarial_losses(real, fake);
    CHECK(loss_d >= 0.0);
    CHECK(loss_d < 1e-9);
  }

  SUBCASE("generator loss decreases as the fake looks more real") {
    double prev = std::numeric_limits<double>::infinity();
    for (double logit : {-4.0, -2.0, 0.0, 2.0, 4.0}) {
      MatrixX<double> fake(2, 1);
      fake(0, 0) = 0.0;
      fake(1, 0) = logit;  // class 1 = judged real
      const double loss = generator_adversarial_loss(fake, true);
      CHECK(loss < prev);
      prev = loss;
    }
  }

  SUBCASE("the saturating form is the negative fake-class cross entropy") {
    MatrixX<double> fake(2, 3);
    fake << 0.3, -1.0, 2.0, -0.2, 0.7, 0.1;
    const double sat = generator_adversarial_loss(fake, false);
    CHECK(sat == doctest::Approx(-two_class_cross_entropy(fake, 0)).epsilon(1e-12));
  }
}

TEST_CASE("large deviation loss") {
  SUBCASE("zero fields cost nothing") {
    CHECK(large_deviation_loss(DeformationFieldT<double>(4, 4)) == 0.0);
    CHECK(large_deviation_loss(IntensityFieldT<double>(4, 4)) == 0.0);
  }
  SUBCASE("hand-summed L1 norm, negated") {
    IntensityFieldT<double> f(2, 2);
    f.delta << 1.0, -2.0, 3.0, -4.0;
    CHECK(large_deviation_loss(f) == doctest::Approx(-10.0));
  }
  SUBCASE("positive scaling is homogeneous") {
    RandomStream rng(2);
    DeformationFieldT<double> f(5, 5);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) {
        f.dy(y, x) = rng.uniform(-3.0, 3.0);
        f.dx(y, x) = rng.uniform(-3.0, 3.0);
      }
    const double base = large_deviation_loss(f);
    CHECK(base < 0.0);
    DeformationFieldT<double> scaled = f;
    scaled.dy *= 2.5;
    scaled.dx *= 2.5;
    CHECK(large_deviation_loss(scaled) == doctest::Approx(2.5 * base).epsilon(1e-12));
  }
}

TEST_CASE("regularization composition and linearity") {
  RegularizationWeights<double> w;

  SUBCASE("defaults compose as adv + 1e-3 * ld") {
    CHECK(regularization_loss(1.0, -100.0, w) == doctest::Approx(0.9).epsilon(1e-9));
  }
  SUBCASE("zero weights disable the whole term") {
    RegularizationWeights<double> off{0.0, 0.0};
    CHECK(regularization_loss(3.7, -55.0, off) == 0.0);
  }
  SUBCASE("adv-only variant") {
    RegularizationWeights<double> adv_only{1.0, 0.0};
    CHECK(regularization_loss(2.5, -99.0, adv_only) == doctest::Approx(2.5));
  }
  SUBCASE("linear in each lambda (three-point collinearity)") {
    const double adv = 1.3, ld = -42.0;
    for (int which = 0; which < 2; ++which) {
      RegularizationWeights<double> probe;
      double ys[3];
      const double xs[3] = {0.0, 1.0, 2.0};
      for (int i = 0; i < 3; ++i) {
        (which == 0 ? probe.lambda_adv : probe.lambda_ld) = xs[i];
        ys[i] = regularization_loss(adv, ld, probe);
      }
      CHECK(ys[2] - ys[1] == doctest::Approx(ys[1] - ys[0]).epsilon(1e-12));
    }
  }
}

TEST_CASE("task-driven objective is the plain sum") {
  CHECK(task_driven_objective(0.73, 0.0) == doctest::Approx(0.73));
  CHECK(task_driven_objective(0.5, 0.25) == doctest::Approx(0.75));
}

// Full-path oracle: finite differences of the assembled objective with
// respect to generator weights, through warp, segmenter and discriminator.
TEST_CASE("objective gradient w.r.t. generator parameters matches finite differences") {
  using T = double;
  RandomStream rng(1234);
  const int h = 32, w = 32, C = 2, B = 2;  // smallest size the discriminator accepts

  nn::GeneratorConfig gcfg;
  gcfg.z_dim = 8;
  gcfg.branch_width = 3;
  gcfg.branch_out = 4;
  gcfg.common_width = 4;
  gcfg.z_seed_channels = 2;
  nn::GeneratorNet<T> gen(nn::GeneratorKind::Deform, h, w, gcfg);
  nn::SegmenterNet<T> seg(h, w, C, 2);
  nn::DiscriminatorNet<T> disc(h, w, {4, 8, 4});
  {
    RandomStream r1(1), r2(2), r3(3);
    gen.init(r1);
    seg.init(r2);
    disc.init(r3);
  }

  Tensor4<T> xb(B, 1, h, w);
  std::vector<std::vector<MatrixX<T>>> labels(B);
  for (int i = 0; i < B; ++i) {
    MatrixX<T> img(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img(y, x) = rng.uniform();
    xb.set_channel(i, 0, img);
    labels[i].assign(C, MatrixX<T>::Zero(h, w));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        labels[i][(y > 8 && y < 22 && x > 10 && x < 24) ? 1 : 0](y, x) = T(1);
  }
  MatrixX<T> z(gcfg.z_dim, B);
  for (int j = 0; j < B; ++j)
    for (int i = 0; i < gcfg.z_dim; ++i) z(i, j) = rng.normal();

  const auto weights = default_class_weights<T>(C);
  const T lambda_adv = T(1), lambda_ld = T(1e-3);
  const T ld_norm = T(1) / static_cast<T>(h * w);

  const auto objective = [&]() {
    Tensor4<T> field = gen.forward(xb, z, nn::Mode::Grad);
    Tensor4<T> x_g(B, 1, h, w), y_g(B, C, h, w);
    T ld = T(0);
    for (int i = 0; i < B; ++i) {
      DeformationFieldT<T> v(h, w);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          v.dy(y, x) = field.data(0, field.col(i, y, x));
          v.dx(y, x) = field.data(1, field.col(i, y, x));
        }
      x_g.set_channel(i, 0, apply_deformation(xb.channel(i, 0), v, PadMode::Zeros));
      const auto warped = apply_deformation_to_label(labels[i], v);
      for (int c = 0; c < C; ++c) y_g.set_channel(i, c, warped[c]);
      ld += large_deviation_loss(v) * ld_norm / B;
    }
    const T seg_loss = weighted_cross_entropy(seg.forward(x_g, nn::Mode::Grad), y_g, weights);
    const T adv = generator_adversarial_loss(disc.forward(x_g, nn::Mode::Grad), true);
    return task_driven_objective(seg_loss, lambda_adv * adv + lambda_ld * ld);
  };

  // analytic gradient, assembled through the declared paths
  gen.zero_grads();
  {
    Tensor4<T> field = gen.forward(xb, z, nn::Mode::Grad);
    Tensor4<T> x_g(B, 1, h, w), y_g(B, C, h, w);
    std::vector<DeformationFieldT<T>> vs;
    for (int i = 0; i < B; ++i) {
      DeformationFieldT<T> v(h, w);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          v.dy(y, x) = field.data(0, field.col(i, y, x));
          v.dx(y, x) = field.data(1, field.col(i, y, x));
        }
      x_g.set_channel(i, 0, apply_deformation(xb.channel(i, 0), v, PadMode::Zeros));
      const auto warped = apply_deformation_to_label(labels[i], v);
      for (int c = 0; c < C; ++c) y_g.set_channel(i, c, warped[c]);
      vs.push_back(std::move(v));
    }
    Tensor4<T> g_logits, g_target;
    weighted_cross_entropy(seg.forward(x_g, nn::Mode::Grad), y_g, weights, &g_logits, &g_target);
    Tensor4<T> gx = seg.backward(g_logits);
    MatrixX<T> g_dlogits;
    generator_adversarial_loss(disc.forward(x_g, nn::Mode::Grad), true, &g_dlogits);
    g_dlogits *= lambda_adv;
    gx.data += disc.backward(g_dlogits).data;

    Tensor4<T> grad_field = field.zeros_like();
    for (int i = 0; i < B; ++i) {
      DeformationFieldT<T> gf(h, w);
      apply_deformation_backward(xb.channel(i, 0), vs[i], gx.channel(i, 0), PadMode::Zeros, &gf,
                                 static_cast<MatrixX<T>*>(nullptr));
      std::vector<MatrixX<T>> g_label(C);
      for (int c = 0; c < C; ++c) g_label[c] = g_target.channel(i, c);
      apply_deformation_to_label_backward(labels[i], vs[i], g_label, &gf);
      large_deviation_grad(vs[i], lambda_ld * ld_norm / B, &gf);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          grad_field.data(0, grad_field.col(i, y, x)) += gf.dy(y, x);
          grad_field.data(1, grad_field.col(i, y, x)) += gf.dx(y, x);
        }
    }
    gen.backward(grad_field);
  }

  auto params = gen.params();
  RandomStream pick(77);
  int checked = 0;
  for (std::size_t pi = 0; pi < params.size() && checked < 12; pi += 3) {
    auto& p = params[pi];
    const Eigen::Index idx = pick.uniform_int(0, static_cast<int>(p.value->size()) - 1);
    const auto [smooth, fd] = guarded_fd(objective, (*p.value)(idx), (*p.value)(idx));
    if (!smooth) continue;
    const double an = (*p.grad)(idx);
    if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) continue;
    CHECK(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}) < 1e-3);
    ++checked;
  }
  CHECK(checked >= 6);
}

TEST_CASE("generator gradients vanish when no declared path is active") {
  using T = double;
  const int h = 16, w = 16, C = 2, B = 1;
  nn::GeneratorConfig gcfg;
  gcfg.z_dim = 4;
  gcfg.branch_width = 2;
  gcfg.branch_out = 2;
  gcfg.common_width = 2;
  gcfg.z_seed_channels = 2;
  nn::GeneratorNet<T> gen(nn::GeneratorKind::Deform, h, w, gcfg);
  nn::SegmenterNet<T> seg(h, w, C, 2);
  RandomStream r1(4), r2(5), rng(6);
  gen.init(r1);
  seg.init(r2);

  // objective reduced to the supervised loss on labeled data only, with
  // lambda_adv = lambda_ld = 0: no path reaches the generator
  Tensor4<T> xb(B, 1, h, w), yb(B, C, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      xb.data(0, xb.col(0, y, x)) = rng.uniform();
      yb.data((y + x) % C, yb.col(0, y, x)) = T(1);
    }
  gen.zero_grads();
  Tensor4<T> g_logits;
  weighted_cross_entropy(seg.forward(xb, nn::Mode::Grad), yb, default_class_weights<T>(C),
                         &g_logits);
  seg.backward(g_logits);
  for (const auto& p : gen.params()) CHECK(p.grad->cwiseAbs().maxCoeff() == T(0));
}
