#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <tdaug/core/random.hpp>
#include <tdaug/eval/dice.hpp>
#include <tdaug/eval/report.hpp>
#include <tdaug/eval/stats.hpp>

using namespace tdaug;

namespace {

std::vector<LabelMat> random_mask(int h, int w, int d, double p, RandomStream& rng) {
  std::vector<LabelMat> out;
  for (int z = 0; z < d; ++z) {
    LabelMat sl(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) sl(y, x) = rng.bernoulli(p) ? 1 : 0;
    out.push_back(std::move(sl));
  }
  return out;
}

// voxel-set oracle: explicit set sizes and intersection count
double dice_oracle(const std::vector<LabelMat>& p, const std::vector<LabelMat>& g) {
  long np = 0, ng = 0, ni = 0;
  for (std::size_t z = 0; z < p.size(); ++z)
    for (Eigen::Index y = 0; y < p[z].rows(); ++y)
      for (Eigen::Index x = 0; x < p[z].cols(); ++x) {
        if (p[z](y, x) == 1) ++np;
        if (g[z](y, x) == 1) ++ng;
        if (p[z](y, x) == 1 && g[z](y, x) == 1) ++ni;
      }
  if (np + ng == 0) return 1.0;
  return 2.0 * ni / static_cast<double>(np + ng);
}

RunResult make_run(const std::string& policy, int replicate, int restart,
                   const std::map<std::string, std::vector<double>>& dsc) {
  RunResult r;
  r.policy = policy;
  r.replicate = replicate;
  r.restart = restart;
  r.structures = {"s1", "s2"};
  r.dsc = dsc;
  return r;
}

}  // namespace

TEST_CASE("dice on hand-built masks") {
  RandomStream rng(1);
  SUBCASE("identical non-empty masks score one") {
    const auto m = random_mask(8, 8, 2, 0.4, rng);
    CHECK(dice_binary(m, m, 1) == 1.0);
  }
  SUBCASE("disjoint non-empty masks score zero") {
    LabelMat a = LabelMat::Zero(4, 4), b = LabelMat::Zero(4, 4);
    a(0, 0) = 1;
    b(3, 3) = 1;
    CHECK(dice_binary({a}, {b}, 1) == 0.0);
  }
  SUBCASE("4-4 masks overlapping in 2 voxels score one half") {
    LabelMat p = LabelMat::Zero(4, 4), g = LabelMat::Zero(4, 4);
    p(0, 0) = p(0, 1) = p(0, 2) = p(0, 3) = 1;
    g(0, 2) = g(0, 3) = g(1, 0) = g(1, 1) = 1;
    CHECK(dice_binary({p}, {g}, 1) == doctest::Approx(0.5));
  }
  SUBCASE("both empty counts as perfect agreement") {
    const LabelMat z = LabelMat::Zero(4, 4);
    CHECK(dice_binary({z}, {z}, 1) == 1.0);
  }
  SUBCASE("empty prediction against non-empty truth scores zero") {
    LabelMat z = LabelMat::Zero(4, 4), g = LabelMat::Zero(4, 4);
    g(1, 1) = 1;
    CHECK(dice_binary({z}, {g}, 1) == 0.0);
  }
  SUBCASE("shape mismatches are rejected") {
    LabelMat a = LabelMat::Zero(4, 4), b = LabelMat::Zero(4, 5);
    CHECK_THROWS_AS(dice_binary({a}, {b}, 1), std::invalid_argument);
  }
}

TEST_CASE("dice equals the voxel-set oracle on random masks") {
  RandomStream rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const double pa = rng.uniform(0.05, 0.6), pb = rng.uniform(0.05, 0.6);
    const auto p = random_mask(16, 16, 4, pa, rng);
    const auto g = random_mask(16, 16, 4, pb, rng);
    const double got = dice_binary(p, g, 1);
    CHECK(got == dice_oracle(p, g));
    CHECK(got == dice_binary(g, p, 1));  // symmetry
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("per-structure dice covers every foreground class") {
  LabelVolume pred, gt;
  pred.num_classes = gt.num_classes = 3;
  LabelMat sl(4, 4);
  sl << 0, 1, 1, 0, 0, 1, 2, 0, 0, 2, 2, 0, 0, 0, 0, 0;
  pred.slices = {sl};
  gt.slices = {sl};
  const auto scores = dice_per_structure(pred, gt);
  REQUIRE(scores.size() == 2);
  CHECK(scores[0] == 1.0);
  CHECK(scores[1] == 1.0);
}

TEST_CASE("wilcoxon signed rank") {
  SUBCASE("identical samples have nothing to test") {
    const std::vector<double> xs = {0.5, 0.6, 0.7};
    CHECK(wilcoxon_signed_rank(xs, xs) == 1.0);
  }

  SUBCASE("six uniformly improved pairs reach significance") {
    std::vector<double> base = {0.50, 0.55, 0.60, 0.65, 0.70, 0.75};
    std::vector<double> better = base;
    for (auto& v : better) v += 0.1;
    CHECK(wilcoxon_signed_rank(better, base) < 0.05);
    CHECK(wilcoxon_signed_rank(better, base, Alternative::Greater) < 0.05);
    CHECK(wilcoxon_signed_rank(better, base, Alternative::Less) > 0.9);
  }

  SUBCASE("five all-positive pairs pass one-sided but not two-sided") {
    std::vector<double> base = {0.5, 0.52, 0.58, 0.61, 0.66};
    std::vector<double> better = base;
    for (auto& v : better) v += 0.05;
    CHECK(wilcoxon_signed_rank(better, base, Alternative::Greater) ==
          doctest::Approx(1.0 / 32.0));
    CHECK(wilcoxon_signed_rank(better, base, Alternative::TwoSided) ==
          doctest::Approx(2.0 / 32.0));
  }

  SUBCASE("matches a full sign-flip permutation estimate") {
    RandomStream rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      const int n = rng.uniform_int(6, 12);
      std::vector<double> xs(n), ys(n);
      for (int i = 0; i < n; ++i) {
        xs[i] = rng.uniform();
        ys[i] = xs[i] + rng.uniform(-0.2, 0.3);
      }
      const double exact = wilcoxon_signed_rank(ys, xs);

      // enumerate all sign flips of the differences
      std::vector<double> diffs;
      for (int i = 0; i < n; ++i)
        if (ys[i] != xs[i]) diffs.push_back(ys[i] - xs[i]);
      const int m = static_cast<int>(diffs.size());
      std::vector<double> ranks(m);
      {
        std::vector<int> order(m);
        for (int i = 0; i < m; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
          return std::abs(diffs[a]) < std::abs(diffs[b]);
        });
        for (int i = 0; i < m; ++i) ranks[order[i]] = i + 1;
      }
      double w_obs = 0;
      for (int i = 0; i < m; ++i)
        if (diffs[i] > 0) w_obs += ranks[i];
      long le = 0, ge = 0;
      const long total = 1L << m;
      for (long mask = 0; mask < total; ++mask) {
        double w = 0;
        for (int i = 0; i < m; ++i)
          if (mask & (1L << i)) w += ranks[i];
        if (w <= w_obs) ++le;
        if (w >= w_obs) ++ge;
      }
      const double perm_two =
          std::min(1.0, 2.0 * std::min(le / double(total), ge / double(total)));
      CHECK(std::abs(exact - perm_two) < 0.02);
    }
  }

  SUBCASE("unmatched lengths are rejected") {
    CHECK_THROWS_AS(wilcoxon_signed_rank({1.0, 2.0}, {1.0}), std::invalid_argument);
  }
}

TEST_CASE("policy comparison") {
  const std::map<std::string, std::vector<double>> base_dsc = {
      {"subj0", {0.5, 0.6}}, {"subj1", {0.55, 0.65}}, {"subj2", {0.45, 0.72}},
      {"subj3", {0.62, 0.58}},
  };

  SUBCASE("a policy compared to itself is indistinguishable") {
    std::vector<RunResult> a, b;
    for (int r = 0; r < 2; ++r) {
      a.push_back(make_run("GD+GI", r, 0, base_dsc));
      b.push_back(make_run("RD+RI", r, 0, base_dsc));
    }
    const ComparisonReport rep = compare_policies(a, b);
    CHECK(rep.p_value == 1.0);
    REQUIRE(rep.a_stats.size() == 2);
    CHECK(rep.a_stats[0].mean == doctest::Approx(rep.b_stats[0].mean));
  }

  SUBCASE("a uniform improvement across enough pairs is significant") {
    std::vector<RunResult> a, b;
    for (int r = 0; r < 2; ++r) {
      auto improved = base_dsc;
      for (auto& [k, v] : improved)
        for (auto& d : v) d += 0.1;
      a.push_back(make_run("GD+GI", r, 0, improved));
      b.push_back(make_run("RD+RI", r, 0, base_dsc));
    }
    const ComparisonReport rep = compare_policies(a, b);
    CHECK(rep.p_value < 0.05);
    CHECK(rep.a_stats[0].mean > rep.b_stats[0].mean);
  }

  SUBCASE("mismatched subject grids are rejected") {
    std::vector<RunResult> a = {make_run("GD+GI", 0, 0, base_dsc)};
    auto missing = base_dsc;
    missing.erase("subj3");
    std::vector<RunResult> b = {make_run("RD+RI", 0, 0, missing)};
    CHECK_THROWS_AS(compare_policies(a, b), std::invalid_argument);
  }
}

TEST_CASE("report JSON carries the documented schema") {
  std::vector<RunResult> runs = {
      make_run("GD+GI", 0, 0, {{"subj0", {0.7, 0.8}}, {"subj1", {0.6, 0.9}}}),
      make_run("GD+GI", 0, 1, {{"subj0", {0.72, 0.81}}, {"subj1", {0.63, 0.88}}}),
  };
  std::vector<RunResult> base = {
      make_run("RD+RI", 0, 0, {{"subj0", {0.6, 0.7}}, {"subj1", {0.5, 0.8}}}),
      make_run("RD+RI", 0, 1, {{"subj0", {0.62, 0.71}}, {"subj1", {0.53, 0.78}}}),
  };
  const ComparisonReport cmp = compare_policies(runs, base);
  const std::string text = report_to_json(runs, {cmp});
  CHECK(text.find("\"policy\"") != std::string::npos);
  CHECK(text.find("\"structures\"") != std::string::npos);
  CHECK(text.find("\"per_subject\"") != std::string::npos);
  CHECK(text.find("\"comparisons\"") != std::string::npos);
  CHECK(text.find("\"baseline\"") != std::string::npos);
  CHECK(text.find("\"p_value\"") != std::string::npos);

  // runs round-trip
  const auto back = runs_from_json(runs_to_json(runs));
  REQUIRE(back.size() == 2);
  CHECK(back[0].policy == "GD+GI");
  CHECK(back[0].dsc.at("subj0")[0] == doctest::Approx(0.7));
}
