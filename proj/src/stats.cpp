#include "tdaug/eval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tdaug {

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

double RunResult::mean_dsc() const {
  std::vector<double> all;
  for (const auto& [subject, values] : dsc)
    all.insert(all.end(), values.begin(), values.end());
  return mean_of(all);
}

namespace {

// Exact null distribution of W+ via convolution over doubled ranks (doubling
// keeps averaged tie-ranks integral).
double exact_p(const std::vector<double>& ranks, double w_plus, Alternative alt) {
  int total2 = 0;
  std::vector<int> r2(ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    r2[i] = static_cast<int>(std::llround(2.0 * ranks[i]));
    total2 += r2[i];
  }
  std::vector<double> dist(total2 + 1, 0.0);
  dist[0] = 1.0;
  int used = 0;
  for (int r : r2) {
    used += r;
    for (int s = used; s >= r; --s) dist[s] += dist[s - r];
  }
  const double denom = std::pow(2.0, static_cast<double>(ranks.size()));
  const int w2 = static_cast<int>(std::llround(2.0 * w_plus));

  double p_le = 0.0, p_ge = 0.0;
  for (int s = 0; s <= total2; ++s) {
    if (s <= w2) p_le += dist[s];
    if (s >= w2) p_ge += dist[s];
  }
  p_le /= denom;
  p_ge /= denom;
  switch (alt) {
    case Alternative::Greater: return std::min(1.0, p_ge);
    case Alternative::Less: return std::min(1.0, p_le);
    case Alternative::TwoSided: return std::min(1.0, 2.0 * std::min(p_le, p_ge));
  }
  return 1.0;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double approx_p(const std::vector<double>& ranks, double w_plus, Alternative alt) {
  const double n = static_cast<double>(ranks.size());
  const double mu = n * (n + 1.0) / 4.0;
  double sigma2 = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  // tie correction: subtract sum(t^3 - t)/48 per tied group
  std::vector<double> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    if (t > 1) sigma2 -= (t * t * t - t) / 48.0;
    i = j;
  }
  const double sigma = std::sqrt(std::max(sigma2, 1e-12));
  switch (alt) {
    case Alternative::Greater: return normal_sf((w_plus - mu - 0.5) / sigma);
    case Alternative::Less: return normal_sf((mu - w_plus - 0.5) / sigma);
    case Alternative::TwoSided: {
      const double z = (std::abs(w_plus - mu) - 0.5) / sigma;
      return std::min(1.0, 2.0 * normal_sf(z));
    }
  }
  return 1.0;
}

}  // namespace

double wilcoxon_signed_rank(const std::vector<double>& xs, const std::vector<double>& ys,
                            Alternative alt) {
  if (xs.size() != ys.size())
    throw std::invalid_argument("wilcoxon_signed_rank: unmatched pairing");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - ys[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) return 1.0;

  // rank |d| with averaged ties
  std::vector<std::size_t> order(diffs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(diffs[a]) < std::abs(diffs[b]);
  });
  std::vector<double> ranks(diffs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && std::abs(diffs[order[j]]) == std::abs(diffs[order[i]])) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg_rank;
    i = j;
  }

  double w_plus = 0.0;
  for (std::size_t i = 0; i < diffs.size(); ++i)
    if (diffs[i] > 0) w_plus += ranks[i];

  std::vector<double> rank_values(ranks.begin(), ranks.end());
  if (diffs.size() <= 30) return exact_p(rank_values, w_plus, alt);
  return approx_p(rank_values, w_plus, alt);
}

ComparisonReport compare_policies(const std::vector<RunResult>& a,
                                  const std::vector<RunResult>& b, bool per_subject_mean) {
  if (a.empty() || b.empty() || a.size() != b.size())
    throw std::invalid_argument("compare_policies: run lists must be non-empty and matched");

  const auto key = [](const RunResult& r) { return std::make_pair(r.replicate, r.restart); };
  std::vector<std::size_t> order_a(a.size()), order_b(b.size());
  std::iota(order_a.begin(), order_a.end(), 0);
  std::iota(order_b.begin(), order_b.end(), 0);
  std::sort(order_a.begin(), order_a.end(),
            [&](std::size_t i, std::size_t j) { return key(a[i]) < key(a[j]); });
  std::sort(order_b.begin(), order_b.end(),
            [&](std::size_t i, std::size_t j) { return key(b[i]) < key(b[j]); });

  ComparisonReport report;
  report.policy_a = a.front().policy;
  report.policy_b = b.front().policy;

  const std::size_t n_struct = a.front().structures.size();
  std::vector<std::vector<double>> a_by_struct(n_struct), b_by_struct(n_struct);
  std::vector<double> paired_a, paired_b;

  for (std::size_t r = 0; r < a.size(); ++r) {
    const RunResult& ra = a[order_a[r]];
    const RunResult& rb = b[order_b[r]];
    if (key(ra) != key(rb))
      throw std::invalid_argument("compare_policies: replicate/restart pairing mismatch");
    if (ra.dsc.size() != rb.dsc.size() || ra.structures.size() != rb.structures.size())
      throw std::invalid_argument("compare_policies: subject/structure grid mismatch");
    if (per_subject_mean) {
      paired_a.push_back(ra.mean_dsc());
      paired_b.push_back(rb.mean_dsc());
    }
    for (const auto& [subject, va] : ra.dsc) {
      const auto it = rb.dsc.find(subject);
      if (it == rb.dsc.end())
        throw std::invalid_argument("compare_policies: subject missing from baseline: " + subject);
      const auto& vb = it->second;
      for (std::size_t s = 0; s < n_struct; ++s) {
        a_by_struct[s].push_back(va[s]);
        b_by_struct[s].push_back(vb[s]);
        if (!per_subject_mean) {
          paired_a.push_back(va[s]);
          paired_b.push_back(vb[s]);
        }
      }
    }
  }

  for (std::size_t s = 0; s < n_struct; ++s) {
    StructureStats sa{a.front().structures[s], mean_of(a_by_struct[s]), stddev_of(a_by_struct[s]),
                      wilcoxon_signed_rank(a_by_struct[s], b_by_struct[s])};
    StructureStats sb{b.front().structures[s], mean_of(b_by_struct[s]), stddev_of(b_by_struct[s]),
                      sa.p_value};
    report.a_stats.push_back(sa);
    report.b_stats.push_back(sb);
  }
  report.p_value = wilcoxon_signed_rank(paired_a, paired_b);
  return report;
}

}  // namespace tdaug
