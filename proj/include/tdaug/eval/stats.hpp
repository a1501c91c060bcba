#pragma once

#include <map>
#include <string>
#include <vector>

namespace tdaug {

// One pipeline run: per-(subject, structure) test Dice for a policy.
struct RunResult {
  std::string policy;
  std::string config_hash;
  int replicate = 0;
  int restart = 0;
  std::vector<std::string> structures;
  // dsc[subject_id][structure_index]
  std::map<std::string, std::vector<double>> dsc;

  double mean_dsc() const;
};

enum class Alternative { TwoSided, Greater, Less };

// Paired Wilcoxon signed-rank test. Zero differences are discarded, tied
// magnitudes get averaged ranks. Exact null distribution for n <= 30 (via the
// doubled-rank convolution), normal approximation with tie and continuity
// corrections above. Returns p = 1.0 when every difference is zero.
double wilcoxon_signed_rank(const std::vector<double>& xs, const std::vector<double>& ys,
                            Alternative alt = Alternative::TwoSided);

struct StructureStats {
  std::string name;
  double mean = 0.0;
  double stddev = 0.0;
  double p_value = 1.0;  // paired test vs the baseline, this structure only
};

struct ComparisonReport {
  std::string policy_a, policy_b;
  std::vector<StructureStats> a_stats, b_stats;
  double p_value = 1.0;  // paired over all matched (subject, structure, run) tuples
};

// Pairs runs by (replicate, restart) and subjects/structures within; throws
// if the two run sets do not match up. `per_subject_mean` collapses each
// run's subjects first and pairs per run instead.
ComparisonReport compare_policies(const std::vector<RunResult>& a,
                                  const std::vector<RunResult>& b,
                                  bool per_subject_mean = false);

double mean_of(const std::vector<double>& xs);
double stddev_of(const std::vector<double>& xs);

}  // namespace tdaug
