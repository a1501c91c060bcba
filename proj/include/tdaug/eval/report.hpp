#pragma once

#include <string>
#include <vector>

#include "tdaug/eval/stats.hpp"

namespace tdaug {

// report.json: {policy, structures: [{name, mean, std, per_subject}],
//               comparisons: [{baseline, p_value, per_structure}]}
std::string report_to_json(const std::vector<RunResult>& runs,
                           const std::vector<ComparisonReport>& comparisons);
void save_report(const std::vector<RunResult>& runs,
                 const std::vector<ComparisonReport>& comparisons, const std::string& path);

// Per-run rows, one line per (replicate, restart, subject, structure).
void save_results_csv(const std::vector<RunResult>& runs, const std::string& path);

std::string runs_to_json(const std::vector<RunResult>& runs);
std::vector<RunResult> runs_from_json(const std::string& text);
void save_runs(const std::vector<RunResult>& runs, const std::string& path);
std::vector<RunResult> load_runs(const std::string& path);

}  // namespace tdaug
