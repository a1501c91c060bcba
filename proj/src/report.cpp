#include "tdaug/eval/report.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace tdaug {

namespace {
using json = nlohmann::json;
}

std::string report_to_json(const std::vector<RunResult>& runs,
                           const std::vector<ComparisonReport>& comparisons) {
  if (runs.empty()) throw std::invalid_argument("report: no runs");
  json j;
  j["policy"] = runs.front().policy;
  j["n_runs"] = runs.size();

  const std::size_t n_struct = runs.front().structures.size();
  json structures = json::array();
  for (std::size_t s = 0; s < n_struct; ++s) {
    std::vector<double> values;
    json per_subject = json::object();
    for (const auto& run : runs)
      for (const auto& [subject, dsc] : run.dsc) {
        values.push_back(dsc[s]);
        per_subject[subject].push_back(dsc[s]);
      }
    structures.push_back({{"name", runs.front().structures[s]},
                          {"mean", mean_of(values)},
                          {"std", stddev_of(values)},
                          {"per_subject", per_subject}});
  }
  j["structures"] = structures;

  json comps = json::array();
  for (const auto& c : comparisons) {
    json per_structure = json::array();
    for (std::size_t s = 0; s < c.a_stats.size(); ++s)
      per_structure.push_back({{"name", c.a_stats[s].name},
                               {"p_value", c.a_stats[s].p_value},
                               {"mean", c.a_stats[s].mean},
                               {"baseline_mean", c.b_stats[s].mean}});
    comps.push_back(
        {{"baseline", c.policy_b}, {"p_value", c.p_value}, {"per_structure", per_structure}});
  }
  j["comparisons"] = comps;
  return j.dump(2);
}

void save_report(const std::vector<RunResult>& runs,
                 const std::vector<ComparisonReport>& comparisons, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << report_to_json(runs, comparisons) << "\n";
}

void save_results_csv(const std::vector<RunResult>& runs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write results csv: " + path);
  out << "policy,replicate,restart,subject,structure,dsc\n";
  for (const auto& run : runs)
    for (const auto& [subject, dsc] : run.dsc)
      for (std::size_t s = 0; s < run.structures.size(); ++s)
        out << run.policy << ',' << run.replicate << ',' << run.restart << ',' << subject << ','
            << run.structures[s] << ',' << dsc[s] << '\n';
}

std::string runs_to_json(const std::vector<RunResult>& runs) {
  json arr = json::array();
  for (const auto& run : runs) {
    json r;
    r["policy"] = run.policy;
    r["config_hash"] = run.config_hash;
    r["replicate"] = run.replicate;
    r["restart"] = run.restart;
    r["structures"] = run.structures;
    r["dsc"] = run.dsc;
    arr.push_back(r);
  }
  return arr.dump(2);
}

std::vector<RunResult> runs_from_json(const std::string& text) {
  const json arr = json::parse(text);
  std::vector<RunResult> out;
  for (const auto& r : arr) {
    RunResult run;
    run.policy = r.value("policy", "");
    run.config_hash = r.value("config_hash", "");
    run.replicate = r.value("replicate", 0);
    run.restart = r.value("restart", 0);
    run.structures = r.at("structures").get<std::vector<std::string>>();
    run.dsc = r.at("dsc").get<std::map<std::string, std::vector<double>>>();
    out.push_back(std::move(run));
  }
  return out;
}

void save_runs(const std::vector<RunResult>& runs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write runs: " + path);
  out << runs_to_json(runs) << "\n";
}

std::vector<RunResult> load_runs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open runs: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return runs_from_json(ss.str());
}

}  // namespace tdaug
