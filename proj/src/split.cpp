#include "tdaug/data/split.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <stdexcept>

#include "tdaug/core/random.hpp"

namespace tdaug {

namespace {
using json = nlohmann::json;

void shuffle_ids(std::vector<std::string>& ids, RandomStream& rng) {
  for (int i = static_cast<int>(ids.size()) - 1; i > 0; --i)
    std::swap(ids[i], ids[rng.uniform_int(0, i)]);
}

std::vector<std::string> take(std::vector<std::string>& pool, int n) {
  std::vector<std::string> out(pool.begin(), pool.begin() + n);
  pool.erase(pool.begin(), pool.begin() + n);
  return out;
}

}  // namespace

DatasetSplit build_split(const std::vector<SubjectRecord>& subjects, const SplitCounts& counts,
                         std::uint64_t seed) {
  if (counts.n_unlabeled < 0 || counts.n_test < 0 || counts.n_val < 0)
    throw std::invalid_argument("build_split: negative counts");
  const int need = counts.n_unlabeled + counts.n_test + counts.n_val + 1;
  if (static_cast<int>(subjects.size()) < need) {
    std::ostringstream msg;
    msg << "insufficient volumes: need at least " << need << " (counts + 1 labeled), have "
        << subjects.size();
    throw std::invalid_argument(msg.str());
  }
  {
    std::set<std::string> ids;
    for (const auto& s : subjects)
      if (!ids.insert(s.subject_id).second)
        throw std::invalid_argument("build_split: duplicate subject_id " + s.subject_id);
  }

  DatasetSplit split;
  split.counts = counts;
  split.seed = seed;

  std::map<std::string, std::vector<std::string>> by_group;
  for (const auto& s : subjects) {
    by_group[s.group].push_back(s.subject_id);
    if (!s.group.empty()) split.groups[s.subject_id] = s.group;
  }

  RandomStream rng(derive_seed(seed, 0x5f17));
  std::vector<std::string> group_order;
  for (auto& [g, ids] : by_group) group_order.push_back(g);
  std::sort(group_order.begin(), group_order.end());
  shuffle_ids(group_order, rng);
  for (auto& g : group_order) shuffle_ids(by_group[g], rng);

  const int n_groups = static_cast<int>(by_group.size());
  const auto draw_set = [&](int count) {
    std::vector<std::string> out;
    // per-group quota, remainder spread over the shuffled group order
    const int quota = count / n_groups;
    int remainder = count % n_groups;
    for (const auto& g : group_order) {
      int want = quota + (remainder > 0 ? 1 : 0);
      if (remainder > 0) --remainder;
      auto& pool = by_group[g];
      if (static_cast<int>(pool.size()) < want)
        throw std::invalid_argument("insufficient volumes in sub-group '" + g + "': need " +
                                    std::to_string(want) + ", have " +
                                    std::to_string(pool.size()));
      auto part = take(pool, want);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  };

  split.unlabeled = draw_set(counts.n_unlabeled);
  split.test = draw_set(counts.n_test);
  split.validation = draw_set(counts.n_val);
  for (const auto& g : group_order) {
    auto& pool = by_group[g];
    split.labeled_pool.insert(split.labeled_pool.end(), pool.begin(), pool.end());
  }
  if (split.labeled_pool.empty())
    throw std::invalid_argument("insufficient volumes: labeled pool is empty");
  return split;
}

std::vector<std::string> sample_labeled_subset(const DatasetSplit& split, int n_labeled,
                                               int replicate) {
  if (replicate < 0 || replicate > 4)
    throw std::invalid_argument("sample_labeled_subset: replicate must be in [0,4]");
  if (n_labeled < 1 || n_labeled > static_cast<int>(split.labeled_pool.size()))
    throw std::invalid_argument("sample_labeled_subset: n_labeled out of range (pool size " +
                                std::to_string(split.labeled_pool.size()) + ")");

  RandomStream rng(derive_seed(split.seed, 0x600d + static_cast<std::uint64_t>(replicate)));

  if (!split.groups.empty() && n_labeled == 1) {
    std::vector<std::string> group_names;
    {
      std::set<std::string> seen;
      for (const auto& id : split.labeled_pool) {
        auto it = split.groups.find(id);
        const std::string g = it == split.groups.end() ? "" : it->second;
        if (seen.insert(g).second) group_names.push_back(g);
      }
      std::sort(group_names.begin(), group_names.end());
    }
    const std::string& target = group_names[replicate % group_names.size()];
    std::vector<std::string> members;
    for (const auto& id : split.labeled_pool) {
      auto it = split.groups.find(id);
      if ((it == split.groups.end() ? "" : it->second) == target) members.push_back(id);
    }
    return {members[rng.uniform_int(0, static_cast<int>(members.size()) - 1)]};
  }

  std::vector<std::string> pool = split.labeled_pool;
  shuffle_ids(pool, rng);
  pool.resize(n_labeled);
  return pool;
}

std::string split_to_json(const DatasetSplit& split) {
  json j;
  j["seed"] = split.seed;
  j["counts"] = {{"n_unlabeled", split.counts.n_unlabeled},
                 {"n_test", split.counts.n_test},
                 {"n_val", split.counts.n_val}};
  j["labeled_pool"] = split.labeled_pool;
  j["unlabeled"] = split.unlabeled;
  j["validation"] = split.validation;
  j["test"] = split.test;
  j["groups"] = split.groups;
  return j.dump(2);
}

DatasetSplit split_from_json(const std::string& text) {
  const json j = json::parse(text);
  DatasetSplit split;
  split.seed = j.at("seed").get<std::uint64_t>();
  split.counts.n_unlabeled = j.at("counts").at("n_unlabeled").get<int>();
  split.counts.n_test = j.at("counts").at("n_test").get<int>();
  split.counts.n_val = j.at("counts").at("n_val").get<int>();
  split.labeled_pool = j.at("labeled_pool").get<std::vector<std::string>>();
  split.unlabeled = j.at("unlabeled").get<std::vector<std::string>>();
  split.validation = j.at("validation").get<std::vector<std::string>>();
  split.test = j.at("test").get<std::vector<std::string>>();
  if (j.contains("groups")) split.groups = j.at("groups").get<std::map<std::string, std::string>>();
  return split;
}

void save_split(const DatasetSplit& split, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write split manifest: " + path);
  out << split_to_json(split) << "\n";
}

DatasetSplit load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open split manifest: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return split_from_json(ss.str());
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  json j;
  in >> j;
  std::vector<ManifestEntry> out;
  for (const auto& e : j.at("subjects")) {
    ManifestEntry m;
    m.subject_id = e.at("subject_id").get<std::string>();
    m.image_path = e.at("image_path").get<std::string>();
    if (e.contains("label_path")) m.label_path = e.at("label_path").get<std::string>();
    if (e.contains("group")) m.group = e.at("group").get<std::string>();
    out.push_back(std::move(m));
  }
  return out;
}

void save_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  json subjects = json::array();
  for (const auto& e : entries) {
    json je = {{"subject_id", e.subject_id}, {"image_path", e.image_path}};
    if (!e.label_path.empty()) je["label_path"] = e.label_path;
    if (!e.group.empty()) je["group"] = e.group;
    subjects.push_back(je);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << json{{"subjects", subjects}}.dump(2) << "\n";
}

}  // namespace tdaug
