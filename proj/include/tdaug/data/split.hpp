#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tdaug {

struct SubjectRecord {
  std::string subject_id;
  std::string group;  // empty for ungrouped datasets
};

struct SplitCounts {
  int n_unlabeled = 25;
  int n_test = 20;
  int n_val = 2;
};

// Disjoint subject assignment, fixed a priori by one seed. The labeled pool
// is everything left after the other three sets are drawn.
struct DatasetSplit {
  std::vector<std::string> labeled_pool;
  std::vector<std::string> unlabeled;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::map<std::string, std::string> groups;  // subject -> group, if grouped
  SplitCounts counts;
  std::uint64_t seed = 0;
};

// Deterministic split; for grouped subject lists each set draws per-group
// quotas as evenly as the count allows (remainders round-robin over a
// seed-shuffled group order). Throws when there are too few subjects.
DatasetSplit build_split(const std::vector<SubjectRecord>& subjects, const SplitCounts& counts,
                         std::uint64_t seed);

// One of the five pre-committed labeled draws; replicate seeds derive from the
// split seed. For grouped data with n_labeled == 1, replicate r draws from
// sub-group (r mod group count), so the five draws cover five groups.
std::vector<std::string> sample_labeled_subset(const DatasetSplit& split, int n_labeled,
                                               int replicate);

// JSON manifest round-trip (subject ids per set, seed, counts).
std::string split_to_json(const DatasetSplit& split);
DatasetSplit split_from_json(const std::string& text);
void save_split(const DatasetSplit& split, const std::string& path);
DatasetSplit load_split(const std::string& path);

// Dataset manifest: subject_id -> {image_path, label_path, group}.
struct ManifestEntry {
  std::string subject_id;
  std::string image_path;
  std::string label_path;
  std::string group;
};

std::vector<ManifestEntry> load_manifest(const std::string& path);
void save_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);

}  // namespace tdaug
