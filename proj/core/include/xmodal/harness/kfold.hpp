#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace xmodal::harness {

struct Fold {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

struct KFoldResult {
  std::vector<Fold> folds;
  std::vector<std::string> warnings;
};

// Stratified split. strata[i] is the bucket of case_ids[i]. Each stratum is
// shuffled by seed and dealt round-robin; the fold pointer carries over between
// strata so fold sizes differ by at most one.
KFoldResult kfold_split(const std::vector<std::string>& case_ids, int k, const std::vector<int>& strata,
                        std::uint64_t seed);

// Bucket index 0, 1, 2 by rank tercile of value (ties broken by position).
std::vector<int> tercile_strata(const std::vector<double>& values);

}  // namespace xmodal::harness
