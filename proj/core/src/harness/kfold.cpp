#include "xmodal/harness/kfold.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "xmodal/errors.hpp"
#include "xmodal/rng.hpp"

namespace xmodal::harness {

KFoldResult kfold_split(const std::vector<std::string>& case_ids, int k, const std::vector<int>& strata,
                        std::uint64_t seed) {
  if (k < 2) throw ArgumentError("kfold_split: k must be >= 2");
  if (static_cast<int>(case_ids.size()) < k) throw ArgumentError("kfold_split: fewer cases than folds");
  if (strata.size() != case_ids.size()) throw ArgumentError("kfold_split: strata size must match case count");
  if (std::set<std::string>(case_ids.begin(), case_ids.end()).size() != case_ids.size()) {
    throw ArgumentError("kfold_split: duplicate case id");
  }

  std::map<int, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < case_ids.size(); ++i) buckets[strata[i]].push_back(i);

  KFoldResult out;
  out.folds.resize(static_cast<std::size_t>(k));
  std::vector<int> fold_of(case_ids.size(), -1);
  int pointer = 0;
  for (auto& [stratum, members] : buckets) {
    if (static_cast<int>(members.size()) < k) {
      out.warnings.push_back("stratum " + std::to_string(stratum) + " has " + std::to_string(members.size()) +
                             " cases for " + std::to_string(k) + " folds; balance is best effort");
    }
    Rng rng(seed, 0x6b666f6c64ULL + static_cast<std::uint64_t>(stratum));
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[rng.below(i)]);
    }
    for (std::size_t idx : members) {
      fold_of[idx] = pointer;
      pointer = (pointer + 1) % k;
    }
  }

  for (int f = 0; f < k; ++f) {
    for (std::size_t i = 0; i < case_ids.size(); ++i) {
      (fold_of[i] == f ? out.folds[f].test : out.folds[f].train).push_back(case_ids[i]);
    }
  }
  return out;
}

std::vector<int> tercile_strata(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<int> out(n, 0);
  for (std::size_t r = 0; r < n; ++r) out[order[r]] = static_cast<int>((3 * r) / std::max<std::size_t>(n, 1));
  return out;
}

}  // namespace xmodal::harness
