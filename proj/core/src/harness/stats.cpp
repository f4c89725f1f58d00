#include "xmodal/harness/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "xmodal/errors.hpp"

namespace xmodal::harness {

namespace {

constexpr std::size_t kExactLimit = 20;

// Doubled average ranks of |d| so tied ranks stay integral.
std::vector<int> doubled_ranks(const std::vector<double>& mags) {
  const std::size_t n = mags.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return mags[x] < mags[y]; });
  std::vector<int> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && mags[order[j + 1]] == mags[order[i]]) ++j;
    const int doubled = static_cast<int>(i + 1 + j + 1);  // 2 * mean of ranks i+1..j+1
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = doubled;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double significance_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("significance_test: samples must have equal length");
  if (a.size() < 5) throw ArgumentError("significance_test: need at least 5 pairs");

  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (!std::isfinite(d)) throw ArgumentError("significance_test: non-finite value");
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) return 1.0;

  std::vector<double> mags(diffs.size());
  std::transform(diffs.begin(), diffs.end(), mags.begin(), [](double d) { return std::abs(d); });
  const std::vector<int> ranks = doubled_ranks(mags);
  const std::size_t n = diffs.size();

  int w_plus = 0;
  int total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += ranks[i];
    if (diffs[i] > 0) w_plus += ranks[i];
  }

  if (n <= kExactLimit) {
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    int reach = 0;
    for (int r : ranks) {
      for (int s = reach; s >= 0; --s) count[s + r] += count[s];
      reach += r;
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    double lower = 0.0;
    double upper = 0.0;
    for (int s = 0; s <= total; ++s) {
      if (s <= w_plus) lower += count[s];
      if (s >= w_plus) upper += count[s];
    }
    return std::min(1.0, 2.0 * std::min(lower, upper) / all);
  }

  const double nn = static_cast<double>(n);
  const double mu = nn * (nn + 1.0) / 4.0;
  double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
  std::vector<int> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    var -= (t * t * t - t) / 48.0;
    i = j;
  }
  if (var <= 0.0) return 1.0;
  const double w = w_plus / 2.0;
  const double z = std::max(0.0, std::abs(w - mu) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace xmodal::harness
