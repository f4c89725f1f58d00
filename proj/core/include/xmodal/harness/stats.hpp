#pragma once

#include <span>

namespace xmodal::harness {

// Two-sided Wilcoxon signed-rank p-value for paired samples (n >= 5).
// Zero differences are dropped; tied magnitudes get averaged ranks. Exact null
// distribution for up to 20 nonzero pairs, normal approximation with tie and
// continuity correction above. p = min(1, 2 * min(P[W+ <= w], P[W+ >= w])).
double significance_test(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> v);
// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_std(std::span<const double> v);

}  // namespace xmodal::harness
