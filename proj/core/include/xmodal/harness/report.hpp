#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xmodal/harness/metrics.hpp"

namespace xmodal::harness {

/// Dice scores of one (training set, testing set, context) pairing.
struct GroupSummary {
  std::string train_set;
  std::string test_set;
  int context = -1;
  std::vector<std::string> keys;  ///< "fold/case" per value, for pairing
  std::vector<double> values;
  double mean = 0.0;
  double std = 0.0;
  bool single_case = false;
};

struct Comparison {
  std::string group_a;
  std::string group_b;
  std::size_t pairs = 0;
  std::optional<double> p_value;  ///< empty when fewer than 5 pairs
};

struct Report {
  std::vector<GroupSummary> groups;
  std::vector<Comparison> comparisons;
};

std::string group_label(const GroupSummary& g);

/// Pure function of the metrics stream. Groups keep first-appearance order.
Report summarize(const std::vector<MetricsRecord>& records);

/// Writes report/summary.tsv, report/comparisons.tsv and report/boxplot_dice.svg
/// under run_dir from run_dir/metrics. Missing stages raise ReportError.
Report emit_report(const std::filesystem::path& run_dir);

std::string summary_tsv(const Report& r);
std::string comparisons_tsv(const Report& r);
std::string boxplot_svg(const Report& r, const std::string& metric);

}  // namespace xmodal::harness
