#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace xmodal::harness {

/// One measurement. `fold` is -1 for stages that are not per-fold.
/// `train_set`/`test_set` label evaluation records (e.g. "SynCT-SSIM", "CT").
struct MetricsRecord {
  std::string run_id;
  std::string stage;
  int fold = -1;
  std::string case_id;
  std::string metric;
  double value = 0.0;
  long long step = 0;
  double wall_time = 0.0;  ///< seconds since the writer was opened
  std::string train_set;
  std::string test_set;
  int context = -1;  ///< segmenter context of eval/train-seg records

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

nlohmann::json to_json(const MetricsRecord& r);
MetricsRecord metrics_record_from_json(const nlohmann::json& j);

/// Append-only newline-delimited JSON; every record is flushed on write.
/// A stage owns its file, so `truncate` starts it afresh when a stage reruns.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, std::string run_id, bool truncate = false);
  ~MetricsWriter();
  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;

  /// Fills run_id and wall_time. Non-finite values raise ArgumentError.
  void write(MetricsRecord r);
  [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::string run_id_;
  std::FILE* file_ = nullptr;
  double start_ = 0.0;
};

std::vector<MetricsRecord> read_metrics_file(const std::filesystem::path& path);

/// All *.ndjson files of a directory, concatenated in file-name order.
std::vector<MetricsRecord> read_metrics_dir(const std::filesystem::path& dir);

/// Records with wall_time zeroed, for comparing two runs.
std::vector<MetricsRecord> without_wall_time(std::vector<MetricsRecord> records);

}  // namespace xmodal::harness
