#include "xmodal/harness/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "xmodal/errors.hpp"

namespace xmodal::harness {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

nlohmann::json to_json(const MetricsRecord& r) {
  return {{"run_id", r.run_id}, {"stage", r.stage},         {"fold", r.fold},
          {"case_id", r.case_id}, {"metric", r.metric},     {"value", r.value},
          {"step", r.step},       {"wall_time", r.wall_time}, {"train_set", r.train_set},
          {"test_set", r.test_set}, {"context", r.context}};
}

MetricsRecord metrics_record_from_json(const nlohmann::json& j) {
  MetricsRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.stage = j.at("stage").get<std::string>();
  r.fold = j.at("fold").get<int>();
  r.case_id = j.at("case_id").get<std::string>();
  r.metric = j.at("metric").get<std::string>();
  r.value = j.at("value").get<double>();
  r.step = j.at("step").get<long long>();
  r.wall_time = j.at("wall_time").get<double>();
  r.train_set = j.value("train_set", "");
  r.test_set = j.value("test_set", "");
  r.context = j.value("context", -1);
  return r;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, std::string run_id, bool truncate)
    : path_(path), run_id_(std::move(run_id)), start_(now_seconds()) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  file_ = std::fopen(path.c_str(), truncate ? "wb" : "ab");
  if (file_ == nullptr) throw std::runtime_error("cannot open metrics file " + path.string());
}

MetricsWriter::~MetricsWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

void MetricsWriter::write(MetricsRecord r) {
  if (!std::isfinite(r.value)) throw ArgumentError("metrics value for " + r.metric + " is not finite");
  r.run_id = run_id_;
  r.wall_time = now_seconds() - start_;
  // Full round-trip precision so the report can be regenerated exactly.
  const std::string line = to_json(r).dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
    throw std::runtime_error("failed writing metrics file " + path_.string());
  }
}

std::vector<MetricsRecord> read_metrics_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file " + path.string());
  std::vector<MetricsRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(metrics_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      // A crash can leave a torn final line; anything earlier is corruption.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<MetricsRecord> read_metrics_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(dir)) {
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".ndjson") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<MetricsRecord> out;
  for (const auto& f : files) {
    auto part = read_metrics_file(f);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<MetricsRecord> without_wall_time(std::vector<MetricsRecord> records) {
  for (auto& r : records) r.wall_time = 0.0;
  return records;
}

}  // namespace xmodal::harness
