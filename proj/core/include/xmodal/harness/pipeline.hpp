#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "xmodal/harness/config.hpp"
#include "xmodal/harness/kfold.hpp"
#include "xmodal/harness/report.hpp"
#include "xmodal/volume.hpp"

namespace xmodal::harness {

// Run directory layout (all under the --out directory):
//   config.resolved            canonical config text
//   .lock                      held while a process owns the directory
//   error.json                 written when a stage fails
//   data/{mr,ct,ct_test}/      raw phantoms (MV01) and prostate masks
//   data/synct_<mode>/         SynCT volumes with the carried-over MR masks
//   data/folds.json            stratified split of the MR cases
//   checkpoints/               translator_<mode>.xmck, seg_<arm>_ctx<c>_fold<f>.xmck
//   metrics/                   one NDJSON file per stage and fold
//   report/                    summary.tsv, comparisons.tsv, boxplot_dice.svg

/// Exclusive ownership of a run directory; throws std::runtime_error if held.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct Case {
  std::string id;
  Volume volume;  ///< normalised network input
  MaskVolume mask;
};

/// Translator training arm: "SynCT-SSIM" or "SynCT-MSE".
std::string synct_arm(CycleMode mode);

void write_resolved_config(const ExperimentConfig& cfg, const std::filesystem::path& run_dir);

/// Phantom pools; returns the number of volumes written.
int stage_phantoms(const ExperimentConfig& cfg, const std::filesystem::path& run_dir);

/// Loads a pool ("mr", "ct", "ct_test" or "synct_<mode>") normalised for the networks.
std::vector<Case> load_pool(const ExperimentConfig& cfg, const std::filesystem::path& run_dir, const std::string& pool);

/// Train (or reuse) the translator for one cycle mode. Returns true on a cache hit,
/// i.e. an existing checkpoint built from an identical stage-1 configuration.
bool stage_translate(const ExperimentConfig& cfg, const std::filesystem::path& run_dir, CycleMode mode);

void stage_synthesize(const ExperimentConfig& cfg, const std::filesystem::path& run_dir, CycleMode mode);

KFoldResult stage_split(const ExperimentConfig& cfg, const std::filesystem::path& run_dir);

/// Arms are "MR" or a synct_arm(); context < 0 uses the configured context.
void stage_train_seg(const ExperimentConfig& cfg, const std::filesystem::path& run_dir, const std::string& arm,
                     int fold, int context = -1);
void stage_eval(const ExperimentConfig& cfg, const std::filesystem::path& run_dir, const std::string& arm, int fold,
                int context = -1);

/// Segmenter arms implied by the config, in report order.
std::vector<std::string> segmenter_arms(const ExperimentConfig& cfg);

/// All three stages plus the report. Failures write error.json and rethrow.
Report run_pipeline(const ExperimentConfig& cfg, const std::filesystem::path& run_dir);

/// One segmenter per context on identical folds and seeds, sharing stage 1.
Report context_sweep(const ExperimentConfig& cfg, const std::vector<int>& contexts,
                     const std::filesystem::path& run_dir);

/// Machine-readable failure record.
void write_error_record(const std::filesystem::path& run_dir, const std::string& stage, const std::exception& e);

}  // namespace xmodal::harness
