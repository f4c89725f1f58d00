// xmodal: command line driver for the MR-to-CT synthesis and segmentation workflow.
//
// Every subcommand works on one run directory given by --out. Exit codes:
// 0 success, 2 configuration error, 3 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "xmodal/errors.hpp"
#include "xmodal/harness/config.hpp"
#include "xmodal/harness/pipeline.hpp"
#include "xmodal/harness/report.hpp"

namespace fs = std::filesystem;
using namespace xmodal;
using namespace xmodal::harness;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "experiment config file (key = value)");
  cmd->add_option("--seed", c.seed, "override run.seed");
  cmd->add_option("--out", c.out, "run directory")->required();
}

// --config wins; otherwise resume from the run directory's resolved config.
ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config_path.empty()) {
    cfg = load_config(c.config_path);
  } else if (fs::exists(fs::path(c.out) / "config.resolved")) {
    cfg = load_config(fs::path(c.out) / "config.resolved");
  }
  if (c.seed) cfg.run.seed = *c.seed;
  cfg.validate();
  return cfg;
}

std::vector<CycleMode> modes_for(const ExperimentConfig& cfg, const std::string& mode) {
  if (mode.empty()) return cfg.cycle_modes();
  if (mode == "ssim") return {CycleMode::SSIM};
  if (mode == "mse") return {CycleMode::MSE};
  throw ConfigError("--mode must be ssim or mse");
}

// Runs one stage under the directory lock, recording failures in error.json.
template <typename Fn>
void staged(const fs::path& out, const std::string& stage, Fn&& fn) {
  RunLock lock(out);
  try {
    fn();
  } catch (const std::exception& e) {
    write_error_record(out, stage, e);
    throw;
  }
}

void print_report(const Report& r) {
  std::cout << summary_tsv(r);
  if (!r.comparisons.empty()) std::cout << "\n" << comparisons_tsv(r);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MR-to-CT synthesis and 2.5D segmentation experiments"};
  app.require_subcommand(1);

  Common common;
  std::string mode;
  std::string arm;
  std::optional<int> fold;
  std::optional<int> context;
  std::string contexts;

  auto* phantom = app.add_subcommand("phantom", "generate the MR, CT and held-out CT phantom pools");
  auto* translate = app.add_subcommand("train-translate", "train the MR<->CT translator (stage 1)");
  auto* synth = app.add_subcommand("synthesize", "translate every MR phantom to SynCT, carrying its mask");
  auto* train_seg = app.add_subcommand("train-seg", "train segmenters per arm and fold");
  auto* eval = app.add_subcommand("eval", "evaluate trained segmenters");
  auto* pipeline = app.add_subcommand("pipeline", "run every stage and write the report");
  auto* sweep = app.add_subcommand("sweep-context", "pipeline with one segmenter per context");
  auto* report = app.add_subcommand("report", "rebuild report/ from metrics/");
  for (auto* cmd : {phantom, translate, synth, train_seg, eval, pipeline, sweep, report}) add_common(cmd, common);
  for (auto* cmd : {translate, synth}) cmd->add_option("--mode", mode, "ssim or mse (default: from config)");
  for (auto* cmd : {train_seg, eval}) {
    cmd->add_option("--arm", arm, "MR, SynCT-SSIM or SynCT-MSE (default: all)");
    cmd->add_option("--fold", fold, "fold index (default: all configured folds)");
    cmd->add_option("--context", context, "slice context (default: segmenter.context)");
  }
  sweep->add_option("--contexts", contexts, "comma separated contexts (default: sweep.contexts)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    const fs::path out = common.out;
    if (report->parsed()) {
      print_report(emit_report(out));
      return 0;
    }
    ExperimentConfig cfg = resolve(common);

    if (pipeline->parsed()) {
      print_report(run_pipeline(cfg, out));
    } else if (sweep->parsed()) {
      if (!contexts.empty()) cfg.sweep.contexts = contexts;
      print_report(context_sweep(cfg, cfg.sweep_contexts(), out));
    } else if (phantom->parsed()) {
      staged(out, "phantom", [&] {
        write_resolved_config(cfg, out);
        std::cout << stage_phantoms(cfg, out) << " volumes written to " << (out / "data").string() << "\n";
      });
    } else if (translate->parsed()) {
      staged(out, "train-translate", [&] {
        write_resolved_config(cfg, out);
        for (CycleMode m : modes_for(cfg, mode)) {
          const bool hit = stage_translate(cfg, out, m);
          std::cout << to_string(m) << " translator " << (hit ? "reused from cache" : "trained") << "\n";
        }
      });
    } else if (synth->parsed()) {
      staged(out, "synthesize", [&] {
        for (CycleMode m : modes_for(cfg, mode)) stage_synthesize(cfg, out, m);
      });
    } else if (train_seg->parsed() || eval->parsed()) {
      const bool training = train_seg->parsed();
      staged(out, training ? "train-seg" : "eval", [&] {
        const auto arms = arm.empty() ? segmenter_arms(cfg) : std::vector<std::string>{arm};
        const int first = fold.value_or(0);
        const int last = fold ? *fold + 1 : cfg.folds_to_run();
        for (int f = first; f < last; ++f) {
          for (const auto& a : arms) {
            if (training) {
              stage_train_seg(cfg, out, a, f, context.value_or(-1));
            } else {
              stage_eval(cfg, out, a, f, context.value_or(-1));
            }
          }
        }
      });
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
