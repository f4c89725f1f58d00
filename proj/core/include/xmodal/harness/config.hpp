#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xmodal/augment.hpp"
#include "xmodal/translator.hpp"

namespace xmodal::harness {

enum class CycleSelection { SSIM, MSE, BOTH };

/// Everything that determines a run. Serialised as `key = value` lines with
/// dotted keys (see docs/config.md for the schema).
struct ExperimentConfig {
  struct Run {
    std::string id = "run";
    std::uint64_t seed = 20240501;
  } run;

  struct Data {
    int mr_count = 24;
    int ct_count = 24;
    int ct_test_count = 10;
    int depth = 16;
    int height = 64;
    int width = 64;
    int organ_count = 5;
    double organ_radius_min = 0.09;  ///< fraction of the body half-extent
    double organ_radius_max = 0.16;
    double mr_noise = 0.02;
    double ct_noise = 12.0;  ///< HU
    double mr_fov = 0.5;
    double ct_crop = 0.5;    ///< CT is rendered at full field then centrally cropped
    double mr_norm_lo = 0.0;
    double mr_norm_hi = 1.2;
    std::uint64_t mr_seed_base = 100000;
    std::uint64_t ct_seed_base = 200000;
    std::uint64_t ct_test_seed_base = 300000;
  } data;

  struct Window {
    bool enabled = true;
    double lo = -500.0;
    double hi = 500.0;
    double full_lo = -1000.0;  ///< normalisation range when windowing is off
    double full_hi = 1000.0;
  } window;

  struct Augment {
    double crop_min = 0.5;
    double crop_max = 1.0;
    bool rotate = true;
    double max_rotate_degrees = 10.0;
    bool flip_horizontal = true;
    bool flip_vertical = false;
    bool translator = true;
    bool segmenter = true;
  } augment;

  struct Translator {
    int steps = 2000;
    int batch = 1;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int decay_start = -1;  ///< step at which linear lr decay to 0 starts; <0 = constant
    double lambda_cycle = 10.0;
    double lambda_identity = 0.0;
    CycleSelection cycle_mode = CycleSelection::SSIM;
    int ssim_window = 7;
    int gen_base = 8;
    int gen_stages = 2;
    int gen_blocks = 3;
    int disc_base = 16;
    int disc_layers = 3;
    int log_every = 50;
  } translator;

  struct Segmenter {
    int steps = 2000;
    int steps_per_epoch = 100;
    int batch = 4;
    double lr = 1e-3;
    int depth = 3;
    int base = 8;
    int context = 1;
    double threshold = 0.5;
    bool train_on_mr = true;
  } segmenter;

  struct CrossValidation {
    int folds = 6;
    int fold_limit = 0;  ///< run only the first N folds; 0 = all
  } cv;

  struct Sweep {
    std::string contexts = "0,1,2,3";
  } sweep;

  void validate() const;

  [[nodiscard]] AugmentPolicy augment_policy(std::uint64_t seed) const;
  [[nodiscard]] GeneratorConfig generator_config() const;
  [[nodiscard]] DiscriminatorConfig discriminator_config() const;
  [[nodiscard]] CycleLossWeights cycle_weights(CycleMode mode) const;
  [[nodiscard]] std::vector<CycleMode> cycle_modes() const;
  [[nodiscard]] std::vector<int> sweep_contexts() const;
  [[nodiscard]] int folds_to_run() const;
};

/// Parse the text format. Unknown keys, duplicate keys, and values that do
/// not parse as the key's type raise ConfigError naming the line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text with every key; parse_config(to_text(c)) reproduces c.
std::string to_text(const ExperimentConfig& c);

/// (key, type-name, default rendered as text) for documentation and --help.
struct ConfigKeyInfo {
  std::string key;
  std::string type;
  std::string default_value;
};
std::vector<ConfigKeyInfo> config_schema();

std::string to_string(CycleSelection s);

}  // namespace xmodal::harness
