#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xmodal/checkpoint.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/nn/layers.hpp"
#include "xmodal/volume.hpp"

namespace xmodal {

struct GeneratorConfig {
  int base_channels = 8;
  int downsample_stages = 2;
  int residual_blocks = 3;
  /// Weight of the network output in the result (lerp from the input).
  /// 0 turns the generator into the identity map.
  double output_mix = 1.0;

  void validate() const;
  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

struct DiscriminatorConfig {
  int base_channels = 16;
  int layers = 3;  ///< stride-2 stages before the 1-channel score head

  void validate() const;
  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

enum class CycleMode { SSIM, MSE };

struct CycleLossWeights {
  double lambda_cycle = 10.0;
  CycleMode cycle_mode = CycleMode::SSIM;
  /// Identity-mapping term weight (off by default).
  double lambda_identity = 0.0;
  SsimConfig ssim = SsimConfig::for_range(2.0);
};

/// Encoder (stride-2 convs) -> residual blocks -> nearest-upsample decoder ->
/// tanh head; maps [N, 1, H, W] onto [N, 1, H, W] in [-1, 1].
class Generator {
 public:
  Generator() = default;
  Generator(const GeneratorConfig& cfg, Rng& rng);

  [[nodiscard]] nn::Tensor forward(const nn::Tensor& x) const;
  [[nodiscard]] nn::ParameterList parameters() const;
  [[nodiscard]] const GeneratorConfig& config() const noexcept { return cfg_; }
  void set_output_mix(double mix) noexcept { cfg_.output_mix = mix; }
  /// Required divisor of H and W.
  [[nodiscard]] int stride() const noexcept { return 1 << cfg_.downsample_stages; }

 private:
  GeneratorConfig cfg_{};
  nn::Conv2d stem_;
  std::vector<nn::Conv2d> down_;
  std::vector<nn::ResidualBlock> blocks_;
  std::vector<nn::Conv2d> up_;
  nn::Conv2d head_;
};

/// Patch discriminator producing a map of unbounded real/fake scores.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const DiscriminatorConfig& cfg, Rng& rng);

  [[nodiscard]] nn::Tensor forward(const nn::Tensor& x) const;
  [[nodiscard]] nn::ParameterList parameters() const;
  [[nodiscard]] const DiscriminatorConfig& config() const noexcept { return cfg_; }

 private:
  DiscriminatorConfig cfg_{};
  std::vector<nn::Conv2d> convs_;
  nn::Conv2d head_;
};

struct TranslatorOptimizer {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
};

/// Both generators, both discriminators, their optimizers, step counter and
/// the driver's random stream.
struct TranslatorState {
  GeneratorConfig gen_cfg;
  DiscriminatorConfig disc_cfg;
  TranslatorOptimizer opt_cfg;
  std::uint64_t seed = 0;
  Generator gen_mr_to_ct;
  Generator gen_ct_to_mr;
  Discriminator disc_ct;
  Discriminator disc_mr;
  nn::Adam gen_opt;
  nn::Adam disc_opt;
  std::uint64_t step = 0;
  Rng rng{0};

  [[nodiscard]] nn::ParameterList generator_parameters() const;
  [[nodiscard]] nn::ParameterList discriminator_parameters() const;
  [[nodiscard]] nlohmann::json config_json() const;
};

/// Deterministic initialisation from `seed`.
TranslatorState build_translator(const GeneratorConfig& gcfg, const DiscriminatorConfig& dcfg, std::uint64_t seed,
                                 const TranslatorOptimizer& opt = {});

struct StepReport {
  std::uint64_t step = 0;
  double disc_ct = 0;
  double disc_mr = 0;
  double gen_adv_ct = 0;  ///< LSGAN generator term of G_CT(MR)
  double gen_adv_mr = 0;
  double cycle_mr = 0;    ///< cycle(mr, G_MR(G_CT(mr)))
  double cycle_ct = 0;    ///< cycle(ct, G_CT(G_MR(ct)))
  double identity = 0;
  double gen_total = 0;
};

/// One discriminator update followed by one generator update. Batches are
/// [N, 1, H, W] tensors of normalised slices.
StepReport cycle_train_step(TranslatorState& state, const nn::Tensor& batch_mr, const nn::Tensor& batch_ct,
                            const CycleLossWeights& weights);

/// Cycle term used by the step, averaged over the batch: (loss, grad wrt recon).
LossGrad cycle_loss(std::span<const float> reconstruction, std::span<const float> original, const nn::Shape& shape,
                    const CycleLossWeights& weights);

/// Apply gen_mr_to_ct slice by slice. Output is SYNCT/NORMALIZED; the mask is
/// returned unchanged (labels transfer by construction).
std::pair<Volume, MaskVolume> synthesize_volume(const TranslatorState& state, const Volume& mr, const MaskVolume& mask);

/// Apply gen_ct_to_mr slice by slice; output is MR/NORMALIZED.
Volume reconstruct_volume(const TranslatorState& state, const Volume& synct);

/// Run a generator over every slice of a normalised volume.
Volume translate_slices(const Generator& gen, const Volume& v, Modality out_modality);

nn::Tensor slices_to_tensor(const std::vector<Image2D<float>>& slices);

Checkpoint translator_checkpoint(TranslatorState& state);
void save_translator(TranslatorState& state, const std::filesystem::path& path);
/// Loads and verifies that the stored configs equal `expected` (when given).
TranslatorState load_translator(const std::filesystem::path& path, const nlohmann::json* expected = nullptr);
TranslatorState translator_from_checkpoint(const Checkpoint& ck, const nlohmann::json* expected = nullptr);

nlohmann::json to_json(const GeneratorConfig& c);
nlohmann::json to_json(const DiscriminatorConfig& c);
std::string to_string(CycleMode m);

}  // namespace xmodal
