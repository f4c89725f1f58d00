#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xmodal/augment.hpp"
#include "xmodal/checkpoint.hpp"
#include "xmodal/nn/layers.hpp"
#include "xmodal/volume.hpp"

namespace xmodal {

/// Number of neighbouring slices on each side of the central slice.
struct ContextConfig {
  int context = 1;
  [[nodiscard]] int channels() const noexcept { return 1 + 2 * context; }
};

/// Central slice plus `context` neighbours on each side, ordered
/// [-context, ..., 0, ..., +context]. Out-of-volume neighbours replicate the
/// nearest edge slice.
ChannelStack assemble_stack(const Volume& v, int slice_index, int context);

struct ResUNetConfig {
  int depth = 3;          ///< number of 2x down-sampling levels
  int base_channels = 8;
  int in_channels = 3;
  int out_channels = 1;

  void validate() const;
  [[nodiscard]] int divisor() const noexcept { return 1 << depth; }
  friend bool operator==(const ResUNetConfig&, const ResUNetConfig&) = default;
};

nlohmann::json to_json(const ResUNetConfig& c);

/// U-Net with concatenating long skips; every level's conv pair is a
/// residual block. Outputs per-pixel probabilities via a sigmoid head.
class ResUNet {
 public:
  ResUNet() = default;
  ResUNet(const ResUNetConfig& cfg, std::uint64_t seed);

  [[nodiscard]] nn::Tensor forward(const nn::Tensor& x) const;
  /// Pre-sigmoid head output; training uses this to keep gradients alive
  /// where the float sigmoid rounds to 0 or 1.
  [[nodiscard]] nn::Tensor logits(const nn::Tensor& x) const;
  [[nodiscard]] nn::ParameterList parameters() const;
  [[nodiscard]] const ResUNetConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

  /// Residual blocks in encoder-then-decoder order (exposed for tests).
  [[nodiscard]] std::vector<nn::ResidualBlock>& encoder_blocks() noexcept { return enc_; }
  [[nodiscard]] std::vector<nn::ResidualBlock>& decoder_blocks() noexcept { return dec_; }

 private:
  ResUNetConfig cfg_{};
  std::uint64_t seed_ = 0;
  std::vector<nn::ResidualBlock> enc_;
  std::vector<nn::Conv2d> up_;
  std::vector<nn::ResidualBlock> dec_;
  nn::Conv2d head_;
};

ResUNet build_res_unet(const ResUNetConfig& cfg, std::uint64_t seed);

/// One 2.5D training example; only the central slice's mask supervises it.
struct SegSample {
  ChannelStack stack;
  Mask2D mask;
  std::string source_id;
  int slice_index = 0;
};

/// Every slice of a volume as a sample.
std::vector<SegSample> samples_from_volume(const Volume& v, const MaskVolume& mask, int context,
                                           const std::string& source_id);

struct SegSchedule {
  int epochs = 20;
  int steps_per_epoch = 100;
  int batch_size = 4;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  double threshold = 0.5;
};

struct SegEpochRecord {
  int epoch = 0;
  std::uint64_t steps = 0;
  double mean_loss = 0.0;
  std::optional<double> validation_dice;
};

/// Minimise BCE over (optionally augmented) samples with Adam. Validation
/// Dice is pooled over all validation slices at the schedule threshold.
std::vector<SegEpochRecord> train_segmenter(ResUNet& net, std::span<const SegSample> train,
                                            std::span<const SegSample> validation, const SegSchedule& schedule,
                                            const AugmentPolicy* policy);

/// Stack a batch of samples into [N, C, H, W].
nn::Tensor stacks_to_tensor(std::span<const ChannelStack* const> stacks);

/// Per-voxel foreground probability.
Volume predict_probabilities(const ResUNet& net, const Volume& v, int context);

/// Probabilities >= threshold become foreground.
MaskVolume predict_mask(const ResUNet& net, const Volume& v, int context, double threshold = 0.5);
MaskVolume threshold_probabilities(const Volume& prob, double threshold);

/// Pooled Dice of thresholded predictions over a set of samples.
double samples_dice(const ResUNet& net, std::span<const SegSample> samples, double threshold);

void save_segmenter(const ResUNet& net, int context, const std::filesystem::path& path);
struct LoadedSegmenter {
  ResUNet net;
  int context = 1;
};
LoadedSegmenter load_segmenter(const std::filesystem::path& path, const nlohmann::json* expected = nullptr);

}  // namespace xmodal
