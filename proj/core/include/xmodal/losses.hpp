#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xmodal/volume.hpp"

namespace xmodal {

using Image = Image2D<double>;

/// Local-statistics settings for the structural similarity index.
struct SsimConfig {
  int window = 7;             ///< odd side of the local patch
  double c1 = 0.0004;         ///< (0.01 * L)^2 for L = 2
  double c2 = 0.0036;         ///< (0.03 * L)^2 for L = 2
  double dynamic_range = 2.0; ///< L; 2 for data normalised to [-1, 1]
  bool gaussian = false;      ///< Gaussian-weighted window instead of a box
  double gaussian_sigma = 1.5;

  /// Defaults with C1 = (0.01 L)^2 and C2 = (0.03 L)^2.
  static SsimConfig for_range(double dynamic_range, int window = 7);
  void validate() const;
};

/// Value plus gradient with respect to the first argument.
struct LossGrad {
  double value = 0.0;
  std::vector<double> grad;
};

/// Per-pixel SSIM with window statistics over reflection-padded borders.
Image ssim_map(const Image& x, const Image& y, const SsimConfig& cfg);

/// Mean of (1 - SSIM(p)) over all pixels; lies in [0, 2).
double ssim_loss(const Image& x, const Image& y, const SsimConfig& cfg);

/// ssim_loss together with d loss / d x.
LossGrad ssim_loss_grad(const Image& x, const Image& y, const SsimConfig& cfg);

/// Mean squared error and its gradient with respect to x.
double mse_loss(const Image& x, const Image& y);
LossGrad mse_loss_grad(const Image& x, const Image& y);

/// Least-squares discriminator objective: mean (D(real) - 1)^2 over the real
/// outputs plus mean D(fake)^2 over the fake outputs, each with its own count.
double lsgan_discriminator_loss(std::span<const double> d_real, std::span<const double> d_fake);

struct DiscriminatorLossGrad {
  double value = 0.0;
  std::vector<double> grad_real;
  std::vector<double> grad_fake;
};
DiscriminatorLossGrad lsgan_discriminator_loss_grad(std::span<const double> d_real,
                                                    std::span<const double> d_fake);

/// Least-squares generator objective: mean (D(fake) - 1)^2.
double lsgan_generator_loss(std::span<const double> d_fake);
LossGrad lsgan_generator_loss_grad(std::span<const double> d_fake);

inline constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
double bce_loss(std::span<const double> pred, std::span<const std::uint8_t> target);
LossGrad bce_loss_grad(std::span<const double> pred, std::span<const std::uint8_t> target);

/// bce_loss of sigmoid(logits), differentiated with respect to the logits.
/// The gradient (sigmoid(z) - t) / n stays nonzero where the clamp would cut it.
LossGrad bce_logits_loss_grad(std::span<const double> logits, std::span<const std::uint8_t> target);

/// 2|A n B| / (|A| + |B|); 1 when both masks are empty.
double dice_score(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
double dice_score(const Mask2D& a, const Mask2D& b);
double dice_score(const MaskVolume& a, const MaskVolume& b);

}  // namespace xmodal
