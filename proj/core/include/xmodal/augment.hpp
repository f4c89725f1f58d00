#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "xmodal/rng.hpp"
#include "xmodal/volume.hpp"

namespace xmodal {

/// Joint image/mask augmentation settings.
struct AugmentPolicy {
  std::pair<double, double> crop_ratio_range{0.5, 1.0};
  bool rotate = true;
  double max_rotate_degrees = 15.0;
  bool flip_horizontal = true;
  bool flip_vertical = false;
  int output_height = 64;
  int output_width = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

/// An image (any channel count) with an optional aligned binary mask.
struct AugmentSample {
  ChannelStack image;
  std::optional<Mask2D> mask;

  friend bool operator==(const AugmentSample&, const AugmentSample&) = default;
};

enum class FlipAxis { Horizontal, Vertical };

/// Crop a ratio-sized window at a uniformly random offset, then resize to
/// (out_h, out_w): bilinear for the image, nearest for the mask.
AugmentSample random_ratio_crop(const AugmentSample& s, double ratio, Rng& rng, int out_h, int out_w);

/// Deterministic crop at a given top-left corner (the worker behind random_ratio_crop).
AugmentSample crop_resize(const AugmentSample& s, int y0, int x0, int crop_h, int crop_w, int out_h, int out_w);

AugmentSample flip(const AugmentSample& s, FlipAxis axis);

/// Rotate about the image centre by `degrees` (x' = cos*x - sin*y in array
/// coordinates). Out-of-support pixels take the per-channel image minimum;
/// masks are padded with 0.
AugmentSample rotate(const AugmentSample& s, double degrees);

/// crop -> rotate -> flip, with every random decision drawn from `rng`.
AugmentSample apply_policy(const AugmentSample& s, const AugmentPolicy& policy, Rng& rng);

}  // namespace xmodal
