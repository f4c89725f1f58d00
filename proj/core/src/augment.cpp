#include "xmodal/augment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace xmodal {

namespace {

void check_shapes(const AugmentSample& s) {
  if (s.image.channels < 1 || s.image.height < 1 || s.image.width < 1) {
    throw ArgumentError("augment: empty image");
  }
  if (s.mask && (s.mask->height != s.image.height || s.mask->width != s.image.width)) {
    throw ArgumentError("augment: mask shape does not match image");
  }
}

float bilinear(std::span<const float> plane, int h, int w, double sy, double sx) {
  sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
  sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x0 = static_cast<int>(std::floor(sx));
  const double fy = sy - y0;
  const double fx = sx - x0;
  auto px = [&](int y, int x) { return static_cast<double>(plane[static_cast<std::size_t>(y) * w + x]); };
  if (fy == 0.0 && fx == 0.0) return static_cast<float>(px(y0, x0));
  const int y1 = std::min(y0 + 1, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const double top = px(y0, x0) * (1.0 - fx) + px(y0, x1) * fx;
  const double bottom = px(y1, x0) * (1.0 - fx) + px(y1, x1) * fx;
  return static_cast<float>(top * (1.0 - fy) + bottom * fy);
}

// Snap values within rounding noise of 0 or +-1 so quarter turns are exact.
double snap_unit(double v) {
  for (double target : {-1.0, 0.0, 1.0}) {
    if (std::abs(v - target) < 1e-12) return target;
  }
  return v;
}

}  // namespace

void AugmentPolicy::validate() const {
  const auto [lo, hi] = crop_ratio_range;
  if (!(lo <= hi)) throw ArgumentError("crop_ratio_range requires min <= max");
  if (!(lo >= 0.5 && hi <= 1.0)) throw ArgumentError("crop_ratio_range must lie within [0.5, 1.0]");
  if (!(max_rotate_degrees >= 0.0)) throw ArgumentError("max_rotate_degrees must be >= 0");
  if (output_height < 1 || output_width < 1) throw ArgumentError("output size must be positive");
}

AugmentSample crop_resize(const AugmentSample& s, int y0, int x0, int crop_h, int crop_w, int out_h, int out_w) {
  check_shapes(s);
  const ChannelStack& in = s.image;
  if (crop_h < 1 || crop_w < 1 || y0 < 0 || x0 < 0 || y0 + crop_h > in.height || x0 + crop_w > in.width) {
    throw ArgumentError("crop window outside image");
  }
  if (out_h < 1 || out_w < 1) throw ArgumentError("output size must be positive");
  const double scale_y = static_cast<double>(crop_h) / out_h;
  const double scale_x = static_cast<double>(crop_w) / out_w;

  AugmentSample out;
  out.image = ChannelStack(in.channels, out_h, out_w);
  for (int c = 0; c < in.channels; ++c) {
    const auto plane = in.channel(c);
    for (int y = 0; y < out_h; ++y) {
      const double sy = y0 + (y + 0.5) * scale_y - 0.5;
      for (int x = 0; x < out_w; ++x) {
        const double sx = x0 + (x + 0.5) * scale_x - 0.5;
        // Clamp to the crop window so no pixels outside it leak in.
        out.image.at(c, y, x) =
            bilinear(plane, in.height, in.width, std::clamp(sy, double(y0), double(y0 + crop_h - 1)),
                     std::clamp(sx, double(x0), double(x0 + crop_w - 1)));
      }
    }
  }
  if (s.mask) {
    Mask2D m(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
      const int sy = y0 + std::min(crop_h - 1, static_cast<int>(std::floor((y + 0.5) * scale_y)));
      for (int x = 0; x < out_w; ++x) {
        const int sx = x0 + std::min(crop_w - 1, static_cast<int>(std::floor((x + 0.5) * scale_x)));
        m.at(y, x) = s.mask->at(sy, sx);
      }
    }
    out.mask = std::move(m);
  }
  return out;
}

AugmentSample random_ratio_crop(const AugmentSample& s, double ratio, Rng& rng, int out_h, int out_w) {
  if (!(ratio >= 0.5 && ratio <= 1.0)) throw ArgumentError("crop ratio must lie in [0.5, 1.0]");
  check_shapes(s);
  const int h = s.image.height;
  const int w = s.image.width;
  const int ch = std::clamp(static_cast<int>(std::lround(ratio * h)), 1, h);
  const int cw = std::clamp(static_cast<int>(std::lround(ratio * w)), 1, w);
  const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - ch + 1)));
  const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - cw + 1)));
  return crop_resize(s, y0, x0, ch, cw, out_h, out_w);
}

AugmentSample flip(const AugmentSample& s, FlipAxis axis) {
  check_shapes(s);
  AugmentSample out = s;
  const int h = s.image.height;
  const int w = s.image.width;
  auto src = [&](int y, int x) {
    return axis == FlipAxis::Horizontal ? std::pair{y, w - 1 - x} : std::pair{h - 1 - y, x};
  };
  for (int c = 0; c < s.image.channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const auto [sy, sx] = src(y, x);
        out.image.at(c, y, x) = s.image.at(c, sy, sx);
      }
  if (s.mask) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const auto [sy, sx] = src(y, x);
        out.mask->at(y, x) = s.mask->at(sy, sx);
      }
  }
  return out;
}

AugmentSample rotate(const AugmentSample& s, double degrees) {
  check_shapes(s);
  const int h = s.image.height;
  const int w = s.image.width;
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = snap_unit(std::cos(theta));
  const double sn = snap_unit(std::sin(theta));
  const double cy = 0.5 * (h - 1);
  const double cx = 0.5 * (w - 1);
  constexpr double kEdge = 1e-9;

  AugmentSample out;
  out.image = ChannelStack(s.image.channels, h, w);
  for (int c = 0; c < s.image.channels; ++c) {
    const auto plane = s.image.channel(c);
    const float pad = *std::min_element(plane.begin(), plane.end());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double dx = x - cx;
        const double dy = y - cy;
        const double sx = cx + cs * dx + sn * dy;
        const double sy = cy - sn * dx + cs * dy;
        const bool inside = sx >= -kEdge && sx <= w - 1 + kEdge && sy >= -kEdge && sy <= h - 1 + kEdge;
        out.image.at(c, y, x) = inside ? bilinear(plane, h, w, sy, sx) : pad;
      }
  }
  if (s.mask) {
    Mask2D m(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double dx = x - cx;
        const double dy = y - cy;
        const double fx = cx + cs * dx + sn * dy;
        const double fy = cy - sn * dx + cs * dy;
        // Same footprint as the image so padded pixels are never labelled.
        const bool inside = fx >= -kEdge && fx <= w - 1 + kEdge && fy >= -kEdge && fy <= h - 1 + kEdge;
        const int sx = std::clamp(static_cast<int>(std::lround(fx)), 0, w - 1);
        const int sy = std::clamp(static_cast<int>(std::lround(fy)), 0, h - 1);
        m.at(y, x) = inside ? s.mask->at(sy, sx) : std::uint8_t{0};
      }
    out.mask = std::move(m);
  }
  return out;
}

AugmentSample apply_policy(const AugmentSample& s, const AugmentPolicy& policy, Rng& rng) {
  policy.validate();
  const auto [lo, hi] = policy.crop_ratio_range;
  const double ratio = rng.uniform(lo, hi);
  AugmentSample out = random_ratio_crop(s, ratio, rng, policy.output_height, policy.output_width);
  if (policy.rotate) {
    const double angle = rng.uniform(-policy.max_rotate_degrees, policy.max_rotate_degrees);
    out = rotate(out, angle);
  }
  if (policy.flip_horizontal && rng.coin()) out = flip(out, FlipAxis::Horizontal);
  if (policy.flip_vertical && rng.coin()) out = flip(out, FlipAxis::Vertical);
  return out;
}

}  // namespace xmodal
