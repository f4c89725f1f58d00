#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "xmodal/errors.hpp"

namespace xmodal {

enum class Modality : std::uint8_t { MR = 0, CT = 1, SYNCT = 2 };
enum class Units : std::uint8_t { ARBITRARY = 0, HU = 1, NORMALIZED = 2 };

std::string_view to_string(Modality m) noexcept;
std::string_view to_string(Units u) noexcept;

/// Grid extent in voxels, slowest axis first.
struct Dims {
  int depth = 1;
  int height = 1;
  int width = 1;

  [[nodiscard]] std::size_t voxels() const noexcept {
    return static_cast<std::size_t>(depth) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  [[nodiscard]] std::size_t plane() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Voxel spacing in millimetres (dz, dy, dx).
struct Spacing {
  float dz = 1.0F;
  float dy = 1.0F;
  float dx = 1.0F;
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

/// A dense 2D grid stored row-major.
template <typename T>
struct Image2D {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Image2D() = default;
  Image2D(int h, int w, T fill = T{})
      : height(h), width(w), data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

  [[nodiscard]] std::size_t size() const noexcept { return data.size(); }
  T& at(int y, int x) noexcept { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int y, int x) const noexcept { return data[static_cast<std::size_t>(y) * width + x]; }
  [[nodiscard]] bool same_shape(const Image2D& o) const noexcept {
    return height == o.height && width == o.width;
  }
  friend bool operator==(const Image2D&, const Image2D&) = default;
};

using Mask2D = Image2D<std::uint8_t>;

/// Multi-channel 2D image [channels, H, W], channel-major.
struct ChannelStack {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  ChannelStack() = default;
  ChannelStack(int c, int h, int w, float fill = 0.0F)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

  [[nodiscard]] std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
  float& at(int c, int y, int x) noexcept { return data[(c * plane()) + static_cast<std::size_t>(y) * width + x]; }
  [[nodiscard]] float at(int c, int y, int x) const noexcept {
    return data[(c * plane()) + static_cast<std::size_t>(y) * width + x];
  }
  [[nodiscard]] std::span<const float> channel(int c) const noexcept {
    return std::span<const float>(data).subspan(c * plane(), plane());
  }
  friend bool operator==(const ChannelStack&, const ChannelStack&) = default;
};

/// 3D scalar image with spacing, modality tag and intensity units.
class Volume {
 public:
  Volume() = default;
  Volume(Dims dims, Spacing spacing, Modality modality, Units units, float fill = 0.0F);
  Volume(Dims dims, Spacing spacing, Modality modality, Units units, std::vector<float> data);

  [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
  [[nodiscard]] const Spacing& spacing() const noexcept { return spacing_; }
  [[nodiscard]] Modality modality() const noexcept { return modality_; }
  [[nodiscard]] Units units() const noexcept { return units_; }
  [[nodiscard]] std::span<const float> data() const noexcept { return data_; }
  [[nodiscard]] std::span<float> data() noexcept { return data_; }

  float& at(int z, int y, int x) noexcept { return data_[index(z, y, x)]; }
  [[nodiscard]] float at(int z, int y, int x) const noexcept { return data_[index(z, y, x)]; }

  [[nodiscard]] Image2D<float> slice(int z) const;
  void set_slice(int z, const Image2D<float>& img);

  void set_modality(Modality m) noexcept { modality_ = m; }
  void set_units(Units u) noexcept { units_ = u; }

  /// Throws ArgumentError/UnitsError when an invariant does not hold.
  void validate() const;

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  [[nodiscard]] std::size_t index(int z, int y, int x) const noexcept {
    return (static_cast<std::size_t>(z) * dims_.height + y) * dims_.width + x;
  }

  Dims dims_{};
  Spacing spacing_{};
  Modality modality_ = Modality::MR;
  Units units_ = Units::ARBITRARY;
  std::vector<float> data_ = std::vector<float>(1, 0.0F);
};

/// Binary label grid aligned with a Volume.
class MaskVolume {
 public:
  MaskVolume() = default;
  MaskVolume(Dims dims, Spacing spacing);
  MaskVolume(Dims dims, Spacing spacing, std::vector<std::uint8_t> labels);

  [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
  [[nodiscard]] const Spacing& spacing() const noexcept { return spacing_; }
  [[nodiscard]] std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  [[nodiscard]] std::span<std::uint8_t> labels() noexcept { return labels_; }

  std::uint8_t& at(int z, int y, int x) noexcept { return labels_[index(z, y, x)]; }
  [[nodiscard]] std::uint8_t at(int z, int y, int x) const noexcept { return labels_[index(z, y, x)]; }

  [[nodiscard]] Mask2D slice(int z) const;
  void set_slice(int z, const Mask2D& m);
  [[nodiscard]] std::size_t count() const noexcept;

  void validate() const;

  friend bool operator==(const MaskVolume&, const MaskVolume&) = default;

 private:
  [[nodiscard]] std::size_t index(int z, int y, int x) const noexcept {
    return (static_cast<std::size_t>(z) * dims_.height + y) * dims_.width + x;
  }

  Dims dims_{};
  Spacing spacing_{};
  std::vector<std::uint8_t> labels_ = std::vector<std::uint8_t>(1, 0);
};

/// Clamp every voxel into [lo, hi]. Requires units HU.
Volume window_clip(const Volume& v, float lo, float hi);

/// Map clamp(value, lo, hi) linearly onto [-1, 1]; output units NORMALIZED.
Volume normalize(const Volume& v, float lo, float hi);

/// Keep the centred floor(H*f) x floor(W*f) in-plane region. When the
/// discarded count is odd, the extra row/column comes off the low-index side.
Volume central_crop(const Volume& v, double fraction);
MaskVolume central_crop(const MaskVolume& m, double fraction);

/// First kept index along an axis of length n cropped to `kept` elements.
int crop_offset(int n, int kept) noexcept;

}  // namespace xmodal
