#include "xmodal/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace xmodal {

std::string_view to_string(Modality m) noexcept {
  switch (m) {
    case Modality::MR: return "MR";
    case Modality::CT: return "CT";
    case Modality::SYNCT: return "SYNCT";
  }
  return "?";
}

std::string_view to_string(Units u) noexcept {
  switch (u) {
    case Units::ARBITRARY: return "ARBITRARY";
    case Units::HU: return "HU";
    case Units::NORMALIZED: return "NORMALIZED";
  }
  return "?";
}

namespace {

void check_dims(const Dims& d) {
  if (d.depth < 1 || d.height < 1 || d.width < 1) {
    throw ArgumentError("volume dims must be >= 1, got " + std::to_string(d.depth) + "x" +
                        std::to_string(d.height) + "x" + std::to_string(d.width));
  }
}

}  // namespace

Volume::Volume(Dims dims, Spacing spacing, Modality modality, Units units, float fill)
    : dims_(dims), spacing_(spacing), modality_(modality), units_(units) {
  check_dims(dims);
  data_.assign(dims.voxels(), fill);
}

Volume::Volume(Dims dims, Spacing spacing, Modality modality, Units units, std::vector<float> data)
    : dims_(dims), spacing_(spacing), modality_(modality), units_(units), data_(std::move(data)) {
  check_dims(dims);
  if (data_.size() != dims.voxels()) {
    throw ArgumentError("volume payload has " + std::to_string(data_.size()) + " voxels, dims need " +
                        std::to_string(dims.voxels()));
  }
}

Image2D<float> Volume::slice(int z) const {
  if (z < 0 || z >= dims_.depth) throw ArgumentError("slice index out of range");
  Image2D<float> img(dims_.height, dims_.width);
  const auto first = data_.begin() + static_cast<std::ptrdiff_t>(dims_.plane() * z);
  std::copy(first, first + static_cast<std::ptrdiff_t>(dims_.plane()), img.data.begin());
  return img;
}

void Volume::set_slice(int z, const Image2D<float>& img) {
  if (z < 0 || z >= dims_.depth) throw ArgumentError("slice index out of range");
  if (img.height != dims_.height || img.width != dims_.width) {
    throw ArgumentError("slice shape does not match volume");
  }
  std::copy(img.data.begin(), img.data.end(),
            data_.begin() + static_cast<std::ptrdiff_t>(dims_.plane() * z));
}

void Volume::validate() const {
  check_dims(dims_);
  if (data_.size() != dims_.voxels()) throw ArgumentError("volume payload size mismatch");
  for (float v : data_) {
    if (!std::isfinite(v)) throw ArgumentError("volume contains non-finite values");
  }
  if (units_ == Units::NORMALIZED) {
    for (float v : data_) {
      if (v < -1.0F || v > 1.0F) throw UnitsError("NORMALIZED volume has values outside [-1, 1]");
    }
  }
  if (units_ == Units::HU && modality_ == Modality::MR) {
    throw UnitsError("HU units are only valid for CT or SYNCT volumes");
  }
}

MaskVolume::MaskVolume(Dims dims, Spacing spacing) : dims_(dims), spacing_(spacing) {
  check_dims(dims);
  labels_.assign(dims.voxels(), 0);
}

MaskVolume::MaskVolume(Dims dims, Spacing spacing, std::vector<std::uint8_t> labels)
    : dims_(dims), spacing_(spacing), labels_(std::move(labels)) {
  check_dims(dims);
  if (labels_.size() != dims.voxels()) throw ArgumentError("mask payload size mismatch");
}

Mask2D MaskVolume::slice(int z) const {
  if (z < 0 || z >= dims_.depth) throw ArgumentError("slice index out of range");
  Mask2D m(dims_.height, dims_.width);
  const auto first = labels_.begin() + static_cast<std::ptrdiff_t>(dims_.plane() * z);
  std::copy(first, first + static_cast<std::ptrdiff_t>(dims_.plane()), m.data.begin());
  return m;
}

void MaskVolume::set_slice(int z, const Mask2D& m) {
  if (z < 0 || z >= dims_.depth) throw ArgumentError("slice index out of range");
  if (m.height != dims_.height || m.width != dims_.width) {
    throw ArgumentError("mask slice shape does not match volume");
  }
  std::copy(m.data.begin(), m.data.end(), labels_.begin() + static_cast<std::ptrdiff_t>(dims_.plane() * z));
}

std::size_t MaskVolume::count() const noexcept {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), std::uint8_t{1}));
}

void MaskVolume::validate() const {
  check_dims(dims_);
  if (labels_.size() != dims_.voxels()) throw ArgumentError("mask payload size mismatch");
  for (auto v : labels_) {
    if (v > 1) throw ArgumentError("mask values must be 0 or 1");
  }
}

Volume window_clip(const Volume& v, float lo, float hi) {
  if (v.units() != Units::HU) {
    throw UnitsError("window_clip requires HU units, got " + std::string(to_string(v.units())));
  }
  if (!(lo < hi)) throw ArgumentError("window_clip requires lo < hi");
  Volume out = v;
  for (float& x : out.data()) x = std::min(hi, std::max(lo, x));
  return out;
}

Volume normalize(const Volume& v, float lo, float hi) {
  if (!(lo < hi)) throw ArgumentError("normalize requires lo < hi");
  Volume out = v;
  const double span = static_cast<double>(hi) - lo;
  for (float& x : out.data()) {
    const double c = std::clamp(static_cast<double>(x), static_cast<double>(lo), static_cast<double>(hi));
    x = static_cast<float>(std::clamp(2.0 * (c - lo) / span - 1.0, -1.0, 1.0));
  }
  out.set_units(Units::NORMALIZED);
  return out;
}

int crop_offset(int n, int kept) noexcept { return (n - kept + 1) / 2; }

namespace {

std::pair<int, int> cropped_extent(const Dims& d, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("crop fraction must lie in (0, 1]");
  const int h = static_cast<int>(std::floor(d.height * fraction));
  const int w = static_cast<int>(std::floor(d.width * fraction));
  if (h < 1 || w < 1) throw ArgumentError("central_crop would produce an empty in-plane extent");
  return {h, w};
}

template <typename T, typename Get>
std::vector<T> crop_payload(const Dims& d, int h, int w, Get&& get) {
  const int y0 = crop_offset(d.height, h);
  const int x0 = crop_offset(d.width, w);
  std::vector<T> out;
  out.reserve(static_cast<std::size_t>(d.depth) * h * w);
  for (int z = 0; z < d.depth; ++z)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.push_back(get(z, y0 + y, x0 + x));
  return out;
}

}  // namespace

Volume central_crop(const Volume& v, double fraction) {
  const auto [h, w] = cropped_extent(v.dims(), fraction);
  auto data = crop_payload<float>(v.dims(), h, w, [&](int z, int y, int x) { return v.at(z, y, x); });
  return Volume({v.dims().depth, h, w}, v.spacing(), v.modality(), v.units(), std::move(data));
}

MaskVolume central_crop(const MaskVolume& m, double fraction) {
  const auto [h, w] = cropped_extent(m.dims(), fraction);
  auto data = crop_payload<std::uint8_t>(m.dims(), h, w, [&](int z, int y, int x) { return m.at(z, y, x); });
  return MaskVolume({m.dims().depth, h, w}, m.spacing(), std::move(data));
}

}  // namespace xmodal
