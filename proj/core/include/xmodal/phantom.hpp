#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "xmodal/volume.hpp"

namespace xmodal {

enum class PhantomStyle : std::uint8_t { MR_LIKE = 0, CT_LIKE = 1 };

/// Procedural pelvis-like phantom description. Identical specs always render
/// bit-identical volumes.
struct PhantomSpec {
  std::uint64_t seed = 0;
  Dims dims{16, 64, 64};
  int organ_count = 3;
  /// In-plane organ radii in voxels of the full-field (fov_scale = 1) grid.
  std::pair<double, double> organ_radius_range{3.0, 5.0};
  PhantomStyle modality_style = PhantomStyle::MR_LIKE;
  double noise_sigma = 0.0;
  /// Fraction of the full field of view covered by the grid (1 = whole body).
  double fov_scale = 1.0;
};

enum class TissueKind : std::uint8_t { Prostate, Bladder, Rectum, Bone, Soft };

/// One ellipsoidal structure in normalised body coordinates ([-1, 1] per axis
/// at fov_scale 1).
struct Organ {
  TissueKind kind = TissueKind::Soft;
  double cz = 0, cy = 0, cx = 0;
  double rz = 1, ry = 1, rx = 1;
};

struct PhantomGeometry {
  double body_ry = 0.75;
  double body_rx = 0.9;
  double body_cy = 0.0;
  double body_cx = 0.0;
  std::vector<Organ> organs;  ///< organs[0] is the prostate
};

/// Geometry depends only on seed, organ_count, radius range and the reference
/// in-plane dims; never on style, noise or field of view.
PhantomGeometry phantom_geometry(const PhantomSpec& spec);

/// Render the image and the prostate mask. Throws GenerationError when the
/// organs cannot be placed inside the body without overlap.
std::pair<Volume, MaskVolume> generate_phantom(const PhantomSpec& spec);

/// Body-ellipse membership of every voxel (used to check mask containment).
MaskVolume body_mask(const PhantomSpec& spec);

}  // namespace xmodal
