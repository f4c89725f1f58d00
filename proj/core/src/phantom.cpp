#include "xmodal/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "xmodal/rng.hpp"

namespace xmodal {

namespace {

// Stream keys; every random quantity is drawn from Rng(seed, key).
constexpr std::uint64_t kGeometryStream = 1;
constexpr std::uint64_t kContrastStream = 2;
constexpr std::uint64_t kBiasStream = 3;
constexpr std::uint64_t kNoiseStream = 4;

// Organs must stay inside the central region so they are visible at half FOV.
constexpr double kVisibleExtent = 0.46;
constexpr double kEdgeSoftness = 0.06;
constexpr int kPlacementAttempts = 400;

struct TissueTable {
  double background;
  double body;
  std::array<double, 5> organ;  // indexed by TissueKind
};

// MR: T1-like contrast (urine and gas dark, fatty marrow bright), arbitrary units.
// Tissue order matches the CT table; spacing between levels does not.
constexpr TissueTable kMrTissue{0.0, 0.35, {0.65, 0.15, 0.08, 0.95, 0.45}};
// CT: pseudo-HU with weak soft-tissue contrast and bone/air at the extremes.
constexpr TissueTable kCtTissue{-1000.0, 20.0, {120.0, 0.0, -60.0, 850.0, 40.0}};

TissueKind kind_for_index(int i) {
  switch (i) {
    case 0: return TissueKind::Prostate;
    case 1: return TissueKind::Bladder;
    case 2: return TissueKind::Rectum;
    case 3:
    case 4: return TissueKind::Bone;
    default: return TissueKind::Soft;
  }
}

double in_plane_overlap_margin(const Organ& a, const Organ& b) {
  const double dy = a.cy - b.cy;
  const double dx = a.cx - b.cx;
  const double dist = std::sqrt(dy * dy + dx * dx);
  return dist - (std::max(a.ry, a.rx) + std::max(b.ry, b.rx));
}

// Normalised ellipsoid radius; <= 1 inside.
double rho(const Organ& o, double uz, double uy, double ux) {
  const double a = (uz - o.cz) / o.rz;
  const double b = (uy - o.cy) / o.ry;
  const double c = (ux - o.cx) / o.rx;
  return std::sqrt(a * a + b * b + c * c);
}

double body_rho(const PhantomGeometry& g, double uy, double ux) {
  const double b = (uy - g.body_cy) / g.body_ry;
  const double c = (ux - g.body_cx) / g.body_rx;
  return std::sqrt(b * b + c * c);
}

double soft_membership(double r) { return 1.0 / (1.0 + std::exp(-(1.0 - r) / kEdgeSoftness)); }

// Pixel-centre coordinate in normalised body units.
double in_plane_coord(int i, int n, double fov) { return ((i + 0.5) - 0.5 * n) / (0.5 * n) * fov; }

void check_spec(const PhantomSpec& spec) {
  if (spec.dims.depth < 1 || spec.dims.height < 2 || spec.dims.width < 2) {
    throw ArgumentError("phantom dims must be at least 1x2x2");
  }
  if (spec.organ_count < 1) throw ArgumentError("organ_count must be >= 1");
  const auto [rmin, rmax] = spec.organ_radius_range;
  if (!(rmin > 0.0 && rmin <= rmax)) throw ArgumentError("organ_radius_range must satisfy 0 < min <= max");
  if (!(spec.noise_sigma >= 0.0)) throw ArgumentError("noise_sigma must be >= 0");
  if (!(spec.fov_scale > 0.0 && spec.fov_scale <= 1.0)) throw ArgumentError("fov_scale must lie in (0, 1]");
}

}  // namespace

PhantomGeometry phantom_geometry(const PhantomSpec& spec) {
  check_spec(spec);
  Rng rng(spec.seed, kGeometryStream);
  PhantomGeometry g;
  g.body_ry = rng.uniform(0.68, 0.80);
  g.body_rx = rng.uniform(0.84, 0.95);
  g.body_cy = rng.uniform(-0.03, 0.03);
  g.body_cx = rng.uniform(-0.03, 0.03);

  const double half_h = 0.5 * spec.dims.height;
  const double half_w = 0.5 * spec.dims.width;
  const auto [rmin, rmax] = spec.organ_radius_range;

  for (int i = 0; i < spec.organ_count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      Organ o;
      o.kind = kind_for_index(i);
      const double r = rng.uniform(rmin, rmax);
      const double aspect = rng.uniform(0.8, 1.25);
      o.ry = r / half_h * std::sqrt(aspect);
      o.rx = r / half_w / std::sqrt(aspect);
      if (o.kind == TissueKind::Bone) {
        o.ry *= 0.7;
        o.rx *= 0.7;
      }
      o.rz = rng.uniform(0.35, 0.6);
      o.cz = rng.uniform(-0.25, 0.25);
      const double ly = kVisibleExtent - o.ry;
      const double lx = kVisibleExtent - o.rx;
      if (ly <= 0.0 || lx <= 0.0) continue;
      // The prostate sits near the centre; other structures roam the field.
      const double spread = o.kind == TissueKind::Prostate ? 0.35 : 1.0;
      o.cy = rng.uniform(-ly, ly) * spread;
      o.cx = rng.uniform(-lx, lx) * spread;
      const bool clear = std::all_of(g.organs.begin(), g.organs.end(), [&](const Organ& other) {
        return in_plane_overlap_margin(o, other) > 0.02;
      });
      if (clear) {
        g.organs.push_back(o);
        placed = true;
      }
    }
    if (!placed) {
      throw GenerationError("could not place organ " + std::to_string(i) + " of " +
                            std::to_string(spec.organ_count) + " inside the body");
    }
  }
  return g;
}

MaskVolume body_mask(const PhantomSpec& spec) {
  const PhantomGeometry g = phantom_geometry(spec);
  const Dims& d = spec.dims;
  MaskVolume m(d, {});
  for (int z = 0; z < d.depth; ++z)
    for (int y = 0; y < d.height; ++y)
      for (int x = 0; x < d.width; ++x) {
        const double uy = in_plane_coord(y, d.height, spec.fov_scale);
        const double ux = in_plane_coord(x, d.width, spec.fov_scale);
        m.at(z, y, x) = body_rho(g, uy, ux) <= 1.0 ? 1 : 0;
      }
  return m;
}

std::pair<Volume, MaskVolume> generate_phantom(const PhantomSpec& spec) {
  const PhantomGeometry g = phantom_geometry(spec);
  const Dims& d = spec.dims;
  const bool ct = spec.modality_style == PhantomStyle::CT_LIKE;
  const TissueTable& base = ct ? kCtTissue : kMrTissue;

  // Per-case contrast jitter, independent of geometry.
  Rng contrast(spec.seed, kContrastStream);
  TissueTable tissue = base;
  const double jitter = ct ? 6.0 : 0.03;
  tissue.body += jitter * contrast.normal();
  for (auto& t : tissue.organ) t += jitter * contrast.normal();

  // Smooth multiplicative bias field for MR only.
  Rng bias_rng(spec.seed, kBiasStream);
  const double b1 = bias_rng.uniform(-0.12, 0.12);
  const double b2 = bias_rng.uniform(-0.12, 0.12);
  const double b3 = bias_rng.uniform(-0.10, 0.10);

  const double full_extent_mm = 256.0;
  const Spacing spacing{3.0F, static_cast<float>(full_extent_mm * spec.fov_scale / d.height),
                        static_cast<float>(full_extent_mm * spec.fov_scale / d.width)};

  Volume vol(d, spacing, ct ? Modality::CT : Modality::MR, ct ? Units::HU : Units::ARBITRARY);
  MaskVolume mask(d, spacing);
  const std::uint64_t noise_base = mix64(spec.seed ^ mix64(kNoiseStream));

  for (int z = 0; z < d.depth; ++z) {
    const double uz = ((z + 0.5) - 0.5 * d.depth) / (0.5 * d.depth);
    for (int y = 0; y < d.height; ++y) {
      const double uy = in_plane_coord(y, d.height, spec.fov_scale);
      for (int x = 0; x < d.width; ++x) {
        const double ux = in_plane_coord(x, d.width, spec.fov_scale);
        double value = tissue.background;
        value += (tissue.body - tissue.background) * soft_membership(body_rho(g, uy, ux));
        for (const Organ& o : g.organs) {
          const double m = soft_membership(rho(o, uz, uy, ux));
          value += (tissue.organ[static_cast<std::size_t>(o.kind)] - value) * m;
        }
        if (!ct) value *= 1.0 + b1 * ux + b2 * uy + b3 * (ux * ux + uy * uy);
        if (spec.noise_sigma > 0.0) {
          const std::uint64_t voxel = (static_cast<std::uint64_t>(z) * d.height + y) * d.width + x;
          Rng noise(noise_base, voxel);
          value += spec.noise_sigma * noise.normal();
        }
        vol.at(z, y, x) = static_cast<float>(value);
        mask.at(z, y, x) = rho(g.organs.front(), uz, uy, ux) <= 1.0 ? 1 : 0;
      }
    }
  }
  return {std::move(vol), std::move(mask)};
}

}  // namespace xmodal
