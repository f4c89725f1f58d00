#include <doctest.h>

#include <cmath>

#include "xmodal/errors.hpp"
#include "xmodal/rng.hpp"
#include "xmodal/volume.hpp"

using namespace xmodal;

namespace {

Volume ramp(Dims d, Units units = Units::HU, Modality m = Modality::CT) {
  Volume v(d, {2.0F, 0.5F, 0.5F}, m, units);
  float value = -900.0F;
  for (auto& x : v.data()) {
    x = value;
    value += 37.0F;
  }
  return v;
}

}  // namespace

TEST_CASE("window_clip clamps to the soft-tissue window") {
  Volume v({1, 1, 3}, {}, Modality::CT, Units::HU, std::vector<float>{700.0F, 0.0F, -800.0F});
  const Volume c = window_clip(v, -500.0F, 500.0F);
  CHECK(c.at(0, 0, 0) == 500.0F);
  CHECK(c.at(0, 0, 1) == 0.0F);
  CHECK(c.at(0, 0, 2) == -500.0F);
  CHECK(c.dims() == v.dims());
  CHECK(c.spacing() == v.spacing());
  CHECK(c.modality() == Modality::CT);
}

TEST_CASE("window_clip is the identity on in-range data and idempotent") {
  Volume v({2, 3, 4}, {}, Modality::CT, Units::HU, -100.0F);
  v.at(1, 2, 3) = 250.0F;
  CHECK(window_clip(v, -500.0F, 500.0F) == v);

  const Volume r = ramp({3, 5, 7});
  const Volume once = window_clip(r, -500.0F, 500.0F);
  CHECK(window_clip(once, -500.0F, 500.0F) == once);
}

TEST_CASE("window_clip rejects non-HU volumes and empty windows") {
  const Volume mr({1, 2, 2}, {}, Modality::MR, Units::ARBITRARY);
  CHECK_THROWS_AS(window_clip(mr, -500.0F, 500.0F), UnitsError);
  const Volume ct = ramp({1, 2, 2});
  CHECK_THROWS_AS(window_clip(ct, 500.0F, 500.0F), ArgumentError);
  CHECK_THROWS_AS(window_clip(ct, 600.0F, 500.0F), ArgumentError);
}

TEST_CASE("normalize maps lo, midpoint and hi to -1, 0, +1") {
  Volume v({1, 1, 5}, {}, Modality::CT, Units::HU, std::vector<float>{-500.0F, 0.0F, 500.0F, -900.0F, 900.0F});
  const Volume n = normalize(v, -500.0F, 500.0F);
  CHECK(n.at(0, 0, 0) == -1.0F);
  CHECK(n.at(0, 0, 1) == 0.0F);
  CHECK(n.at(0, 0, 2) == 1.0F);
  CHECK(n.at(0, 0, 3) == -1.0F);
  CHECK(n.at(0, 0, 4) == 1.0F);
  CHECK(n.units() == Units::NORMALIZED);
  CHECK_THROWS_AS(normalize(v, 1.0F, 1.0F), ArgumentError);
}

TEST_CASE("central_crop sizes") {
  const Volume v = ramp({2, 256, 256});
  const Volume c = central_crop(v, 0.5);
  CHECK(c.dims() == Dims{2, 128, 128});
  CHECK(central_crop(v, 1.0) == v);
  CHECK_THROWS_AS(central_crop(ramp({1, 3, 3}), 0.2), ArgumentError);
  CHECK_THROWS_AS(central_crop(v, 0.0), ArgumentError);
  CHECK_THROWS_AS(central_crop(v, 1.5), ArgumentError);
}

TEST_CASE("central_crop on an odd extent drops the extra row from the low side") {
  Volume v({1, 257, 4}, {}, Modality::CT, Units::HU);
  for (int y = 0; y < 257; ++y)
    for (int x = 0; x < 4; ++x) v.at(0, y, x) = static_cast<float>(y * 10 + x);
  const Volume c = central_crop(v, 0.5);
  REQUIRE(c.dims() == Dims{1, 128, 2});
  // 129 rows discarded: 65 below, 64 above, so kept rows are 65..192.
  CHECK(crop_offset(257, 128) == 65);
  CHECK(257 - 128 - crop_offset(257, 128) == 64);
  for (int y = 0; y < 128; ++y) {
    CHECK(c.at(0, y, 0) == static_cast<float>((y + 65) * 10 + 1));
  }
}

TEST_CASE("central_crop composes when intermediate extents are even") {
  const Volume v = ramp({1, 64, 48});
  const Volume twice = central_crop(central_crop(v, 0.5), 0.5);
  const Volume once = central_crop(v, 0.25);
  CHECK(twice.dims() == once.dims());
  CHECK(twice == once);
}

TEST_CASE("mask crop follows the image crop") {
  MaskVolume m({1, 9, 9}, {});
  m.at(0, 4, 4) = 1;
  const MaskVolume c = central_crop(m, 0.5);
  CHECK(c.dims() == Dims{1, 4, 4});
  CHECK(c.count() == 1);
  CHECK(c.at(0, 4 - crop_offset(9, 4), 4 - crop_offset(9, 4)) == 1);
}

TEST_CASE("volume invariants") {
  CHECK_THROWS_AS(Volume({0, 1, 1}, {}, Modality::MR, Units::ARBITRARY), ArgumentError);
  CHECK_THROWS_AS(Volume({1, 1, 1}, {}, Modality::MR, Units::HU).validate(), UnitsError);
  CHECK_NOTHROW(Volume({1, 1, 1}, {}, Modality::SYNCT, Units::HU).validate());
  Volume n({1, 1, 2}, {}, Modality::SYNCT, Units::NORMALIZED);
  n.at(0, 0, 1) = 1.5F;
  CHECK_THROWS_AS(n.validate(), UnitsError);
  Volume bad({1, 1, 1}, {}, Modality::MR, Units::ARBITRARY, std::nanf(""));
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  MaskVolume m({1, 1, 2}, {});
  m.at(0, 0, 0) = 2;
  CHECK_THROWS_AS(m.validate(), ArgumentError);
}

TEST_CASE("slices round-trip through set_slice") {
  Volume v = ramp({3, 4, 5});
  const Image2D<float> s = v.slice(1);
  Volume w({3, 4, 5}, v.spacing(), Modality::CT, Units::HU);
  w.set_slice(1, s);
  CHECK(w.slice(1) == s);
  CHECK(w.slice(0) != s);
}

TEST_CASE("counter-based rng streams are reproducible and independent") {
  Rng a(42, 1);
  Rng b(42, 1);
  Rng c(42, 2);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs = differs || x != c.next_u64();
  }
  CHECK(differs);
  Rng d(5);
  for (int i = 0; i < 1000; ++i) {
    const auto k = d.below(7);
    CHECK(k < 7);
    const double u = d.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  const auto st = d.state();
  Rng e = Rng::from_state(st);
  CHECK(e.next_u64() == d.next_u64());
}
