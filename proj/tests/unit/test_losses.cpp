#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/losses.hpp"

using namespace xmodal;

namespace {

Image constant(int h, int w, double v) { return Image(h, w, v); }

}  // namespace

TEST_CASE("ssim of an image with itself is one everywhere") {
  Rng rng(1);
  const Image x = oracle::random_image(12, 10, rng);
  const Image m = ssim_map(x, x, SsimConfig{});
  for (double v : m.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ssim_loss(x, x, SsimConfig{}) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("constant images follow the closed form") {
  SsimConfig cfg;
  for (auto [a, b] : {std::pair{0.3, -0.2}, std::pair{1.0, 0.0}, std::pair{-0.7, -0.7}}) {
    const Image m = ssim_map(constant(9, 9, a), constant(9, 9, b), cfg);
    const double expected = (2 * a * b + cfg.c1) / (a * a + b * b + cfg.c1);
    for (double v : m.data) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
  }
  SsimConfig c;
  c.c1 = 0.01;
  CHECK(ssim_loss(constant(8, 8, 1.0), constant(8, 8, 0.0), c) == doctest::Approx(0.990099).epsilon(1e-6));
}

TEST_CASE("ssim map matches the brute-force window oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Image x = oracle::random_image(16, 16, rng);
    const Image y = oracle::random_image(16, 16, rng);
    for (int window : {3, 7}) {
      SsimConfig cfg = SsimConfig::for_range(2.0, window);
      const Image got = ssim_map(x, y, cfg);
      const Image want = oracle::ssim_map(x, y, window, cfg.c1, cfg.c2);
      for (std::size_t i = 0; i < got.data.size(); ++i) CHECK(std::abs(got.data[i] - want.data[i]) < 1e-10);
    }
  }
}

TEST_CASE("ssim is symmetric and bounded") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Image x = oracle::random_image(11, 13, rng);
    const Image y = oracle::random_image(11, 13, rng);
    const Image a = ssim_map(x, y, SsimConfig{});
    const Image b = ssim_map(y, x, SsimConfig{});
    for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(std::abs(a.data[i] - b.data[i]) < 1e-12);
    for (double v : a.data) {
      CHECK(v > -1.0);
      CHECK(v <= 1.0);
    }
    const double loss = ssim_loss(x, y, SsimConfig{});
    CHECK(loss >= 0.0);
    CHECK(loss < 2.0);
  }
}

TEST_CASE("ssim gradient agrees with central differences") {
  Rng rng(4);
  for (bool gaussian : {false, true}) {
    SsimConfig cfg = SsimConfig::for_range(2.0, 5);
    cfg.gaussian = gaussian;
    const Image x = oracle::random_image(8, 8, rng);
    const Image y = oracle::random_image(8, 8, rng);
    const LossGrad lg = ssim_loss_grad(x, y, cfg);
    CHECK(lg.value == doctest::Approx(ssim_loss(x, y, cfg)).epsilon(1e-14));
    const auto fd = oracle::finite_difference(
        [&](const std::vector<double>& v) {
          Image xi = x;
          xi.data = v;
          return ssim_loss(xi, y, cfg);
        },
        x.data, 1e-3);
    CHECK(oracle::relative_error(lg.grad, fd) < 1e-4);
  }
}

TEST_CASE("ssim argument errors") {
  CHECK_THROWS_AS(ssim_map(constant(8, 8, 0), constant(8, 7, 0), SsimConfig{}), ArgumentError);
  CHECK_THROWS_AS(ssim_map(constant(5, 5, 0), constant(5, 5, 0), SsimConfig{}), ArgumentError);
  SsimConfig even;
  even.window = 4;
  CHECK_THROWS_AS(even.validate(), ArgumentError);
  SsimConfig zero_c;
  zero_c.c2 = 0.0;
  CHECK_THROWS_AS(zero_c.validate(), ArgumentError);
}

TEST_CASE("ssim constants follow the dynamic range") {
  const SsimConfig c = SsimConfig::for_range(2.0);
  CHECK(c.c1 == doctest::Approx(0.0004));
  CHECK(c.c2 == doctest::Approx(0.0036));
  CHECK(c.window == 7);
}

TEST_CASE("mse and its gradient") {
  Rng rng(5);
  const Image x = oracle::random_image(4, 4, rng);
  const Image y = oracle::random_image(4, 4, rng);
  double want = 0;
  for (std::size_t i = 0; i < x.data.size(); ++i) want += (x.data[i] - y.data[i]) * (x.data[i] - y.data[i]);
  want /= 16.0;
  CHECK(mse_loss(x, y) == doctest::Approx(want).epsilon(1e-14));
  const LossGrad lg = mse_loss_grad(x, y);
  const auto fd = oracle::finite_difference(
      [&](const std::vector<double>& v) {
        Image xi = x;
        xi.data = v;
        return mse_loss(xi, y);
      },
      x.data, 1e-3);
  CHECK(oracle::relative_error(lg.grad, fd) < 1e-8);
}

TEST_CASE("least-squares discriminator loss worked examples") {
  const std::vector<double> ones{1, 1, 1};
  const std::vector<double> zeros{0, 0};
  CHECK(lsgan_discriminator_loss(ones, zeros) == 0.0);
  CHECK(lsgan_discriminator_loss(std::vector<double>{0, 0}, std::vector<double>{1, 1, 1}) == 2.0);
  CHECK(std::abs(lsgan_discriminator_loss(std::vector<double>{1, 0}, std::vector<double>{0.5}) - 0.75) < 1e-12);
  CHECK_THROWS_AS(lsgan_discriminator_loss(std::vector<double>{}, zeros), ArgumentError);
  CHECK_THROWS_AS(lsgan_discriminator_loss(ones, std::vector<double>{}), ArgumentError);
}

TEST_CASE("least-squares discriminator loss is non-negative with the right gradient") {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> real(3 + rng.below(4)), fake(2 + rng.below(5));
    for (auto& v : real) v = rng.uniform(-2, 2);
    for (auto& v : fake) v = rng.uniform(-2, 2);
    const double loss = lsgan_discriminator_loss(real, fake);
    CHECK(loss > 0.0);
    const auto g = lsgan_discriminator_loss_grad(real, fake);
    CHECK(g.value == doctest::Approx(loss));
    const auto fd_real = oracle::finite_difference(
        [&](const std::vector<double>& v) { return lsgan_discriminator_loss(v, fake); }, real, 1e-4);
    const auto fd_fake = oracle::finite_difference(
        [&](const std::vector<double>& v) { return lsgan_discriminator_loss(real, v); }, fake, 1e-4);
    CHECK(oracle::relative_error(g.grad_real, fd_real) < 1e-8);
    CHECK(oracle::relative_error(g.grad_fake, fd_fake) < 1e-8);
  }
}

TEST_CASE("least-squares generator loss worked examples") {
  CHECK(lsgan_generator_loss(std::vector<double>{1, 1}) == 0.0);
  CHECK(lsgan_generator_loss(std::vector<double>{0, 0, 0}) == 1.0);
  CHECK(lsgan_generator_loss(std::vector<double>{0.25, 0.75}) == doctest::Approx(0.3125).epsilon(1e-15));
  CHECK_THROWS_AS(lsgan_generator_loss(std::vector<double>{}), ArgumentError);
  const auto g = lsgan_generator_loss_grad(std::vector<double>{0.25, 0.75});
  CHECK(g.grad[0] == doctest::Approx(-0.75));
  CHECK(g.grad[1] == doctest::Approx(-0.25));
}

TEST_CASE("binary cross-entropy") {
  const std::vector<std::uint8_t> t{1, 0, 1, 1, 0, 0, 1, 0};
  std::vector<double> perfect(t.begin(), t.end());
  CHECK(bce_loss(perfect, t) <= -std::log(1 - 1e-7) + 1e-15);
  const std::vector<double> half(8, 0.5);
  CHECK(bce_loss(half, t) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(bce_loss(half, std::vector<std::uint8_t>{1, 0}), ArgumentError);
}

TEST_CASE("binary cross-entropy gradient agrees with central differences") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p(64);
    std::vector<std::uint8_t> t(64);
    for (std::size_t i = 0; i < 64; ++i) {
      p[i] = rng.uniform(0.05, 0.95);
      t[i] = rng.coin() ? 1 : 0;
    }
    const LossGrad lg = bce_loss_grad(p, t);
    const auto fd = oracle::finite_difference([&](const std::vector<double>& v) { return bce_loss(v, t); }, p, 1e-3);
    CHECK(oracle::relative_error(lg.grad, fd) < 1e-4);
  }
}

TEST_CASE("logit cross-entropy matches the probability form") {
  Rng rng(9);
  std::vector<double> z(64), p(64);
  std::vector<std::uint8_t> t(64);
  for (std::size_t i = 0; i < 64; ++i) {
    z[i] = rng.uniform(-4.0, 4.0);
    p[i] = 1.0 / (1.0 + std::exp(-z[i]));
    t[i] = rng.coin() ? 1 : 0;
  }
  const LossGrad lg = bce_logits_loss_grad(z, t);
  CHECK(lg.value == doctest::Approx(bce_loss(p, t)).epsilon(1e-12));
  const auto fd = oracle::finite_difference(
      [&](const std::vector<double>& v) { return bce_logits_loss_grad(v, t).value; }, z, 1e-3);
  CHECK(oracle::relative_error(lg.grad, fd) < 1e-4);
}

TEST_CASE("logit cross-entropy keeps a gradient where the sigmoid saturates") {
  const std::vector<double> z{40.0, -40.0};
  const std::vector<std::uint8_t> t{0, 1};
  const LossGrad lg = bce_logits_loss_grad(z, t);
  CHECK(lg.value == doctest::Approx(-std::log(kBceEpsilon)).epsilon(1e-9));
  CHECK(lg.grad[0] == doctest::Approx(0.5));
  CHECK(lg.grad[1] == doctest::Approx(-0.5));
}

TEST_CASE("dice worked examples") {
  std::vector<std::uint8_t> a(300, 0), b(300, 0);
  for (int i = 0; i < 100; ++i) a[i] = 1;
  for (int i = 50; i < 150; ++i) b[i] = 1;
  CHECK(dice_score(a, b) == 0.5);
  CHECK(dice_score(a, a) == 1.0);
  std::vector<std::uint8_t> c(300, 0);
  for (int i = 200; i < 250; ++i) c[i] = 1;
  CHECK(dice_score(a, c) == 0.0);
  const std::vector<std::uint8_t> empty(300, 0);
  CHECK(dice_score(empty, empty) == 1.0);
  CHECK(dice_score(a, empty) == 0.0);
  CHECK_THROWS_AS(dice_score(a, std::vector<std::uint8_t>(10, 0)), ArgumentError);
}

TEST_CASE("dice is symmetric and agrees with set counting") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(64);
    const double pa = rng.uniform();
    const double pb = rng.uniform();
    std::vector<std::uint8_t> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform() < pa ? 1 : 0;
      b[i] = rng.uniform() < pb ? 1 : 0;
    }
    const double d = dice_score(a, b);
    CHECK(d == oracle::dice_sets(a, b));
    CHECK(d == dice_score(b, a));
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
  }
}
