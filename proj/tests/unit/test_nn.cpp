#include <doctest.h>

#include <cmath>
#include <functional>

#include "oracles.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/nn/layers.hpp"
#include "xmodal/nn/ops.hpp"

using namespace xmodal;
using namespace xmodal::nn;

namespace {

Tensor random_tensor(Shape s, Rng& rng, bool grad = true, double lo = -1.0, double hi = 1.0) {
  std::vector<float> v(s.size());
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return Tensor::from(s, std::move(v), grad);
}

// Projects an output onto fixed random weights so every element contributes.
Tensor project(const Tensor& out, const std::vector<double>& w) {
  return external_loss(out, [w](std::span<const float> v) {
    LossGrad lg;
    lg.grad.assign(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      lg.value += w[i] * v[i];
      lg.grad[i] = w[i];
    }
    return lg;
  });
}

// Norm-wise error of autograd against central differences over all inputs.
double gradcheck(const std::vector<Tensor>& inputs, const std::function<Tensor(const std::vector<Tensor>&)>& f,
                 Rng& rng, double eps = 1e-2) {
  for (Tensor t : inputs) t.zero_grad();
  const Tensor probe = f(inputs);
  std::vector<double> w(probe.shape().size());
  for (auto& x : w) x = rng.uniform(-1, 1);
  Tensor loss = project(f(inputs), w);
  loss.backward();
  std::vector<double> analytic, numeric;
  for (const Tensor& in : inputs) {
    Tensor t = in;
    analytic.insert(analytic.end(), t.grad().begin(), t.grad().end());
    NoGradGuard guard;
    for (std::size_t i = 0; i < t.value().size(); ++i) {
      const float orig = t.value()[i];
      t.mutable_value()[i] = static_cast<float>(orig + eps);
      const double up = project(f(inputs), w).item();
      t.mutable_value()[i] = static_cast<float>(orig - eps);
      const double down = project(f(inputs), w).item();
      t.mutable_value()[i] = orig;
      numeric.push_back((up - down) / (2 * eps));
    }
  }
  return oracle::relative_error(analytic, numeric);
}

}  // namespace

TEST_CASE("conv2d matches a direct loop") {
  Rng rng(1);
  const Tensor x = random_tensor({2, 3, 7, 6}, rng, false);
  const Tensor w = random_tensor({4, 3, 3, 3}, rng, false);
  const Tensor b = random_tensor({1, 4, 1, 1}, rng, false);
  for (int stride : {1, 2}) {
    const Tensor y = conv2d(x, w, b, stride, 1);
    const int oh = (7 + 2 - 3) / stride + 1;
    const int ow = (6 + 2 - 3) / stride + 1;
    REQUIRE(y.shape() == Shape{2, 4, oh, ow});
    for (int n = 0; n < 2; ++n)
      for (int o = 0; o < 4; ++o)
        for (int yy = 0; yy < oh; ++yy)
          for (int xx = 0; xx < ow; ++xx) {
            double acc = b.value()[o];
            for (int c = 0; c < 3; ++c)
              for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                  const int iy = yy * stride + ky - 1;
                  const int ix = xx * stride + kx - 1;
                  if (iy < 0 || iy >= 7 || ix < 0 || ix >= 6) continue;
                  acc += double(x.value()[((n * 3 + c) * 7 + iy) * 6 + ix]) * w.value()[((o * 3 + c) * 3 + ky) * 3 + kx];
                }
            CHECK(y.value()[((n * 4 + o) * oh + yy) * ow + xx] == doctest::Approx(acc).epsilon(1e-5));
          }
  }
}

TEST_CASE("conv2d gradients") {
  Rng rng(2);
  for (int stride : {1, 2}) {
    const std::vector<Tensor> in{random_tensor({2, 2, 6, 6}, rng), random_tensor({3, 2, 3, 3}, rng),
                                 random_tensor({1, 3, 1, 1}, rng)};
    const double err = gradcheck(in, [stride](const auto& t) { return conv2d(t[0], t[1], t[2], stride, 1); }, rng);
    CHECK(err < 1e-2);
  }
}

TEST_CASE("pooling, upsampling and activations gradients") {
  Rng rng(3);
  const auto check = [&](const std::function<Tensor(const Tensor&)>& op) {
    const std::vector<Tensor> in{random_tensor({2, 2, 4, 4}, rng)};
    return gradcheck(in, [&](const auto& t) { return op(t[0]); }, rng, 1e-3);
  };
  CHECK(check([](const Tensor& x) { return max_pool2(x); }) < 1e-2);
  CHECK(check([](const Tensor& x) { return upsample_nearest2(x); }) < 1e-2);
  CHECK(check([](const Tensor& x) { return tanh(x); }) < 1e-2);
  CHECK(check([](const Tensor& x) { return sigmoid(x); }) < 1e-2);
  CHECK(check([](const Tensor& x) { return leaky_relu(x, 0.2F); }) < 1e-2);
  CHECK(check([](const Tensor& x) { return relu(x); }) < 1e-2);
  CHECK(check([](const Tensor& x) { return instance_norm(x); }) < 2e-2);
}

TEST_CASE("binary op gradients") {
  Rng rng(4);
  const std::vector<Tensor> in{random_tensor({1, 2, 3, 3}, rng), random_tensor({1, 2, 3, 3}, rng)};
  CHECK(gradcheck(in, [](const auto& t) { return add(t[0], t[1]); }, rng) < 1e-3);
  CHECK(gradcheck(in, [](const auto& t) { return lerp(t[0], t[1], 0.3F); }, rng) < 1e-3);
  CHECK(gradcheck(in, [](const auto& t) { return concat_channels(t[0], t[1]); }, rng) < 1e-3);
}

TEST_CASE("residual block gradients and zeroed branch") {
  Rng rng(5);
  ResidualBlock block(2, 2, true, rng);
  const Tensor x = random_tensor({1, 2, 4, 4}, rng);
  ParameterList params = block.parameters();
  std::vector<Tensor> in{x};
  for (auto& p : params) in.push_back(p.tensor);
  CHECK(gradcheck(in, [&](const auto& t) { return block(t[0]); }, rng, 1e-2) < 3e-2);

  ResidualBlock plain(3, 3, false, rng);
  plain.zero_branch();
  const Tensor z = random_tensor({1, 3, 5, 5}, rng, false);
  const Tensor out = plain(z);
  for (std::size_t i = 0; i < z.value().size(); ++i) CHECK(out.value()[i] == z.value()[i]);
}

TEST_CASE("instance norm output statistics") {
  Rng rng(6);
  const Tensor x = random_tensor({2, 3, 5, 5}, rng, false, -3, 7);
  const Tensor y = instance_norm(x);
  for (int p = 0; p < 6; ++p) {
    double m = 0, v = 0;
    for (int i = 0; i < 25; ++i) m += y.value()[p * 25 + i];
    m /= 25;
    for (int i = 0; i < 25; ++i) v += (y.value()[p * 25 + i] - m) * (y.value()[p * 25 + i] - m);
    CHECK(std::abs(m) < 1e-5);
    CHECK(v / 25 == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("adam drives a quadratic to its minimum") {
  Tensor p = Tensor::from({1, 1, 1, 3}, {3.0F, -2.0F, 0.5F}, true);
  Adam opt({{"p", p}}, {0.05, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 400; ++i) {
    opt.zero_grad();
    Tensor loss = external_loss(p, [](std::span<const float> v) {
      LossGrad lg;
      for (float x : v) {
        lg.value += double(x - 1) * (x - 1);
        lg.grad.push_back(2.0 * (x - 1));
      }
      return lg;
    });
    loss.backward();
    opt.step();
  }
  for (float v : p.value()) CHECK(v == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(opt.steps() == 400);
}

TEST_CASE("no-grad guard stops graph recording") {
  Rng rng(7);
  const Tensor x = random_tensor({1, 1, 2, 2}, rng);
  {
    NoGradGuard g;
    CHECK_FALSE(grad_enabled());
    CHECK_FALSE(tanh(x).requires_grad());
  }
  CHECK(grad_enabled());
  CHECK(tanh(x).requires_grad());
  CHECK_FALSE(tanh(x).detach().requires_grad());
}

TEST_CASE("shape mismatches are rejected") {
  Rng rng(8);
  const Tensor a = random_tensor({1, 2, 4, 4}, rng);
  const Tensor b = random_tensor({1, 3, 4, 4}, rng);
  CHECK_THROWS_AS(add(a, b), ArgumentError);
  CHECK_THROWS_AS(conv2d(a, random_tensor({2, 3, 3, 3}, rng), random_tensor({1, 2, 1, 1}, rng), 1, 1), ArgumentError);
  CHECK_THROWS_AS(max_pool2(random_tensor({1, 1, 3, 4}, rng)), ArgumentError);
}
