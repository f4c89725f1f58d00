#include <benchmark/benchmark.h>

#include "xmodal/losses.hpp"
#include "xmodal/phantom.hpp"
#include "xmodal/segnet.hpp"
#include "xmodal/translator.hpp"

using namespace xmodal;

namespace {

nn::Tensor random_tensor(nn::Shape s, std::uint64_t seed, bool grad = false) {
  Rng rng(seed);
  std::vector<float> v(s.size());
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
  return nn::Tensor::from(s, std::move(v), grad);
}

Image random_image(int n, std::uint64_t seed) {
  Rng rng(seed);
  Image img(n, n);
  for (auto& x : img.data) x = rng.uniform(-1, 1);
  return img;
}

}  // namespace

static void BM_Conv2dForward(benchmark::State& state) {
  const int ch = static_cast<int>(state.range(0));
  const auto x = random_tensor({4, ch, 64, 64}, 1);
  const auto w = random_tensor({ch, ch, 3, 3}, 2);
  const auto b = random_tensor({1, ch, 1, 1}, 3);
  nn::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d(x, w, b, 1, 1));
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);

static void BM_Conv2dBackward(benchmark::State& state) {
  const int ch = static_cast<int>(state.range(0));
  const auto x = random_tensor({4, ch, 64, 64}, 1, true);
  const auto w = random_tensor({ch, ch, 3, 3}, 2, true);
  const auto b = random_tensor({1, ch, 1, 1}, 3, true);
  for (auto _ : state) {
    nn::Tensor y = nn::conv2d(x, w, b, 1, 1);
    nn::Tensor loss = nn::external_loss(y, [](std::span<const float> v) {
      LossGrad lg;
      lg.grad.assign(v.size(), 1.0);
      return lg;
    });
    loss.backward();
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);

static void BM_SsimLossGrad(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Image x = random_image(n, 4);
  const Image y = random_image(n, 5);
  const SsimConfig cfg = SsimConfig::for_range(2.0);
  for (auto _ : state) benchmark::DoNotOptimize(ssim_loss_grad(x, y, cfg));
}
BENCHMARK(BM_SsimLossGrad)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

static void BM_TranslatorStep(benchmark::State& state) {
  GeneratorConfig g;
  g.downsample_stages = static_cast<int>(state.range(0));
  TranslatorState st = build_translator(g, DiscriminatorConfig{}, 9);
  const auto mr = random_tensor({1, 1, 64, 64}, 6);
  const auto ct = random_tensor({1, 1, 64, 64}, 7);
  CycleLossWeights w;
  w.lambda_identity = 5.0;
  for (auto _ : state) benchmark::DoNotOptimize(cycle_train_step(st, mr, ct, w));
}
BENCHMARK(BM_TranslatorStep)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

static void BM_SegmenterPredictVolume(benchmark::State& state) {
  const int context = static_cast<int>(state.range(0));
  PhantomSpec s;
  s.seed = 3;
  auto [v, m] = generate_phantom(s);
  const Volume norm = normalize(v, 0.0F, 1.2F);
  ResUNetConfig cfg;
  cfg.in_channels = 1 + 2 * context;
  const ResUNet net = build_res_unet(cfg, 1);
  for (auto _ : state) benchmark::DoNotOptimize(predict_mask(net, norm, context));
}
BENCHMARK(BM_SegmenterPredictVolume)->Arg(0)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_PhantomGenerate(benchmark::State& state) {
  PhantomSpec s;
  s.organ_count = 5;
  s.noise_sigma = 0.02;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    s.seed = ++seed;
    benchmark::DoNotOptimize(generate_phantom(s));
  }
}
BENCHMARK(BM_PhantomGenerate)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
