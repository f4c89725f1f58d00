#include "xmodal/translator.hpp"

#include <cmath>

namespace xmodal {

namespace {

constexpr double kGanInitStd = 0.02;
constexpr float kLeakySlope = 0.2F;

// Stream keys for parameter initialisation.
constexpr std::uint64_t kInitGenMrCt = 11;
constexpr std::uint64_t kInitGenCtMr = 12;
constexpr std::uint64_t kInitDiscCt = 13;
constexpr std::uint64_t kInitDiscMr = 14;
constexpr std::uint64_t kDriverStream = 15;

std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

void check_finite(double v, const char* component) {
  if (!std::isfinite(v)) throw TrainingError(component, "non-finite loss");
}

void check_batch(const nn::Tensor& t, const char* what) {
  const auto& s = t.shape();
  if (s.n < 1 || s.c != 1) throw ArgumentError(std::string(what) + ": expected [N, 1, H, W], got " + s.str());
}

}  // namespace

void GeneratorConfig::validate() const {
  if (base_channels < 1) throw ArgumentError("generator base_channels must be >= 1");
  if (downsample_stages < 1) throw ArgumentError("generator downsample_stages must be >= 1");
  if (residual_blocks < 1) throw ArgumentError("generator residual_blocks must be >= 1");
  if (!(output_mix >= 0.0 && output_mix <= 1.0)) throw ArgumentError("generator output_mix must lie in [0, 1]");
}

void DiscriminatorConfig::validate() const {
  if (base_channels < 1) throw ArgumentError("discriminator base_channels must be >= 1");
  if (layers < 1) throw ArgumentError("discriminator layers must be >= 1");
}

Generator::Generator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg.validate();
  int ch = cfg.base_channels;
  stem_ = nn::Conv2d(1, ch, 3, 1, 1, rng, kGanInitStd);
  for (int s = 0; s < cfg.downsample_stages; ++s, ch *= 2) down_.emplace_back(ch, 2 * ch, 3, 2, 1, rng, kGanInitStd);
  for (int b = 0; b < cfg.residual_blocks; ++b) blocks_.emplace_back(ch, ch, true, rng, kGanInitStd);
  for (int s = 0; s < cfg.downsample_stages; ++s, ch /= 2) up_.emplace_back(ch, ch / 2, 3, 1, 1, rng, kGanInitStd);
  head_ = nn::Conv2d(ch, 1, 3, 1, 1, rng, kGanInitStd);
}

nn::Tensor Generator::forward(const nn::Tensor& x) const {
  check_batch(x, "generator input");
  const auto& s = x.shape();
  if (s.h % stride() != 0 || s.w % stride() != 0) {
    throw ArgumentError("generator input " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                        " not divisible by 2^" + std::to_string(cfg_.downsample_stages));
  }
  nn::Tensor h = nn::relu(nn::instance_norm(stem_(x)));
  for (const auto& d : down_) h = nn::relu(nn::instance_norm(d(h)));
  for (const auto& b : blocks_) h = b(h);
  for (const auto& u : up_) h = nn::relu(nn::instance_norm(u(nn::upsample_nearest2(h))));
  nn::Tensor out = nn::tanh(head_(h));
  return nn::lerp(x, out, static_cast<float>(cfg_.output_mix));
}

nn::ParameterList Generator::parameters() const {
  nn::ParameterList out;
  nn::append_prefixed(out, "stem", stem_.parameters());
  for (std::size_t i = 0; i < down_.size(); ++i) nn::append_prefixed(out, "down" + std::to_string(i), down_[i].parameters());
  for (std::size_t i = 0; i < blocks_.size(); ++i) nn::append_prefixed(out, "block" + std::to_string(i), blocks_[i].parameters());
  for (std::size_t i = 0; i < up_.size(); ++i) nn::append_prefixed(out, "up" + std::to_string(i), up_[i].parameters());
  nn::append_prefixed(out, "head", head_.parameters());
  return out;
}

Discriminator::Discriminator(const DiscriminatorConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg.validate();
  int ch = 1;
  int next = cfg.base_channels;
  for (int l = 0; l < cfg.layers; ++l) {
    convs_.emplace_back(ch, next, 3, 2, 1, rng, kGanInitStd);
    ch = next;
    next *= 2;
  }
  head_ = nn::Conv2d(ch, 1, 3, 1, 1, rng, kGanInitStd);
}

nn::Tensor Discriminator::forward(const nn::Tensor& x) const {
  check_batch(x, "discriminator input");
  nn::Tensor h = x;
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    h = convs_[l](h);
    if (l > 0) h = nn::instance_norm(h);
    h = nn::leaky_relu(h, kLeakySlope);
  }
  return head_(h);
}

nn::ParameterList Discriminator::parameters() const {
  nn::ParameterList out;
  for (std::size_t i = 0; i < convs_.size(); ++i) nn::append_prefixed(out, "conv" + std::to_string(i), convs_[i].parameters());
  nn::append_prefixed(out, "head", head_.parameters());
  return out;
}

nn::ParameterList TranslatorState::generator_parameters() const {
  nn::ParameterList out;
  nn::append_prefixed(out, "gen_mr_to_ct", gen_mr_to_ct.parameters());
  nn::append_prefixed(out, "gen_ct_to_mr", gen_ct_to_mr.parameters());
  return out;
}

nn::ParameterList TranslatorState::discriminator_parameters() const {
  nn::ParameterList out;
  nn::append_prefixed(out, "disc_ct", disc_ct.parameters());
  nn::append_prefixed(out, "disc_mr", disc_mr.parameters());
  return out;
}

nlohmann::json to_json(const GeneratorConfig& c) {
  return {{"base_channels", c.base_channels},
          {"downsample_stages", c.downsample_stages},
          {"residual_blocks", c.residual_blocks},
          {"output_mix", c.output_mix}};
}

nlohmann::json to_json(const DiscriminatorConfig& c) {
  return {{"base_channels", c.base_channels}, {"layers", c.layers}};
}

std::string to_string(CycleMode m) { return m == CycleMode::SSIM ? "ssim" : "mse"; }

nlohmann::json TranslatorState::config_json() const {
  return {{"generator", to_json(gen_cfg)},
          {"discriminator", to_json(disc_cfg)},
          {"optimizer", {{"lr", opt_cfg.lr}, {"beta1", opt_cfg.beta1}, {"beta2", opt_cfg.beta2}}}};
}

TranslatorState build_translator(const GeneratorConfig& gcfg, const DiscriminatorConfig& dcfg, std::uint64_t seed,
                                 const TranslatorOptimizer& opt) {
  TranslatorState s;
  s.gen_cfg = gcfg;
  s.disc_cfg = dcfg;
  s.opt_cfg = opt;
  s.seed = seed;
  Rng r1(seed, kInitGenMrCt), r2(seed, kInitGenCtMr), r3(seed, kInitDiscCt), r4(seed, kInitDiscMr);
  s.gen_mr_to_ct = Generator(gcfg, r1);
  s.gen_ct_to_mr = Generator(gcfg, r2);
  s.disc_ct = Discriminator(dcfg, r3);
  s.disc_mr = Discriminator(dcfg, r4);
  const nn::Adam::Options o{opt.lr, opt.beta1, opt.beta2, 1e-8};
  s.gen_opt = nn::Adam(s.generator_parameters(), o);
  s.disc_opt = nn::Adam(s.discriminator_parameters(), o);
  s.rng = Rng(seed, kDriverStream);
  return s;
}

LossGrad cycle_loss(std::span<const float> reconstruction, std::span<const float> original, const nn::Shape& shape,
                    const CycleLossWeights& weights) {
  LossGrad out;
  out.grad.resize(reconstruction.size());
  const std::size_t plane = shape.sample();
  for (int n = 0; n < shape.n; ++n) {
    Image x(shape.h, shape.w);
    Image y(shape.h, shape.w);
    for (std::size_t i = 0; i < plane; ++i) {
      x.data[i] = reconstruction[n * plane + i];
      y.data[i] = original[n * plane + i];
    }
    const LossGrad lg = weights.cycle_mode == CycleMode::SSIM ? ssim_loss_grad(x, y, weights.ssim) : mse_loss_grad(x, y);
    out.value += lg.value / shape.n;
    for (std::size_t i = 0; i < plane; ++i) out.grad[n * plane + i] = lg.grad[i] / shape.n;
  }
  return out;
}

StepReport cycle_train_step(TranslatorState& state, const nn::Tensor& batch_mr, const nn::Tensor& batch_ct,
                            const CycleLossWeights& weights) {
  check_batch(batch_mr, "MR batch");
  check_batch(batch_ct, "CT batch");
  if (!std::isfinite(weights.lambda_cycle) || weights.lambda_cycle < 0.0) {
    throw ArgumentError("lambda_cycle must be finite and >= 0");
  }
  const auto gen_params = state.generator_parameters();
  const auto disc_params = state.discriminator_parameters();
  StepReport rep;

  auto disc_term = [](const nn::Tensor& real, const nn::Tensor& fake) {
    return nn::external_loss(real, fake, [](std::span<const float> r, std::span<const float> f) {
      const auto g = lsgan_discriminator_loss_grad(to_double(r), to_double(f));
      return nn::PairLossGrad{g.value, g.grad_real, g.grad_fake};
    });
  };
  auto gen_term = [](const nn::Tensor& d_fake) {
    return nn::external_loss(d_fake, [](std::span<const float> f) { return lsgan_generator_loss_grad(to_double(f)); });
  };
  auto cycle_term = [&](const nn::Tensor& recon, const nn::Tensor& original) {
    const auto orig = original.value();
    const auto shape = original.shape();
    return nn::external_loss(recon, [orig, shape, &weights](std::span<const float> r) {
      return cycle_loss(r, orig, shape, weights);
    });
  };

  // Discriminators first, on fakes from the current generators.
  {
    nn::Tensor fake_ct, fake_mr;
    {
      nn::NoGradGuard no_grad;
      fake_ct = state.gen_mr_to_ct.forward(batch_mr);
      fake_mr = state.gen_ct_to_mr.forward(batch_ct);
    }
    state.disc_opt.zero_grad();
    nn::Tensor loss_ct = disc_term(state.disc_ct.forward(batch_ct), state.disc_ct.forward(fake_ct));
    nn::Tensor loss_mr = disc_term(state.disc_mr.forward(batch_mr), state.disc_mr.forward(fake_mr));
    rep.disc_ct = loss_ct.item();
    rep.disc_mr = loss_mr.item();
    check_finite(rep.disc_ct, "disc_ct");
    check_finite(rep.disc_mr, "disc_mr");
    nn::weighted_sum({loss_ct, loss_mr}, {1.0, 1.0}).backward();
    state.disc_opt.step();
  }

  // Generators with fresh fakes; discriminators frozen for this pass.
  nn::set_requires_grad(disc_params, false);
  try {
    state.gen_opt.zero_grad();
    nn::Tensor fake_ct = state.gen_mr_to_ct.forward(batch_mr);
    nn::Tensor rec_mr = state.gen_ct_to_mr.forward(fake_ct);
    nn::Tensor fake_mr = state.gen_ct_to_mr.forward(batch_ct);
    nn::Tensor rec_ct = state.gen_mr_to_ct.forward(fake_mr);

    std::vector<nn::Tensor> terms{gen_term(state.disc_ct.forward(fake_ct)), gen_term(state.disc_mr.forward(fake_mr)),
                                  cycle_term(rec_mr, batch_mr), cycle_term(rec_ct, batch_ct)};
    std::vector<double> w{1.0, 1.0, weights.lambda_cycle, weights.lambda_cycle};
    if (weights.lambda_identity > 0.0) {
      nn::Tensor id_ct = state.gen_mr_to_ct.forward(batch_ct);
      nn::Tensor id_mr = state.gen_ct_to_mr.forward(batch_mr);
      nn::Tensor id_loss = nn::weighted_sum({cycle_term(id_ct, batch_ct), cycle_term(id_mr, batch_mr)}, {1.0, 1.0});
      rep.identity = id_loss.item();
      terms.push_back(id_loss);
      w.push_back(weights.lambda_identity);
    }
    rep.gen_adv_ct = terms[0].item();
    rep.gen_adv_mr = terms[1].item();
    rep.cycle_mr = terms[2].item();
    rep.cycle_ct = terms[3].item();
    nn::Tensor total = nn::weighted_sum(terms, w);
    rep.gen_total = total.item();
    check_finite(rep.gen_adv_ct, "gen_adv_ct");
    check_finite(rep.gen_adv_mr, "gen_adv_mr");
    check_finite(rep.cycle_mr, "cycle_mr");
    check_finite(rep.cycle_ct, "cycle_ct");
    check_finite(rep.gen_total, "gen_total");
    total.backward();
    state.gen_opt.step();
  } catch (...) {
    nn::set_requires_grad(disc_params, true);
    throw;
  }
  nn::set_requires_grad(disc_params, true);

  if (!nn::all_finite(gen_params)) throw TrainingError("generators", "non-finite parameters after update");
  if (!nn::all_finite(disc_params)) throw TrainingError("discriminators", "non-finite parameters after update");
  rep.step = ++state.step;
  return rep;
}

nn::Tensor slices_to_tensor(const std::vector<Image2D<float>>& slices) {
  if (slices.empty()) throw ArgumentError("no slices");
  const int h = slices.front().height;
  const int w = slices.front().width;
  std::vector<float> data;
  data.reserve(slices.size() * static_cast<std::size_t>(h) * w);
  for (const auto& s : slices) {
    if (s.height != h || s.width != w) throw ArgumentError("slices differ in shape");
    data.insert(data.end(), s.data.begin(), s.data.end());
  }
  return nn::Tensor::from({static_cast<int>(slices.size()), 1, h, w}, std::move(data));
}

Volume translate_slices(const Generator& gen, const Volume& v, Modality out_modality) {
  if (v.units() != Units::NORMALIZED) throw UnitsError("translation expects a NORMALIZED volume");
  const Dims& d = v.dims();
  if (d.height % gen.stride() != 0 || d.width % gen.stride() != 0) {
    throw ArgumentError("slice dims " + std::to_string(d.height) + "x" + std::to_string(d.width) +
                        " incompatible with generator stride " + std::to_string(gen.stride()));
  }
  nn::NoGradGuard no_grad;
  Volume out(d, v.spacing(), out_modality, Units::NORMALIZED);
  for (int z = 0; z < d.depth; ++z) {
    const nn::Tensor y = gen.forward(slices_to_tensor({v.slice(z)}));
    Image2D<float> img(d.height, d.width);
    std::copy(y.value().begin(), y.value().end(), img.data.begin());
    out.set_slice(z, img);
  }
  return out;
}

std::pair<Volume, MaskVolume> synthesize_volume(const TranslatorState& state, const Volume& mr, const MaskVolume& mask) {
  if (!(mask.dims() == mr.dims())) throw ArgumentError("mask is not aligned with the MR volume");
  return {translate_slices(state.gen_mr_to_ct, mr, Modality::SYNCT), mask};
}

Volume reconstruct_volume(const TranslatorState& state, const Volume& synct) {
  return translate_slices(state.gen_ct_to_mr, synct, Modality::MR);
}

Checkpoint translator_checkpoint(TranslatorState& state) {
  Checkpoint ck;
  ck.kind = "translator";
  ck.config = state.config_json();
  ck.step = state.step;
  ck.seed = state.seed;
  const auto rs = state.rng.state();
  ck.extra["rng_base"] = rs.base;
  ck.extra["rng_counter"] = rs.counter;
  const auto gp = state.generator_parameters();
  const auto dp = state.discriminator_parameters();
  store_parameters(ck, "param", gp);
  store_parameters(ck, "param", dp);
  store_optimizer(ck, "adam_gen", state.gen_opt, gp);
  store_optimizer(ck, "adam_disc", state.disc_opt, dp);
  return ck;
}

void save_translator(TranslatorState& state, const std::filesystem::path& path) {
  save_checkpoint(translator_checkpoint(state), path);
}

TranslatorState translator_from_checkpoint(const Checkpoint& ck, const nlohmann::json* expected) {
  if (ck.kind != "translator") throw ConfigError("checkpoint kind is '" + ck.kind + "', expected 'translator'");
  if (expected) require_compatible(ck, "translator", *expected);
  try {
    const auto& c = ck.config;
    GeneratorConfig g;
    g.base_channels = c.at("generator").at("base_channels").get<int>();
    g.downsample_stages = c.at("generator").at("downsample_stages").get<int>();
    g.residual_blocks = c.at("generator").at("residual_blocks").get<int>();
    g.output_mix = c.at("generator").at("output_mix").get<double>();
    DiscriminatorConfig d;
    d.base_channels = c.at("discriminator").at("base_channels").get<int>();
    d.layers = c.at("discriminator").at("layers").get<int>();
    TranslatorOptimizer o;
    o.lr = c.at("optimizer").at("lr").get<double>();
    o.beta1 = c.at("optimizer").at("beta1").get<double>();
    o.beta2 = c.at("optimizer").at("beta2").get<double>();
    TranslatorState s = build_translator(g, d, ck.seed, o);
    const auto gp = s.generator_parameters();
    const auto dp = s.discriminator_parameters();
    restore_parameters(ck, "param", gp);
    restore_parameters(ck, "param", dp);
    restore_optimizer(ck, "adam_gen", s.gen_opt, gp);
    restore_optimizer(ck, "adam_disc", s.disc_opt, dp);
    s.step = ck.step;
    s.rng = Rng::from_state({ck.extra.at("rng_base").get<std::uint64_t>(), ck.extra.at("rng_counter").get<std::uint64_t>()});
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("translator checkpoint manifest incomplete: ") + e.what());
  }
}

TranslatorState load_translator(const std::filesystem::path& path, const nlohmann::json* expected) {
  return translator_from_checkpoint(load_checkpoint(path), expected);
}

}  // namespace xmodal
