#include "xmodal/segnet.hpp"

#include <algorithm>
#include <cmath>

#include "xmodal/losses.hpp"

namespace xmodal {

namespace {
constexpr std::uint64_t kInitStream = 21;
constexpr std::uint64_t kSamplingStream = 22;
constexpr std::uint64_t kAugmentStream = 23;
}  // namespace

ChannelStack assemble_stack(const Volume& v, int slice_index, int context) {
  const Dims& d = v.dims();
  if (slice_index < 0 || slice_index >= d.depth) {
    throw ArgumentError("slice index " + std::to_string(slice_index) + " outside [0, " + std::to_string(d.depth) + ")");
  }
  if (context < 0) throw ArgumentError("context must be >= 0");
  ChannelStack out(1 + 2 * context, d.height, d.width);
  const auto src = v.data();
  for (int k = -context; k <= context; ++k) {
    const int z = std::clamp(slice_index + k, 0, d.depth - 1);
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(d.plane() * z), d.plane(),
                out.data.begin() + static_cast<std::ptrdiff_t>(d.plane() * (k + context)));
  }
  return out;
}

void ResUNetConfig::validate() const {
  if (depth < 1) throw ArgumentError("res-unet depth must be >= 1");
  if (base_channels < 1) throw ArgumentError("res-unet base_channels must be >= 1");
  if (in_channels < 1 || out_channels != 1) throw ArgumentError("res-unet needs in_channels >= 1 and out_channels == 1");
}

nlohmann::json to_json(const ResUNetConfig& c) {
  return {{"depth", c.depth}, {"base_channels", c.base_channels}, {"in_channels", c.in_channels},
          {"out_channels", c.out_channels}};
}

ResUNet::ResUNet(const ResUNetConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
  cfg.validate();
  Rng rng(seed, kInitStream);
  int in = cfg.in_channels;
  for (int l = 0; l <= cfg.depth; ++l) {
    const int ch = cfg.base_channels << l;
    enc_.emplace_back(in, ch, false, rng);
    in = ch;
  }
  for (int l = 0; l < cfg.depth; ++l) {
    const int ch = cfg.base_channels << l;
    up_.emplace_back(2 * ch, ch, 3, 1, 1, rng);
    dec_.emplace_back(2 * ch, ch, false, rng);
  }
  head_ = nn::Conv2d(cfg.base_channels, cfg.out_channels, 1, 1, 0, rng);
}

nn::Tensor ResUNet::forward(const nn::Tensor& x) const { return nn::sigmoid(logits(x)); }

nn::Tensor ResUNet::logits(const nn::Tensor& x) const {
  const auto& s = x.shape();
  if (s.c != cfg_.in_channels) {
    throw ArgumentError("res-unet expects " + std::to_string(cfg_.in_channels) + " channels, got " + std::to_string(s.c));
  }
  if (s.h % cfg_.divisor() != 0 || s.w % cfg_.divisor() != 0) {
    throw ArgumentError("res-unet input " + std::to_string(s.h) + "x" + std::to_string(s.w) + " not divisible by 2^" +
                        std::to_string(cfg_.depth));
  }
  std::vector<nn::Tensor> skips;
  nn::Tensor h = x;
  for (int l = 0; l <= cfg_.depth; ++l) {
    h = nn::relu(enc_[l](h));
    if (l < cfg_.depth) {
      skips.push_back(h);
      h = nn::max_pool2(h);
    }
  }
  for (int l = cfg_.depth - 1; l >= 0; --l) {
    h = nn::relu(up_[l](nn::upsample_nearest2(h)));
    h = nn::relu(dec_[l](nn::concat_channels(skips[l], h)));
  }
  return head_(h);
}

nn::ParameterList ResUNet::parameters() const {
  nn::ParameterList out;
  for (std::size_t i = 0; i < enc_.size(); ++i) nn::append_prefixed(out, "enc" + std::to_string(i), enc_[i].parameters());
  for (std::size_t i = 0; i < up_.size(); ++i) nn::append_prefixed(out, "up" + std::to_string(i), up_[i].parameters());
  for (std::size_t i = 0; i < dec_.size(); ++i) nn::append_prefixed(out, "dec" + std::to_string(i), dec_[i].parameters());
  nn::append_prefixed(out, "head", head_.parameters());
  return out;
}

ResUNet build_res_unet(const ResUNetConfig& cfg, std::uint64_t seed) { return ResUNet(cfg, seed); }

std::vector<SegSample> samples_from_volume(const Volume& v, const MaskVolume& mask, int context,
                                           const std::string& source_id) {
  if (!(mask.dims() == v.dims())) throw ArgumentError("mask not aligned with volume " + source_id);
  std::vector<SegSample> out;
  out.reserve(static_cast<std::size_t>(v.dims().depth));
  for (int z = 0; z < v.dims().depth; ++z) out.push_back({assemble_stack(v, z, context), mask.slice(z), source_id, z});
  return out;
}

nn::Tensor stacks_to_tensor(std::span<const ChannelStack* const> stacks) {
  if (stacks.empty()) throw ArgumentError("empty batch");
  const ChannelStack& first = *stacks.front();
  std::vector<float> data;
  data.reserve(stacks.size() * first.data.size());
  for (const ChannelStack* s : stacks) {
    if (s->channels != first.channels || s->height != first.height || s->width != first.width) {
      throw ArgumentError("batch stacks differ in shape");
    }
    data.insert(data.end(), s->data.begin(), s->data.end());
  }
  return nn::Tensor::from({static_cast<int>(stacks.size()), first.channels, first.height, first.width}, std::move(data));
}

double samples_dice(const ResUNet& net, std::span<const SegSample> samples, double threshold) {
  nn::NoGradGuard no_grad;
  std::vector<std::uint8_t> pred;
  std::vector<std::uint8_t> truth;
  for (const auto& s : samples) {
    const ChannelStack* one[] = {&s.stack};
    const nn::Tensor p = net.forward(stacks_to_tensor(one));
    for (float v : p.value()) pred.push_back(v >= threshold ? 1 : 0);
    truth.insert(truth.end(), s.mask.data.begin(), s.mask.data.end());
  }
  return dice_score(pred, truth);
}

std::vector<SegEpochRecord> train_segmenter(ResUNet& net, std::span<const SegSample> train,
                                            std::span<const SegSample> validation, const SegSchedule& schedule,
                                            const AugmentPolicy* policy) {
  if (schedule.epochs < 0 || schedule.steps_per_epoch < 1 || schedule.batch_size < 1) {
    throw ArgumentError("invalid segmentation schedule");
  }
  std::vector<SegEpochRecord> history;
  if (schedule.epochs == 0) return history;
  if (train.empty()) throw ArgumentError("train_segmenter: no training samples");
  for (const auto& s : train) {
    if (s.stack.channels != net.config().in_channels) {
      throw ArgumentError("sample " + s.source_id + " has " + std::to_string(s.stack.channels) +
                          " channels, network expects " + std::to_string(net.config().in_channels));
    }
  }
  if (policy) policy->validate();

  const auto params = net.parameters();
  nn::Adam opt(params, {schedule.lr, schedule.beta1, schedule.beta2, 1e-8});
  Rng pick(schedule.seed, kSamplingStream);
  Rng aug(schedule.seed, kAugmentStream);
  std::uint64_t steps = 0;

  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (int it = 0; it < schedule.steps_per_epoch; ++it) {
      std::vector<AugmentSample> batch;
      batch.reserve(static_cast<std::size_t>(schedule.batch_size));
      for (int b = 0; b < schedule.batch_size; ++b) {
        const SegSample& s = train[pick.below(train.size())];
        AugmentSample a{s.stack, s.mask};
        batch.push_back(policy ? apply_policy(a, *policy, aug) : std::move(a));
      }
      std::vector<const ChannelStack*> stacks;
      std::vector<std::uint8_t> target;
      for (const auto& a : batch) {
        stacks.push_back(&a.image);
        target.insert(target.end(), a.mask->data.begin(), a.mask->data.end());
      }
      opt.zero_grad();
      const nn::Tensor z = net.logits(stacks_to_tensor(stacks));
      nn::Tensor loss = nn::external_loss(z, [&target](std::span<const float> v) {
        return bce_logits_loss_grad(std::vector<double>(v.begin(), v.end()), target);
      });
      const double value = loss.item();
      if (!std::isfinite(value)) throw TrainingError("segmenter_bce", "non-finite loss at epoch " + std::to_string(epoch));
      loss.backward();
      opt.step();
      loss_sum += value;
      ++steps;
    }
    if (!nn::all_finite(params)) throw TrainingError("segmenter", "non-finite parameters");
    SegEpochRecord rec;
    rec.epoch = epoch;
    rec.steps = steps;
    rec.mean_loss = loss_sum / schedule.steps_per_epoch;
    if (!validation.empty()) rec.validation_dice = samples_dice(net, validation, schedule.threshold);
    history.push_back(rec);
  }
  return history;
}

Volume predict_probabilities(const ResUNet& net, const Volume& v, int context) {
  nn::NoGradGuard no_grad;
  const Dims& d = v.dims();
  Volume out(d, v.spacing(), v.modality(), Units::ARBITRARY);
  for (int z = 0; z < d.depth; ++z) {
    const ChannelStack stack = assemble_stack(v, z, context);
    const ChannelStack* one[] = {&stack};
    const nn::Tensor p = net.forward(stacks_to_tensor(one));
    Image2D<float> img(d.height, d.width);
    std::copy(p.value().begin(), p.value().end(), img.data.begin());
    out.set_slice(z, img);
  }
  return out;
}

MaskVolume threshold_probabilities(const Volume& prob, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ArgumentError("threshold must lie in (0, 1)");
  MaskVolume m(prob.dims(), prob.spacing());
  const auto p = prob.data();
  auto labels = m.labels();
  for (std::size_t i = 0; i < p.size(); ++i) labels[i] = p[i] >= threshold ? 1 : 0;
  return m;
}

MaskVolume predict_mask(const ResUNet& net, const Volume& v, int context, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ArgumentError("threshold must lie in (0, 1)");
  return threshold_probabilities(predict_probabilities(net, v, context), threshold);
}

void save_segmenter(const ResUNet& net, int context, const std::filesystem::path& path) {
  Checkpoint ck;
  ck.kind = "res_unet";
  ck.config = {{"res_unet", to_json(net.config())}, {"context", context}};
  ck.seed = net.seed();
  store_parameters(ck, "param", net.parameters());
  save_checkpoint(ck, path);
}

LoadedSegmenter load_segmenter(const std::filesystem::path& path, const nlohmann::json* expected) {
  const Checkpoint ck = load_checkpoint(path);
  if (ck.kind != "res_unet") throw ConfigError("checkpoint kind is '" + ck.kind + "', expected 'res_unet'");
  if (expected) require_compatible(ck, "res_unet", *expected);
  try {
    const auto& c = ck.config.at("res_unet");
    ResUNetConfig cfg;
    cfg.depth = c.at("depth").get<int>();
    cfg.base_channels = c.at("base_channels").get<int>();
    cfg.in_channels = c.at("in_channels").get<int>();
    cfg.out_channels = c.at("out_channels").get<int>();
    LoadedSegmenter out{ResUNet(cfg, ck.seed), ck.config.at("context").get<int>()};
    restore_parameters(ck, "param", out.net.parameters());
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("segmenter checkpoint manifest incomplete: ") + e.what());
  }
}

}  // namespace xmodal
