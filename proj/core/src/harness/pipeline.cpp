#include "xmodal/harness/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xmodal/errors.hpp"
#include "xmodal/harness/metrics.hpp"
#include "xmodal/phantom.hpp"
#include "xmodal/rng.hpp"
#include "xmodal/segnet.hpp"
#include "xmodal/translator.hpp"
#include "xmodal/volume_io.hpp"

namespace xmodal::harness {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTranslatorSeedKey = 0x7472616e73ULL;
constexpr std::uint64_t kTranslatorSampleKey = 0x7472736d70ULL;
constexpr std::uint64_t kSplitKey = 0x73706c6974ULL;
constexpr std::uint64_t kSegmenterKey = 0x7365676dULL;

std::uint64_t derive(std::uint64_t seed, std::uint64_t key) { return mix64(seed ^ mix64(key)); }

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string mode_tag(CycleMode m) { return lower(to_string(m)); }

std::string case_id(const std::string& pool, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%03d", pool.c_str(), i);
  return buf;
}

std::string fold_tag(int fold) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "fold%02d", fold);
  return buf;
}

int full_field_extent(int cropped, double fraction) {
  const int full = static_cast<int>(std::lround(cropped / fraction));
  if (static_cast<int>(std::floor(full * fraction)) != cropped) {
    throw ConfigError("data.ct_crop=" + std::to_string(fraction) + " cannot produce a " + std::to_string(cropped) +
                      "-voxel crop");
  }
  return full;
}

PhantomSpec phantom_spec(const ExperimentConfig& cfg, bool ct, std::uint64_t seed) {
  const auto& d = cfg.data;
  PhantomSpec s;
  s.seed = seed;
  s.organ_count = d.organ_count;
  if (ct) {
    s.dims = {d.depth, full_field_extent(d.height, d.ct_crop), full_field_extent(d.width, d.ct_crop)};
    s.modality_style = PhantomStyle::CT_LIKE;
    s.noise_sigma = d.ct_noise;
    s.fov_scale = 1.0;
  } else {
    s.dims = {d.depth, d.height, d.width};
    s.modality_style = PhantomStyle::MR_LIKE;
    s.noise_sigma = d.mr_noise;
    s.fov_scale = d.mr_fov;
  }
  const double half = 0.5 * std::min(s.dims.height, s.dims.width);
  s.organ_radius_range = {d.organ_radius_min * half, d.organ_radius_max * half};
  return s;
}

struct PoolInfo {
  std::string name;
  int count;
  std::uint64_t seed_base;
  bool ct;
};

std::vector<PoolInfo> pools(const ExperimentConfig& cfg) {
  return {{"mr", cfg.data.mr_count, cfg.data.mr_seed_base, false},
          {"ct", cfg.data.ct_count, cfg.data.ct_seed_base, true},
          {"ct_test", cfg.data.ct_test_count, cfg.data.ct_test_seed_base, true}};
}

Volume prepare(const ExperimentConfig& cfg, const Volume& v) {
  if (v.units() == Units::NORMALIZED) return v;
  if (v.units() == Units::HU) {
    if (cfg.window.enabled) {
      const auto lo = static_cast<float>(cfg.window.lo);
      const auto hi = static_cast<float>(cfg.window.hi);
      return normalize(window_clip(v, lo, hi), lo, hi);
    }
    return normalize(v, static_cast<float>(cfg.window.full_lo), static_cast<float>(cfg.window.full_hi));
  }
  return normalize(v, static_cast<float>(cfg.data.mr_norm_lo), static_cast<float>(cfg.data.mr_norm_hi));
}

fs::path volume_path(const fs::path& run_dir, const std::string& pool, const std::string& id) {
  return run_dir / "data" / pool / (id + ".mv01");
}

fs::path mask_path(const fs::path& run_dir, const std::string& pool, const std::string& id) {
  return run_dir / "data" / pool / (id + ".mask.mv01");
}

fs::path translator_path(const fs::path& run_dir, CycleMode mode) {
  return run_dir / "checkpoints" / ("translator_" + mode_tag(mode) + ".xmck");
}

CycleMode arm_mode(const std::string& arm) {
  if (arm == synct_arm(CycleMode::SSIM)) return CycleMode::SSIM;
  if (arm == synct_arm(CycleMode::MSE)) return CycleMode::MSE;
  throw ArgumentError("unknown segmenter arm '" + arm + "'");
}

std::string arm_pool(const std::string& arm) {
  if (arm == "MR") return "mr";
  return "synct_" + mode_tag(arm_mode(arm));
}

std::string arm_stem(const std::string& arm, int fold, int context) {
  return fold_tag(fold) + "_" + lower(arm) + "_ctx" + std::to_string(context);
}

fs::path segmenter_path(const fs::path& run_dir, const std::string& arm, int fold, int context) {
  return run_dir / "checkpoints" / ("seg_" + lower(arm) + "_ctx" + std::to_string(context) + "_" + fold_tag(fold) +
                                    ".xmck");
}

// Config lines that determine stage 1; the checkpoint is reused only on an exact match.
std::string translator_cache_key(const ExperimentConfig& cfg, CycleMode mode) {
  std::string key = "cycle_mode = " + mode_tag(mode) + "\n";
  std::istringstream in(to_text(cfg));
  std::string line;
  while (std::getline(in, line)) {
    const bool relevant = line.rfind("run.seed", 0) == 0 || line.rfind("data.", 0) == 0 ||
                          line.rfind("window.", 0) == 0 || line.rfind("augment.", 0) == 0 ||
                          line.rfind("translator.", 0) == 0;
    if (relevant && line.rfind("translator.cycle_mode", 0) != 0 && line.rfind("translator.log_every", 0) != 0) {
      key += line + "\n";
    }
  }
  return key;
}

std::vector<const Case*> select(const std::vector<Case>& pool, const std::vector<std::string>& ids) {
  std::vector<const Case*> out;
  for (const auto& id : ids) {
    const auto it = std::find_if(pool.begin(), pool.end(), [&](const Case& c) { return c.id == id; });
    if (it == pool.end()) throw std::runtime_error("case " + id + " missing from pool");
    out.push_back(&*it);
  }
  return out;
}

int resolve_context(const ExperimentConfig& cfg, int context) {
  const int c = context < 0 ? cfg.segmenter.context : context;
  if (c > 3) throw ArgumentError("context must lie in [0, 3]");
  return c;
}

}  // namespace

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / ".lock") {
  fs::create_directories(run_dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw std::runtime_error("run directory " + run_dir.string() + " is locked by another process (" +
                             path_.string() + ")");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

std::string synct_arm(CycleMode mode) {
  std::string tag = to_string(mode);
  std::transform(tag.begin(), tag.end(), tag.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return "SynCT-" + tag;
}

void write_resolved_config(const ExperimentConfig& cfg, const fs::path& run_dir) {
  const std::string text = to_text(cfg);
  write_file_bytes(run_dir / "config.resolved",
                   std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

int stage_phantoms(const ExperimentConfig& cfg, const fs::path& run_dir) {
  int written = 0;
  for (const PoolInfo& p : pools(cfg)) {
    for (int i = 0; i < p.count; ++i) {
      const std::uint64_t seed = derive(cfg.run.seed, p.seed_base + static_cast<std::uint64_t>(i));
      auto [vol, mask] = generate_phantom(phantom_spec(cfg, p.ct, seed));
      if (p.ct) {
        vol = central_crop(vol, cfg.data.ct_crop);
        mask = central_crop(mask, cfg.data.ct_crop);
      }
      const std::string id = case_id(p.name, i);
      write_volume(vol, volume_path(run_dir, p.name, id));
      write_mask(mask, mask_path(run_dir, p.name, id));
      ++written;
    }
  }
  return written;
}

std::vector<Case> load_pool(const ExperimentConfig& cfg, const fs::path& run_dir, const std::string& pool) {
  int count = cfg.data.mr_count;
  std::string prefix = "mr";
  if (pool == "ct") {
    count = cfg.data.ct_count;
    prefix = "ct";
  } else if (pool == "ct_test") {
    count = cfg.data.ct_test_count;
    prefix = "ct_test";
  } else if (pool != "mr" && pool.rfind("synct_", 0) != 0) {
    throw ArgumentError("unknown pool '" + pool + "'");
  }
  std::vector<Case> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::string id = case_id(prefix, i);
    out.push_back({id, prepare(cfg, read_volume(volume_path(run_dir, pool, id))),
                   read_mask(mask_path(run_dir, pool, id))});
  }
  return out;
}

bool stage_translate(const ExperimentConfig& cfg, const fs::path& run_dir, CycleMode mode) {
  const fs::path ck_path = translator_path(run_dir, mode);
  const std::string key = translator_cache_key(cfg, mode);
  const fs::path log_path = run_dir / "metrics" / ("translate_" + mode_tag(mode) + ".ndjson");
  if (fs::exists(ck_path) && fs::exists(log_path)) {
    const Checkpoint ck = load_checkpoint(ck_path);
    if (ck.kind == "translator" && ck.extra.value("cache_key", "") == key) return true;
  }

  const auto mr = load_pool(cfg, run_dir, "mr");
  const auto ct = load_pool(cfg, run_dir, "ct");
  const auto& t = cfg.translator;
  TranslatorState state = build_translator(cfg.generator_config(), cfg.discriminator_config(),
                                           derive(cfg.run.seed, kTranslatorSeedKey), {t.lr, t.beta1, t.beta2});
  const CycleLossWeights weights = cfg.cycle_weights(mode);
  const AugmentPolicy policy = cfg.augment_policy(0);
  Rng sampler(derive(cfg.run.seed, kTranslatorSampleKey), static_cast<std::uint64_t>(mode));

  auto draw = [&](const std::vector<Case>& pool) {
    std::vector<ChannelStack> stacks;
    for (int b = 0; b < t.batch; ++b) {
      const Case& c = pool[sampler.below(pool.size())];
      const int z = static_cast<int>(sampler.below(static_cast<std::uint64_t>(c.volume.dims().depth)));
      ChannelStack s = assemble_stack(c.volume, z, 0);
      if (cfg.augment.translator) s = apply_policy({std::move(s), std::nullopt}, policy, sampler).image;
      stacks.push_back(std::move(s));
    }
    std::vector<const ChannelStack*> ptrs;
    for (const auto& s : stacks) ptrs.push_back(&s);
    return stacks_to_tensor(ptrs);
  };

  MetricsWriter metrics(log_path, cfg.run.id, true);
  const std::string arm = synct_arm(mode);
  for (int step = 0; step < t.steps; ++step) {
    if (t.decay_start >= 0 && step >= t.decay_start && t.steps > t.decay_start) {
      const double lr = t.lr * (1.0 - static_cast<double>(step - t.decay_start) / (t.steps - t.decay_start));
      state.gen_opt.set_lr(lr);
      state.disc_opt.set_lr(lr);
    }
    const nn::Tensor batch_mr = draw(mr);
    const nn::Tensor batch_ct = draw(ct);
    const StepReport r = cycle_train_step(state, batch_mr, batch_ct, weights);
    if ((step + 1) % t.log_every == 0 || step + 1 == t.steps) {
      const std::pair<const char*, double> values[] = {
          {"disc_ct", r.disc_ct},       {"disc_mr", r.disc_mr},   {"gen_adv_ct", r.gen_adv_ct},
          {"gen_adv_mr", r.gen_adv_mr}, {"cycle_mr", r.cycle_mr}, {"cycle_ct", r.cycle_ct},
          {"identity", r.identity},     {"gen_total", r.gen_total}};
      for (const auto& [name, v] : values) {
        MetricsRecord rec;
        rec.stage = "translate";
        rec.metric = name;
        rec.value = v;
        rec.step = step + 1;
        rec.train_set = arm;
        metrics.write(rec);
      }
    }
  }

  Checkpoint ck = translator_checkpoint(state);
  ck.extra["cache_key"] = key;
  save_checkpoint(ck, ck_path);
  return false;
}

void stage_synthesize(const ExperimentConfig& cfg, const fs::path& run_dir, CycleMode mode) {
  const TranslatorState state = load_translator(translator_path(run_dir, mode));
  const std::string pool = "synct_" + mode_tag(mode);
  for (const Case& c : load_pool(cfg, run_dir, "mr")) {
    const auto [synct, mask] = synthesize_volume(state, c.volume, c.mask);
    write_volume(synct, volume_path(run_dir, pool, c.id));
    write_mask(mask, mask_path(run_dir, pool, c.id));
  }
}

KFoldResult stage_split(const ExperimentConfig& cfg, const fs::path& run_dir) {
  std::vector<std::string> ids;
  std::vector<double> sizes;
  for (int i = 0; i < cfg.data.mr_count; ++i) {
    const std::string id = case_id("mr", i);
    ids.push_back(id);
    sizes.push_back(static_cast<double>(read_mask(mask_path(run_dir, "mr", id)).count()));
  }
  KFoldResult split = kfold_split(ids, cfg.cv.folds, tercile_strata(sizes), derive(cfg.run.seed, kSplitKey));
  nlohmann::json j;
  j["warnings"] = split.warnings;
  j["folds"] = nlohmann::json::array();
  for (const auto& f : split.folds) j["folds"].push_back({{"train", f.train}, {"test", f.test}});
  const std::string text = j.dump(2) + "\n";
  write_file_bytes(run_dir / "data" / "folds.json",
                   std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  return split;
}

std::vector<std::string> segmenter_arms(const ExperimentConfig& cfg) {
  std::vector<std::string> arms;
  if (cfg.segmenter.train_on_mr) arms.push_back("MR");
  for (CycleMode m : cfg.cycle_modes()) arms.push_back(synct_arm(m));
  return arms;
}

void stage_train_seg(const ExperimentConfig& cfg, const fs::path& run_dir, const std::string& arm, int fold,
                     int context) {
  const int ctx = resolve_context(cfg, context);
  if (fold < 0 || fold >= cfg.cv.folds) throw ArgumentError("fold out of range");
  const KFoldResult split = stage_split(cfg, run_dir);
  const int k = cfg.cv.folds;
  const auto& val_ids = split.folds[static_cast<std::size_t>((fold + 1) % k)].test;
  std::vector<std::string> train_ids;
  for (const auto& id : split.folds[static_cast<std::size_t>(fold)].train) {
    if (std::find(val_ids.begin(), val_ids.end(), id) == val_ids.end()) train_ids.push_back(id);
  }

  const auto pool = load_pool(cfg, run_dir, arm_pool(arm));
  auto samples = [&](const std::vector<std::string>& ids) {
    std::vector<SegSample> out;
    for (const Case* c : select(pool, ids)) {
      auto s = samples_from_volume(c->volume, c->mask, ctx, c->id);
      out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    }
    return out;
  };
  const auto train = samples(train_ids);
  const auto validation = samples(val_ids);

  const auto& sc = cfg.segmenter;
  const std::uint64_t seed = derive(cfg.run.seed, kSegmenterKey + static_cast<std::uint64_t>(fold));
  ResUNet net = build_res_unet({sc.depth, sc.base, 1 + 2 * ctx, 1}, seed);
  SegSchedule schedule;
  schedule.epochs = sc.steps / sc.steps_per_epoch;
  schedule.steps_per_epoch = sc.steps_per_epoch;
  schedule.batch_size = sc.batch;
  schedule.lr = sc.lr;
  schedule.seed = seed;
  schedule.threshold = sc.threshold;
  const AugmentPolicy policy = cfg.augment_policy(seed);
  const auto history = train_segmenter(net, train, validation, schedule, cfg.augment.segmenter ? &policy : nullptr);

  MetricsWriter metrics(run_dir / "metrics" / (arm_stem(arm, fold, ctx) + "_train.ndjson"), cfg.run.id, true);
  for (const auto& h : history) {
    MetricsRecord r;
    r.stage = "train-seg";
    r.fold = fold;
    r.step = h.epoch;
    r.train_set = arm;
    r.context = ctx;
    r.metric = "train_loss";
    r.value = h.mean_loss;
    metrics.write(r);
    if (h.validation_dice) {
      r.metric = "val_dice";
      r.value = *h.validation_dice;
      metrics.write(r);
    }
  }
  save_segmenter(net, ctx, segmenter_path(run_dir, arm, fold, ctx));
}

void stage_eval(const ExperimentConfig& cfg, const fs::path& run_dir, const std::string& arm, int fold, int context) {
  const int ctx = resolve_context(cfg, context);
  const LoadedSegmenter seg = load_segmenter(segmenter_path(run_dir, arm, fold, ctx));
  const KFoldResult split = stage_split(cfg, run_dir);
  const auto& test_ids = split.folds.at(static_cast<std::size_t>(fold)).test;

  MetricsWriter metrics(run_dir / "metrics" / (arm_stem(arm, fold, ctx) + "_eval.ndjson"), cfg.run.id, true);
  auto evaluate = [&](const std::vector<const Case*>& cases, const std::string& test_set) {
    for (const Case* c : cases) {
      MetricsRecord r;
      r.stage = "eval";
      r.fold = fold;
      r.case_id = c->id;
      r.metric = "dice";
      r.value = dice_score(predict_mask(seg.net, c->volume, seg.context, cfg.segmenter.threshold), c->mask);
      r.train_set = arm;
      r.test_set = test_set;
      r.context = ctx;
      metrics.write(r);
    }
  };

  const auto own = load_pool(cfg, run_dir, arm_pool(arm));
  if (arm == "MR") {
    evaluate(select(own, test_ids), "MR");
    return;
  }
  evaluate(select(own, test_ids), "SynCT");
  const auto ct_test = load_pool(cfg, run_dir, "ct_test");
  std::vector<const Case*> all;
  for (const auto& c : ct_test) all.push_back(&c);
  evaluate(all, "CT");
}

void write_error_record(const fs::path& run_dir, const std::string& stage, const std::exception& e) {
  nlohmann::json j;
  j["stage"] = stage;
  j["message"] = e.what();
  std::string type = "runtime_error";
  if (const auto* t = dynamic_cast<const TrainingError*>(&e)) {
    type = "training_error";
    j["component"] = t->component();
  } else if (dynamic_cast<const ConfigError*>(&e) != nullptr) {
    type = "config_error";
  } else if (const auto* f = dynamic_cast<const FormatError*>(&e)) {
    type = "format_error";
    j["offset"] = f->offset();
  } else if (dynamic_cast<const GenerationError*>(&e) != nullptr) {
    type = "generation_error";
  } else if (dynamic_cast<const ReportError*>(&e) != nullptr) {
    type = "report_error";
  } else if (dynamic_cast<const std::invalid_argument*>(&e) != nullptr) {
    type = "argument_error";
  }
  j["type"] = type;
  const std::string text = j.dump(2) + "\n";
  write_file_bytes(run_dir / "error.json", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace {

Report run_all(const ExperimentConfig& cfg, const std::vector<int>& contexts, const fs::path& run_dir) {
  cfg.validate();
  RunLock lock(run_dir);
  std::error_code ec;
  fs::remove(run_dir / "error.json", ec);
  // Translator logs survive a rerun: a cache hit reuses the checkpoint and
  // does not retrain, so its log is still the one that produced it.
  std::set<std::string> keep;
  for (CycleMode mode : cfg.cycle_modes()) keep.insert("translate_" + mode_tag(mode) + ".ndjson");
  if (fs::is_directory(run_dir / "metrics")) {
    for (const auto& entry : fs::directory_iterator(run_dir / "metrics")) {
      if (!keep.contains(entry.path().filename().string())) fs::remove_all(entry.path(), ec);
    }
  }
  fs::remove_all(run_dir / "report", ec);
  std::string stage = "phantom";
  try {
    write_resolved_config(cfg, run_dir);
    stage_phantoms(cfg, run_dir);
    for (CycleMode mode : cfg.cycle_modes()) {
      stage = "train-translate";
      stage_translate(cfg, run_dir, mode);
      stage = "synthesize";
      stage_synthesize(cfg, run_dir, mode);
    }
    for (int fold = 0; fold < cfg.folds_to_run(); ++fold) {
      for (int ctx : contexts) {
        for (const auto& arm : segmenter_arms(cfg)) {
          stage = "train-seg";
          stage_train_seg(cfg, run_dir, arm, fold, ctx);
          stage = "eval";
          stage_eval(cfg, run_dir, arm, fold, ctx);
        }
      }
    }
    stage = "report";
    return emit_report(run_dir);
  } catch (const std::exception& e) {
    write_error_record(run_dir, stage, e);
    throw;
  }
}

}  // namespace

Report run_pipeline(const ExperimentConfig& cfg, const fs::path& run_dir) {
  return run_all(cfg, {cfg.segmenter.context}, run_dir);
}

Report context_sweep(const ExperimentConfig& cfg, const std::vector<int>& contexts, const fs::path& run_dir) {
  if (contexts.empty()) throw ArgumentError("context sweep needs at least one context");
  std::set<int> seen;
  for (int c : contexts) {
    if (c < 0 || c > 3) throw ArgumentError("sweep contexts must lie in [0, 3]");
    if (!seen.insert(c).second) throw ArgumentError("duplicate sweep context");
  }
  return run_all(cfg, contexts, run_dir);
}

}  // namespace xmodal::harness
