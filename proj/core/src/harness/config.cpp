#include "xmodal/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace xmodal::harness {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
std::string render(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, CycleSelection>) {
    return to_string(v);
  } else {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  }
}

template <typename T>
const char* type_name() {
  if constexpr (std::is_same_v<T, bool>) return "bool";
  else if constexpr (std::is_same_v<T, std::string>) return "string";
  else if constexpr (std::is_same_v<T, CycleSelection>) return "enum{ssim,mse,both}";
  else if constexpr (std::is_same_v<T, double>) return "real";
  else if constexpr (std::is_same_v<T, std::uint64_t>) return "uint64";
  else return "int";
}

template <typename T>
bool parse_value(const std::string& text, T& out) {
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true") out = true;
    else if (text == "false") out = false;
    else return false;
    return true;
  } else if constexpr (std::is_same_v<T, std::string>) {
    out = text;
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    return true;
  } else if constexpr (std::is_same_v<T, CycleSelection>) {
    if (text == "ssim") out = CycleSelection::SSIM;
    else if (text == "mse") out = CycleSelection::MSE;
    else if (text == "both") out = CycleSelection::BOTH;
    else return false;
    return true;
  } else {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
  }
}

struct Field {
  std::string key;
  std::string type;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<bool(ExperimentConfig&, const std::string&)> set;
};

template <typename Access>
Field make_field(std::string key, Access access) {
  using T = std::remove_cvref_t<decltype(access(std::declval<ExperimentConfig&>()))>;
  return Field{std::move(key), type_name<T>(),
               [access](const ExperimentConfig& c) { return render(access(const_cast<ExperimentConfig&>(c))); },
               [access](ExperimentConfig& c, const std::string& v) { return parse_value(v, access(c)); }};
}

#define XMODAL_FIELD(key, member) make_field(key, [](ExperimentConfig& c) -> auto& { return c.member; })

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      XMODAL_FIELD("run.id", run.id),
      XMODAL_FIELD("run.seed", run.seed),
      XMODAL_FIELD("data.mr_count", data.mr_count),
      XMODAL_FIELD("data.ct_count", data.ct_count),
      XMODAL_FIELD("data.ct_test_count", data.ct_test_count),
      XMODAL_FIELD("data.depth", data.depth),
      XMODAL_FIELD("data.height", data.height),
      XMODAL_FIELD("data.width", data.width),
      XMODAL_FIELD("data.organ_count", data.organ_count),
      XMODAL_FIELD("data.organ_radius_min", data.organ_radius_min),
      XMODAL_FIELD("data.organ_radius_max", data.organ_radius_max),
      XMODAL_FIELD("data.mr_noise", data.mr_noise),
      XMODAL_FIELD("data.ct_noise", data.ct_noise),
      XMODAL_FIELD("data.mr_fov", data.mr_fov),
      XMODAL_FIELD("data.ct_crop", data.ct_crop),
      XMODAL_FIELD("data.mr_norm_lo", data.mr_norm_lo),
      XMODAL_FIELD("data.mr_norm_hi", data.mr_norm_hi),
      XMODAL_FIELD("data.mr_seed_base", data.mr_seed_base),
      XMODAL_FIELD("data.ct_seed_base", data.ct_seed_base),
      XMODAL_FIELD("data.ct_test_seed_base", data.ct_test_seed_base),
      XMODAL_FIELD("window.enabled", window.enabled),
      XMODAL_FIELD("window.lo", window.lo),
      XMODAL_FIELD("window.hi", window.hi),
      XMODAL_FIELD("window.full_lo", window.full_lo),
      XMODAL_FIELD("window.full_hi", window.full_hi),
      XMODAL_FIELD("augment.crop_min", augment.crop_min),
      XMODAL_FIELD("augment.crop_max", augment.crop_max),
      XMODAL_FIELD("augment.rotate", augment.rotate),
      XMODAL_FIELD("augment.max_rotate_degrees", augment.max_rotate_degrees),
      XMODAL_FIELD("augment.flip_horizontal", augment.flip_horizontal),
      XMODAL_FIELD("augment.flip_vertical", augment.flip_vertical),
      XMODAL_FIELD("augment.translator", augment.translator),
      XMODAL_FIELD("augment.segmenter", augment.segmenter),
      XMODAL_FIELD("translator.steps", translator.steps),
      XMODAL_FIELD("translator.batch", translator.batch),
      XMODAL_FIELD("translator.lr", translator.lr),
      XMODAL_FIELD("translator.beta1", translator.beta1),
      XMODAL_FIELD("translator.beta2", translator.beta2),
      XMODAL_FIELD("translator.decay_start", translator.decay_start),
      XMODAL_FIELD("translator.lambda_cycle", translator.lambda_cycle),
      XMODAL_FIELD("translator.lambda_identity", translator.lambda_identity),
      XMODAL_FIELD("translator.cycle_mode", translator.cycle_mode),
      XMODAL_FIELD("translator.ssim_window", translator.ssim_window),
      XMODAL_FIELD("translator.gen_base", translator.gen_base),
      XMODAL_FIELD("translator.gen_stages", translator.gen_stages),
      XMODAL_FIELD("translator.gen_blocks", translator.gen_blocks),
      XMODAL_FIELD("translator.disc_base", translator.disc_base),
      XMODAL_FIELD("translator.disc_layers", translator.disc_layers),
      XMODAL_FIELD("translator.log_every", translator.log_every),
      XMODAL_FIELD("segmenter.steps", segmenter.steps),
      XMODAL_FIELD("segmenter.steps_per_epoch", segmenter.steps_per_epoch),
      XMODAL_FIELD("segmenter.batch", segmenter.batch),
      XMODAL_FIELD("segmenter.lr", segmenter.lr),
      XMODAL_FIELD("segmenter.depth", segmenter.depth),
      XMODAL_FIELD("segmenter.base", segmenter.base),
      XMODAL_FIELD("segmenter.context", segmenter.context),
      XMODAL_FIELD("segmenter.threshold", segmenter.threshold),
      XMODAL_FIELD("segmenter.train_on_mr", segmenter.train_on_mr),
      XMODAL_FIELD("cv.folds", cv.folds),
      XMODAL_FIELD("cv.fold_limit", cv.fold_limit),
      XMODAL_FIELD("sweep.contexts", sweep.contexts),
  };
  return all;
}

#undef XMODAL_FIELD

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

std::string to_string(CycleSelection s) {
  switch (s) {
    case CycleSelection::SSIM: return "ssim";
    case CycleSelection::MSE: return "mse";
    case CycleSelection::BOTH: return "both";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  require(!run.id.empty(), "run.id must not be empty");
  require(data.mr_count >= 1 && data.ct_count >= 1 && data.ct_test_count >= 1, "data counts must be >= 1");
  require(data.depth >= 1 && data.height >= 4 && data.width >= 4, "data dims too small");
  require(data.organ_count >= 1, "data.organ_count must be >= 1");
  require(data.organ_radius_min > 0 && data.organ_radius_min <= data.organ_radius_max,
          "data.organ_radius_min/max must satisfy 0 < min <= max");
  require(data.mr_noise >= 0 && data.ct_noise >= 0, "noise must be >= 0");
  require(data.mr_fov > 0 && data.mr_fov <= 1, "data.mr_fov must lie in (0, 1]");
  require(data.ct_crop > 0 && data.ct_crop <= 1, "data.ct_crop must lie in (0, 1]");
  require(data.mr_norm_lo < data.mr_norm_hi, "data.mr_norm_lo must be < data.mr_norm_hi");
  require(window.lo < window.hi && window.full_lo < window.full_hi, "window bounds must satisfy lo < hi");
  require(augment.crop_min >= 0.5 && augment.crop_max <= 1.0 && augment.crop_min <= augment.crop_max,
          "augment crop range must satisfy 0.5 <= min <= max <= 1");
  require(augment.max_rotate_degrees >= 0, "augment.max_rotate_degrees must be >= 0");
  require(translator.steps >= 0 && translator.batch >= 1, "translator steps/batch invalid");
  require(translator.lr > 0, "translator.lr must be > 0");
  require(translator.lambda_cycle >= 0 && translator.lambda_identity >= 0, "loss weights must be >= 0");
  require(translator.ssim_window >= 3 && translator.ssim_window % 2 == 1, "translator.ssim_window must be odd >= 3");
  require(translator.gen_base >= 1 && translator.gen_stages >= 1 && translator.gen_blocks >= 1,
          "generator config invalid");
  require(translator.disc_base >= 1 && translator.disc_layers >= 1, "discriminator config invalid");
  require(translator.log_every >= 1, "translator.log_every must be >= 1");
  const int gdiv = 1 << translator.gen_stages;
  require(data.height % gdiv == 0 && data.width % gdiv == 0, "slice dims not divisible by 2^translator.gen_stages");
  require(segmenter.steps >= 0 && segmenter.steps_per_epoch >= 1 && segmenter.steps % segmenter.steps_per_epoch == 0,
          "segmenter.steps must be a multiple of segmenter.steps_per_epoch");
  require(segmenter.batch >= 1 && segmenter.lr > 0, "segmenter batch/lr invalid");
  require(segmenter.depth >= 1 && segmenter.base >= 1, "segmenter architecture invalid");
  const int sdiv = 1 << segmenter.depth;
  require(data.height % sdiv == 0 && data.width % sdiv == 0, "slice dims not divisible by 2^segmenter.depth");
  require(segmenter.context >= 0 && segmenter.context <= 3, "segmenter.context must lie in [0, 3]");
  require(segmenter.threshold > 0 && segmenter.threshold < 1, "segmenter.threshold must lie in (0, 1)");
  require(cv.folds >= 2 && cv.folds <= data.mr_count, "cv.folds must satisfy 2 <= k <= data.mr_count");
  require(cv.fold_limit >= 0 && cv.fold_limit <= cv.folds, "cv.fold_limit must lie in [0, cv.folds]");
  (void)sweep_contexts();
}

AugmentPolicy ExperimentConfig::augment_policy(std::uint64_t seed) const {
  AugmentPolicy p;
  p.crop_ratio_range = {augment.crop_min, augment.crop_max};
  p.rotate = augment.rotate;
  p.max_rotate_degrees = augment.max_rotate_degrees;
  p.flip_horizontal = augment.flip_horizontal;
  p.flip_vertical = augment.flip_vertical;
  p.output_height = data.height;
  p.output_width = data.width;
  p.seed = seed;
  return p;
}

GeneratorConfig ExperimentConfig::generator_config() const {
  return {translator.gen_base, translator.gen_stages, translator.gen_blocks, 1.0};
}

DiscriminatorConfig ExperimentConfig::discriminator_config() const {
  return {translator.disc_base, translator.disc_layers};
}

CycleLossWeights ExperimentConfig::cycle_weights(CycleMode mode) const {
  CycleLossWeights w;
  w.lambda_cycle = translator.lambda_cycle;
  w.lambda_identity = translator.lambda_identity;
  w.cycle_mode = mode;
  w.ssim = SsimConfig::for_range(2.0, translator.ssim_window);
  return w;
}

std::vector<CycleMode> ExperimentConfig::cycle_modes() const {
  switch (translator.cycle_mode) {
    case CycleSelection::SSIM: return {CycleMode::SSIM};
    case CycleSelection::MSE: return {CycleMode::MSE};
    case CycleSelection::BOTH: return {CycleMode::SSIM, CycleMode::MSE};
  }
  return {};
}

std::vector<int> ExperimentConfig::sweep_contexts() const {
  std::vector<int> out;
  std::stringstream ss(sweep.contexts);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    int v = -1;
    if (!parse_value(item, v) || v < 0 || v > 3) throw ConfigError("sweep.contexts entries must be integers in [0, 3]");
    if (std::find(out.begin(), out.end(), v) != out.end()) throw ConfigError("sweep.contexts has duplicates");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("sweep.contexts is empty");
  return out;
}

int ExperimentConfig::folds_to_run() const { return cv.fold_limit == 0 ? cv.folds : cv.fold_limit; }

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!section.empty()) key = section + "." + key;
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    if (!it->second->set(c, value)) {
      throw ConfigError(where + "value '" + value + "' is not a valid " + it->second->type + " for " + key);
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const ExperimentConfig& c) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(c) + "\n";
  return out;
}

std::vector<ConfigKeyInfo> config_schema() {
  const ExperimentConfig defaults;
  std::vector<ConfigKeyInfo> out;
  for (const auto& f : fields()) out.push_back({f.key, f.type, f.get(defaults)});
  return out;
}

}  // namespace xmodal::harness
