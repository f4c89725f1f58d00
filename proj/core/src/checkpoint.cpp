#include "xmodal/checkpoint.hpp"

#include <algorithm>

#include "xmodal/byteio.hpp"
#include "xmodal/volume_io.hpp"

namespace xmodal {

namespace {
constexpr char kMagic[4] = {'X', 'M', 'C', 'K'};
}  // namespace

void Checkpoint::add(const std::string& name, const nn::Tensor& t) { add(name, t.shape(), t.value()); }

void Checkpoint::add(const std::string& name, nn::Shape shape, std::span<const float> values) {
  if (values.size() != shape.size()) throw ArgumentError("checkpoint block " + name + ": size mismatch");
  blocks.push_back({name, shape, std::vector<float>(values.begin(), values.end())});
}

const CheckpointBlock& Checkpoint::block(const std::string& name) const {
  const auto it = std::find_if(blocks.begin(), blocks.end(), [&](const auto& b) { return b.name == name; });
  if (it == blocks.end()) throw ConfigError("checkpoint has no block named " + name);
  return *it;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  nlohmann::json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["kind"] = ck.kind;
  manifest["config"] = ck.config;
  manifest["step"] = ck.step;
  manifest["seed"] = ck.seed;
  manifest["extra"] = ck.extra;
  auto& blocks = manifest["blocks"] = nlohmann::json::array();
  for (const auto& b : ck.blocks) {
    blocks.push_back({{"name", b.name}, {"shape", {b.shape.n, b.shape.c, b.shape.h, b.shape.w}}});
  }
  const std::string text = manifest.dump();

  byteio::Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kCheckpointFormatVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.text(text);
  for (const auto& b : ck.blocks) w.f32s(b.values);
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  byteio::Reader r(bytes);
  for (std::size_t i = 0; i < 4; ++i) {
    if (bytes.size() <= i || r.u8() != static_cast<std::uint8_t>(kMagic[i])) {
      throw FormatError("bad magic, expected XMCK", i);
    }
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointFormatVersion) {
    throw FormatError("unsupported checkpoint format version " + std::to_string(version), 4);
  }
  const std::uint32_t manifest_len = r.u32();
  const std::size_t manifest_at = r.position();
  const std::string text = r.text(manifest_len);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what(), manifest_at);
  }

  Checkpoint ck;
  try {
    ck.kind = manifest.at("kind").get<std::string>();
    ck.config = manifest.at("config");
    ck.step = manifest.at("step").get<std::uint64_t>();
    ck.seed = manifest.at("seed").get<std::uint64_t>();
    ck.extra = manifest.value("extra", nlohmann::json::object());
    std::size_t expected = 0;
    for (const auto& b : manifest.at("blocks")) {
      const auto& s = b.at("shape");
      nn::Shape shape{s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>(), s.at(3).get<int>()};
      ck.blocks.push_back({b.at("name").get<std::string>(), shape, {}});
      expected += shape.size() * 4;
    }
    if (r.remaining() != expected) {
      throw FormatError("parameter payload length mismatch: manifest needs " + std::to_string(expected) +
                            " bytes, file has " + std::to_string(r.remaining()),
                        r.position());
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what(), manifest_at);
  }
  for (auto& b : ck.blocks) {
    b.values.resize(b.shape.size());
    r.f32s(b.values);
  }
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(ck));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

void require_compatible(const Checkpoint& ck, const std::string& kind, const nlohmann::json& expected) {
  if (ck.kind != kind) throw ConfigError("checkpoint kind is '" + ck.kind + "', expected '" + kind + "'");
  if (ck.config != expected) {
    throw ConfigError("checkpoint config mismatch: stored " + ck.config.dump() + ", expected " + expected.dump());
  }
}

void store_parameters(Checkpoint& ck, const std::string& prefix, const nn::ParameterList& params) {
  for (const auto& p : params) ck.add(prefix + "." + p.name, p.tensor);
}

void restore_parameters(const Checkpoint& ck, const std::string& prefix, const nn::ParameterList& params) {
  for (const auto& p : params) {
    const auto& b = ck.block(prefix + "." + p.name);
    if (!(b.shape == p.tensor.shape())) {
      throw ConfigError("checkpoint block " + b.name + " has shape " + b.shape.str() + ", network expects " +
                        p.tensor.shape().str());
    }
    auto dst = nn::Tensor(p.tensor).mutable_value();
    std::copy(b.values.begin(), b.values.end(), dst.begin());
  }
}

void store_optimizer(Checkpoint& ck, const std::string& prefix, nn::Adam& opt, const nn::ParameterList& params) {
  ck.extra[prefix + ".steps"] = opt.steps();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ck.add(prefix + ".m." + params[i].name, params[i].tensor.shape(), opt.first_moments()[i]);
    ck.add(prefix + ".v." + params[i].name, params[i].tensor.shape(), opt.second_moments()[i]);
  }
}

void restore_optimizer(const Checkpoint& ck, const std::string& prefix, nn::Adam& opt,
                       const nn::ParameterList& params) {
  opt.set_steps(ck.extra.at(prefix + ".steps").get<long long>());
  for (std::size_t i = 0; i < params.size(); ++i) {
    opt.first_moments()[i] = ck.block(prefix + ".m." + params[i].name).values;
    opt.second_moments()[i] = ck.block(prefix + ".v." + params[i].name).values;
  }
}

}  // namespace xmodal
