#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xmodal/nn/layers.hpp"

namespace xmodal {

/// Checkpoint container "XMCK":
///   bytes 0-3   magic "XMCK"
///   bytes 4-7   u32 LE container format version (1)
///   bytes 8-11  u32 LE manifest byte length M
///   next M      UTF-8 JSON manifest
///   remainder   raw LE f32 blocks, one per manifest "blocks" entry, in order
/// The manifest carries kind, format_version, config, step, seed and any
/// extra state; each block entry is {"name", "shape": [n, c, h, w]}.
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct CheckpointBlock {
  std::string name;
  nn::Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::string kind;  ///< network-kind tag, e.g. "translator" or "res_unet"
  nlohmann::json config;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  nlohmann::json extra = nlohmann::json::object();
  std::vector<CheckpointBlock> blocks;

  void add(const std::string& name, const nn::Tensor& t);
  void add(const std::string& name, nn::Shape shape, std::span<const float> values);
  [[nodiscard]] const CheckpointBlock& block(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws ConfigError unless kind matches and `expected` equals the stored config.
void require_compatible(const Checkpoint& ck, const std::string& kind, const nlohmann::json& expected);

/// Copy blocks back into a parameter list (names and shapes must match).
void restore_parameters(const Checkpoint& ck, const std::string& prefix, const nn::ParameterList& params);
void store_parameters(Checkpoint& ck, const std::string& prefix, const nn::ParameterList& params);

/// Adam moments and step counter under `prefix`.
void store_optimizer(Checkpoint& ck, const std::string& prefix, nn::Adam& opt, const nn::ParameterList& params);
void restore_optimizer(const Checkpoint& ck, const std::string& prefix, nn::Adam& opt,
                       const nn::ParameterList& params);

}  // namespace xmodal
