#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "xmodal/volume.hpp"

namespace xmodal {

/// "MV01" container: 8-byte tag block, 3 x u32 dims, 3 x f32 spacing, then
/// D*H*W little-endian f32 voxels with W varying fastest.
inline constexpr std::size_t kMv01HeaderBytes = 32;

std::vector<std::uint8_t> encode_volume(const Volume& v);
Volume decode_volume(std::span<const std::uint8_t> bytes);

void write_volume(const Volume& v, const std::filesystem::path& path);
Volume read_volume(const std::filesystem::path& path);

/// Masks share the container with units ARBITRARY and values in {0, 1}.
/// The modality byte is written as MR (it carries no meaning for labels).
void write_mask(const MaskVolume& m, const std::filesystem::path& path);
MaskVolume read_mask(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace xmodal
