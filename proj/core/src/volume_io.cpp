#include "xmodal/volume_io.hpp"

#include <fstream>
#include <string>

#include "xmodal/byteio.hpp"

namespace xmodal {

namespace {

constexpr char kMagic[4] = {'M', 'V', '0', '1'};

void write_header(byteio::Writer& w, std::uint8_t modality, std::uint8_t units, const Dims& d,
                  const Spacing& s) {
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(modality);
  w.u8(units);
  w.u8(0);
  w.u8(0);
  w.u32(static_cast<std::uint32_t>(d.depth));
  w.u32(static_cast<std::uint32_t>(d.height));
  w.u32(static_cast<std::uint32_t>(d.width));
  w.f32(s.dz);
  w.f32(s.dy);
  w.f32(s.dx);
}

struct Header {
  std::uint8_t modality;
  std::uint8_t units;
  Dims dims;
  Spacing spacing;
};

Header read_header(byteio::Reader& r, std::size_t total) {
  if (total < kMv01HeaderBytes) {
    throw FormatError("file too short for MV01 header: " + std::to_string(total) + " bytes, need " +
                          std::to_string(kMv01HeaderBytes),
                      total);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (r.u8() != static_cast<std::uint8_t>(kMagic[i])) throw FormatError("bad magic, expected MV01", i);
  }
  Header h{};
  h.modality = r.u8();
  if (h.modality > 2) throw FormatError("unknown modality code " + std::to_string(h.modality), 4);
  h.units = r.u8();
  if (h.units > 2) throw FormatError("unknown units code " + std::to_string(h.units), 5);
  if (r.u8() != 0 || r.u8() != 0) throw FormatError("reserved bytes must be zero", 6);
  const auto d = r.u32();
  const auto hh = r.u32();
  const auto ww = r.u32();
  if (d == 0 || hh == 0 || ww == 0 || d > (1U << 20) || hh > (1U << 20) || ww > (1U << 20)) {
    throw FormatError("invalid dims " + std::to_string(d) + "x" + std::to_string(hh) + "x" + std::to_string(ww), 8);
  }
  h.dims = {static_cast<int>(d), static_cast<int>(hh), static_cast<int>(ww)};
  h.spacing.dz = r.f32();
  h.spacing.dy = r.f32();
  h.spacing.dx = r.f32();
  const std::size_t expected = h.dims.voxels() * 4;
  if (r.remaining() != expected) {
    throw FormatError("payload length mismatch: header dims need " + std::to_string(expected) +
                          " bytes, file has " + std::to_string(r.remaining()),
                      kMv01HeaderBytes);
  }
  return h;
}

}  // namespace

std::vector<std::uint8_t> encode_volume(const Volume& v) {
  byteio::Writer w;
  write_header(w, static_cast<std::uint8_t>(v.modality()), static_cast<std::uint8_t>(v.units()), v.dims(),
               v.spacing());
  w.f32s(v.data());
  return std::move(w.buffer());
}

Volume decode_volume(std::span<const std::uint8_t> bytes) {
  byteio::Reader r(bytes);
  const Header h = read_header(r, bytes.size());
  std::vector<float> data(h.dims.voxels());
  r.f32s(data);
  return Volume(h.dims, h.spacing, static_cast<Modality>(h.modality), static_cast<Units>(h.units),
                std::move(data));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_volume(const Volume& v, const std::filesystem::path& path) {
  write_file_bytes(path, encode_volume(v));
}

Volume read_volume(const std::filesystem::path& path) { return decode_volume(read_file_bytes(path)); }

void write_mask(const MaskVolume& m, const std::filesystem::path& path) {
  byteio::Writer w;
  write_header(w, static_cast<std::uint8_t>(Modality::MR), static_cast<std::uint8_t>(Units::ARBITRARY),
               m.dims(), m.spacing());
  std::vector<float> values(m.labels().begin(), m.labels().end());
  w.f32s(values);
  write_file_bytes(path, w.buffer());
}

MaskVolume read_mask(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  byteio::Reader r(bytes);
  const Header h = read_header(r, bytes.size());
  if (h.units != static_cast<std::uint8_t>(Units::ARBITRARY)) {
    throw FormatError("mask files must use ARBITRARY units", 5);
  }
  std::vector<std::uint8_t> labels(h.dims.voxels());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t at = r.position();
    const float v = r.f32();
    if (v != 0.0F && v != 1.0F) throw FormatError("mask value must be 0 or 1", at);
    labels[i] = static_cast<std::uint8_t>(v);
  }
  return MaskVolume(h.dims, h.spacing, std::move(labels));
}

}  // namespace xmodal
