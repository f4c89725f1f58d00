#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "xmodal/errors.hpp"

namespace xmodal::byteio {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) noexcept {
  if constexpr (std::endian::native == std::endian::big) {
    auto raw = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
    std::reverse(raw.begin(), raw.end());
    return std::bit_cast<T>(raw);
  } else {
    return v;
  }
}

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { put(to_little(v)); }
  void u64(std::uint64_t v) { put(to_little(v)); }
  void f32(float v) { put(to_little(std::bit_cast<std::uint32_t>(v))); }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void text(const std::string& s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void f32s(std::span<const float> vs) {
    const std::size_t at = buf_.size();
    buf_.resize(at + vs.size() * 4);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(buf_.data() + at, vs.data(), vs.size() * 4);
    } else {
      for (std::size_t i = 0; i < vs.size(); ++i) {
        const auto le = to_little(std::bit_cast<std::uint32_t>(vs[i]));
        std::memcpy(buf_.data() + at + 4 * i, &le, 4);
      }
    }
  }
  [[nodiscard]] std::vector<std::uint8_t>& buffer() noexcept { return buf_; }

 private:
  template <typename T>
  void put(T v) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf_.insert(buf_.end(), raw, raw + sizeof(T));
  }
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { need(1, "u8"); return bytes_[pos_++]; }
  std::uint32_t u32() { return to_little(get<std::uint32_t>("u32")); }
  std::uint64_t u64() { return to_little(get<std::uint64_t>("u64")); }
  float f32() { return std::bit_cast<float>(to_little(get<std::uint32_t>("f32"))); }
  std::string text(std::size_t n) {
    need(n, "text");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void f32s(std::span<float> out) {
    need(out.size() * 4, "float block");
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), bytes_.data() + pos_, out.size() * 4);
      pos_ += out.size() * 4;
    } else {
      for (auto& v : out) v = f32();
    }
  }
  [[nodiscard]] std::size_t position() const noexcept { return pos_; }
  [[nodiscard]] std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated data while reading ") + what, pos_);
    }
  }
  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace xmodal::byteio
