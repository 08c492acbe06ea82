#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "claid/error.hpp"

namespace claid::detail {

// Little-endian byte writer, independent of host byte order.
class ByteWriter {
 public:
  explicit ByteWriter(std::size_t reserve = 0) { bytes_.reserve(reserve); }

  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }

  void u32(std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) {
      bytes_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
  }

  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  void f32s(std::span<const float> values) {
    for (float v : values) f32(v);
  }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool magic(std::string_view m) {
    need(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (bytes_[pos_ + i] != static_cast<std::uint8_t>(m[i])) return false;
    }
    pos_ += m.size();
    return true;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }

  void f32s(std::span<float> out) {
    need(out.size() * 4);
    for (float& v : out) v = f32();
  }

  [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw LengthError("truncated payload: need " + std::to_string(n) +
                        " bytes at offset " + std::to_string(pos_) + ", have " +
                        std::to_string(bytes_.size() - pos_));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace claid::detail
