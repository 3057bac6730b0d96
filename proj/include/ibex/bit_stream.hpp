#pragma once

#include <cstdint>
#include <span>

#include "ibex/types.hpp"

namespace ibex {

// Little-endian bit packing: stream bit k lives in byte k/8 at bit k%8.

class BitWriter {
 public:
  explicit BitWriter(std::span<std::uint8_t> out) : out_(out) {
    for (auto& b : out_) b = 0;
  }

  void put(std::uint64_t value, unsigned width) {
    if (width < 64 && (value >> width) != 0) throw EncodingError("field value overflows its bit width");
    if (pos_ + width > out_.size() * 8) throw EncodingError("bit stream overflow");
    for (unsigned i = 0; i < width; ++i, ++pos_)
      if ((value >> i) & 1u) out_[pos_ / 8] |= static_cast<std::uint8_t>(1u << (pos_ % 8));
  }

  std::size_t bits_written() const { return pos_; }

 private:
  std::span<std::uint8_t> out_;
  std::size_t pos_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint64_t get(unsigned width) {
    if (pos_ + width > in_.size() * 8) throw DecodeError("bit stream underflow");
    std::uint64_t v = 0;
    for (unsigned i = 0; i < width; ++i, ++pos_)
      if ((in_[pos_ / 8] >> (pos_ % 8)) & 1u) v |= std::uint64_t{1} << i;
    return v;
  }

  std::size_t bits_read() const { return pos_; }

  /// True when every bit from the current position to the end is zero.
  bool rest_is_zero() const {
    for (std::size_t p = pos_; p < in_.size() * 8; ++p)
      if ((in_[p / 8] >> (p % 8)) & 1u) return false;
    return true;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace ibex
