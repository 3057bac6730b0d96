#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "ibex/types.hpp"

namespace ibex {

// Field widths. The totals are fixed by the hardware formats: the naive entry
// uses 265 of its 512 bits, the co-located entry 283 bits, and the compact
// entry exactly one 32B half-line.
namespace field_width {
inline constexpr unsigned kType = 2;
inline constexpr unsigned kNumChunks = 3;
inline constexpr unsigned kWrCntr = 4;
inline constexpr unsigned kBlockSz = 3;
inline constexpr unsigned kSubRegion = 4;
inline constexpr unsigned kFullPointer = 32;     // 41-bit space, 512B granularity
inline constexpr unsigned kChunkIndex = 28;      // 37-bit sub-region, 512B granularity
inline constexpr unsigned kLastPointer = 29;     // 41-bit space, 4KB granularity
}  // namespace field_width

inline constexpr unsigned kNaiveEntryBits =
    field_width::kType + field_width::kNumChunks + field_width::kWrCntr + 8 * field_width::kFullPointer;
inline constexpr unsigned kColocatedEntryBits = 4 * (field_width::kType + field_width::kBlockSz) +
                                                field_width::kNumChunks + field_width::kWrCntr +
                                                8 * field_width::kFullPointer;
inline constexpr unsigned kCompactEntryBits = 4 * (field_width::kType + field_width::kBlockSz) +
                                              field_width::kNumChunks + field_width::kWrCntr +
                                              field_width::kSubRegion + 7 * field_width::kChunkIndex +
                                              field_width::kLastPointer;
static_assert(kNaiveEntryBits == 265);
static_assert(kColocatedEntryBits == 283);
static_assert(kCompactEntryBits == 256);

inline constexpr unsigned kWrCntrThreshold = 16;

/// One page type, 3-bit chunk count (count-1), eight 32-bit chunk pointers
/// holding mpa >> 9. A promoted page keeps its P-chunk in ptr_chunk[7].
struct NaiveEntry {
  PageType type = PageType::Zero;
  std::uint8_t num_chunks = 0;
  std::uint8_t wr_cntr = 0;
  std::array<std::uint32_t, 8> ptr_chunk{};
  friend bool operator==(const NaiveEntry&, const NaiveEntry&) = default;
};

/// Per-1KB-block [type, size] pairs in place of the single type field.
struct ColocatedEntry {
  std::array<PageType, 4> block_type{};
  std::array<std::uint8_t, 4> block_sz{};
  std::uint8_t num_chunks = 0;
  std::uint8_t wr_cntr = 0;
  std::array<std::uint32_t, 8> ptr_chunk{};
  friend bool operator==(const ColocatedEntry&, const ColocatedEntry&) = default;
};

/// 32B entry: C-chunk pointers are 28-bit indices into the sub-region named
/// by `sub_region`; ptr_last holds a 29-bit P-chunk pointer for promoted
/// pages or the eighth C-chunk index for incompressible ones.
struct CompactEntry {
  std::array<PageType, 4> block_type{};
  std::array<std::uint8_t, 4> block_sz{};
  std::uint8_t num_chunks = 0;
  std::uint8_t wr_cntr = 0;
  std::uint8_t sub_region = 0;
  std::array<std::uint32_t, 7> ptr_chunk{};
  std::uint32_t ptr_last = 0;
  friend bool operator==(const CompactEntry&, const CompactEntry&) = default;
};

/// 4B page activity record, one per P-chunk.
struct ActivityEntry {
  bool allocated = false;
  std::uint32_t ospn = 0;
  bool referenced = false;
  friend bool operator==(const ActivityEntry&, const ActivityEntry&) = default;
};

template <std::size_t N>
struct EncodedEntry {
  std::array<std::uint8_t, N> bytes{};
  std::size_t bits = 0;
};

EncodedEntry<64> encode_naive(const NaiveEntry& e);
NaiveEntry decode_naive(std::span<const std::uint8_t> bytes);

EncodedEntry<36> encode_colocated(const ColocatedEntry& e);
ColocatedEntry decode_colocated(std::span<const std::uint8_t> bytes);

EncodedEntry<32> encode_compact(const CompactEntry& e);
CompactEntry decode_compact(std::span<const std::uint8_t> bytes);

std::uint32_t pack_activity(const ActivityEntry& e);
ActivityEntry unpack_activity(std::uint32_t word);

/// Interpretation of the num_chunks field given the page's block types.
struct PointerUsage {
  unsigned chunk_pointers = 0;  // valid C-chunk pointers, in slot order
  bool pchunk = false;          // a P-chunk pointer is present
  bool dirty = false;           // promoted page without shadow copies
};

/// Checks that types, block sizes and num_chunks form a legal combination.
/// Throws `Err` with a description when they do not.
template <class Err>
PointerUsage pointer_usage(std::span<const PageType, 4> block_type, std::span<const std::uint8_t, 4> block_sz,
                           std::uint8_t num_chunks);
PointerUsage pointer_usage_naive(PageType type, std::uint8_t num_chunks);

struct ChunkRequirement {
  unsigned chunk_count = 0;
  PageType type = PageType::Zero;
  friend bool operator==(const ChunkRequirement&, const ChunkRequirement&) = default;
};

/// C-chunks needed to hold a whole 4KB page compressed to `compressed_size`.
ChunkRequirement required_chunks(std::size_t compressed_size);

/// 3-bit size code s for a compressed 1KB block: aligned size (s+1)*128B.
std::uint8_t encode_block_sz(std::size_t compressed_block_size);
constexpr std::size_t aligned_block_size(std::uint8_t s) { return (std::size_t{s} + 1) * 128; }

}  // namespace ibex
