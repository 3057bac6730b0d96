#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ibex/types.hpp"

namespace ibex {

using Bytes = std::vector<std::uint8_t>;

/// Block compression backend. Backends are deterministic and stateless.
class CompressorBackend {
 public:
  virtual ~CompressorBackend() = default;

  virtual std::string_view name() const = 0;
  /// Compressed stream, or nullopt when the block does not shrink (the caller
  /// stores it raw).
  virtual std::optional<Bytes> compress(std::span<const std::uint8_t> block) const = 0;
  /// Inverse of compress. `stream` may carry trailing chunk padding.
  virtual Bytes decompress(std::span<const std::uint8_t> stream, std::size_t original_size) const = 0;
  /// Fills `out` with content that compresses by roughly `ratio` under this
  /// backend; deterministic in `seed`.
  virtual void synthesize(std::span<std::uint8_t> out, double ratio, std::uint64_t seed) const = 0;
};

/// Byte-oriented LZ77 compressor with a hash-indexed sliding window over the
/// block (LZ4-style token stream: literal run, 16-bit offset, match length).
class LzBackend final : public CompressorBackend {
 public:
  std::string_view name() const override { return "lz"; }
  std::optional<Bytes> compress(std::span<const std::uint8_t> block) const override;
  Bytes decompress(std::span<const std::uint8_t> stream, std::size_t original_size) const override;
  void synthesize(std::span<std::uint8_t> out, double ratio, std::uint64_t seed) const override;
};

/// Size-oracle backend for payload-free traces. Content is synthesized as
/// self-describing 1KB filler blocks carrying their target compressed size;
/// compress emits a stream of exactly that size and decompress regenerates
/// the filler. Anything else fails to compress and is stored raw.
class SizeOracleBackend final : public CompressorBackend {
 public:
  std::string_view name() const override { return "oracle"; }
  std::optional<Bytes> compress(std::span<const std::uint8_t> block) const override;
  Bytes decompress(std::span<const std::uint8_t> stream, std::size_t original_size) const override;
  void synthesize(std::span<std::uint8_t> out, double ratio, std::uint64_t seed) const override;

  /// One filler block of `target` compressed bytes (1..1024).
  static void make_filler(std::span<std::uint8_t, kBlockSize> out, std::uint16_t target, std::uint32_t seed);
};

std::unique_ptr<CompressorBackend> make_backend(std::string_view name);

/// Compression engine timing: cycles charged per 1KB of input, scaled
/// linearly with size (throughput model).
struct LatencyModel {
  std::uint64_t compress_cycles_per_kb = 256;   // 4 B/cycle
  std::uint64_t decompress_cycles_per_kb = 64;  // 16 B/cycle

  std::uint64_t compress_cycles(std::size_t bytes) const {
    return (bytes * compress_cycles_per_kb + kBlockSize - 1) / kBlockSize;
  }
  std::uint64_t decompress_cycles(std::size_t bytes) const {
    return (bytes * decompress_cycles_per_kb + kBlockSize - 1) / kBlockSize;
  }
};

enum class CompressionMode : std::uint8_t { Page4k, Colocated1k };

std::string_view to_string(CompressionMode m);

struct BlockSlot {
  PageType type = PageType::Zero;
  std::uint16_t raw_size = 0;      // compressed bytes before alignment
  std::uint8_t size_code = 0;      // block_sz field
  std::uint16_t aligned_size = 0;  // bytes occupied in the packed stream
  std::uint16_t start_offset = 0;
  bool stored = false;             // has bytes in the C-chunk stream
};

/// Where each 1KB block sits inside a page's packed C-chunk stream.
struct PackedPageLayout {
  CompressionMode mode = CompressionMode::Colocated1k;
  std::array<BlockSlot, kBlocksPerPage> blocks{};
  std::uint8_t chunk_count = 0;
  std::uint16_t stream_bytes = 0;  // page4k: compressed page size

  PageType page_type() const;
};

/// Rebuilds offsets from block types and size codes alone. `shadow_valid`
/// says whether promoted blocks still have their compressed copy stored.
PackedPageLayout layout_from_descriptors(std::span<const PageType, 4> types,
                                         std::span<const std::uint8_t, 4> size_codes, bool shadow_valid);

struct CompressedPage {
  PackedPageLayout layout;
  Bytes image;  // chunk_count * 512 bytes
};

/// Compresses a whole page. Page4k: one stream over 4KB. Colocated1k: four
/// independent 1KB blocks packed at 128B alignment in block order; a page
/// whose packed form would need all eight chunks is stored raw instead.
CompressedPage classify_and_compress(std::span<const std::uint8_t, kPageSize> page, CompressionMode mode,
                                     const CompressorBackend& backend);

/// Chunk ordinals covering block `block` of a stored stream.
std::vector<unsigned> blocks_to_fetch(const PackedPageLayout& layout, unsigned block);

/// Recovers block `block` (kBlockSize bytes) or, in page4k mode with
/// block == 0, the whole page, from the chunk image.
Bytes extract_block(const PackedPageLayout& layout, std::span<const std::uint8_t> image, unsigned block,
                    const CompressorBackend& backend);

bool all_zero(std::span<const std::uint8_t> bytes);

}  // namespace ibex
