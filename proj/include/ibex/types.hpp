#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ibex {

// Simulated time in picoseconds.
using Tick = std::uint64_t;

inline constexpr std::uint64_t kPageSize = 4096;
inline constexpr std::uint64_t kChunkSize = 512;
inline constexpr std::uint64_t kBlockSize = 1024;
inline constexpr std::uint64_t kLineSize = 64;
inline constexpr unsigned kChunksPerPage = kPageSize / kChunkSize;
inline constexpr unsigned kBlocksPerPage = kPageSize / kBlockSize;
inline constexpr unsigned kLinesPerPage = kPageSize / kLineSize;
inline constexpr unsigned kLinesPerBlock = kBlockSize / kLineSize;
inline constexpr unsigned kLinesPerChunk = kChunkSize / kLineSize;

static_assert(kChunkSize * 8 == kPageSize);
static_assert(kBlockSize * 4 == kPageSize);

using Line = std::array<std::uint8_t, kLineSize>;

/// OS-visible physical address, as presented by the host.
struct Ospa {
  std::uint64_t value = 0;
  constexpr std::uint64_t ospn() const { return value >> 12; }
  constexpr std::uint64_t page_offset() const { return value & (kPageSize - 1); }
  friend constexpr bool operator==(Ospa, Ospa) = default;
};

/// Memory physical address inside the device.
struct Mpa {
  std::uint64_t value = 0;
  friend constexpr bool operator==(Mpa, Mpa) = default;
  friend constexpr auto operator<=>(Mpa, Mpa) = default;
};

/// Two-bit storage class of a page (naive format) or a 1KB block (co-located
/// and compact formats). Zero encodes as 0 so zeroed metadata decodes as zero
/// pages.
enum class PageType : std::uint8_t {
  Zero = 0,
  Compressed = 1,
  Promoted = 2,
  Incompressible = 3,
};

std::string_view to_string(PageType t);

/// On-device metadata entry layout.
enum class MetadataFormat : std::uint8_t {
  Naive,      // 265 bits in a 64B slot, one page type
  Colocated,  // 283 bits packed back to back, per-1KB-block descriptors
  Compact,    // 256 bits, sub-region-relative pointers
};

std::string_view to_string(MetadataFormat f);

/// Tag carried by every internal 64B channel access.
enum class Category : std::uint8_t {
  ExternalData,
  MetadataRead,
  MetadataWrite,
  PromotionRead,
  PromotionWrite,
  DemotionRead,
  DemotionWrite,
  ActivityScan,
  ActivityUpdate,
  Allocator,
};
inline constexpr std::size_t kCategoryCount = 10;

std::string_view to_string(Category c);

struct MemoryAccess {
  Mpa mpa;
  bool write = false;
  Category category = Category::ExternalData;
};

// Error hierarchy. The C API maps each to a status code.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TraceError : public Error {
 public:
  using Error::Error;
};

class EncodingError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class AddressFault : public Error {
 public:
  using Error::Error;
};

class CapacityExhausted : public Error {
 public:
  using Error::Error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Simulator-internal invariant broken (double free, etc).
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace ibex
