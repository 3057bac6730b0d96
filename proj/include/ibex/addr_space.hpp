#pragma once

#include <cstdint>
#include <string_view>

#include "ibex/types.hpp"

namespace ibex {

inline constexpr std::uint64_t KiB = 1024ull;
inline constexpr std::uint64_t MiB = 1024ull * KiB;
inline constexpr std::uint64_t GiB = 1024ull * MiB;
inline constexpr std::uint64_t TiB = 1024ull * GiB;

enum class RegionKind : std::uint8_t { Metadata, Activity, Compressed, Promoted, Unmapped };

std::string_view to_string(RegionKind k);

struct Region {
  std::uint64_t base = 0;
  std::uint64_t size = 0;
  constexpr std::uint64_t end() const { return base + size; }
  constexpr bool contains(std::uint64_t addr) const { return addr >= base && addr < end(); }
};

/// Inputs to DeviceLayout::make. Zero-valued fields take defaults; a base of
/// kAutoBase places the region right after the previous one.
struct LayoutParams {
  static constexpr std::uint64_t kAutoBase = ~0ull;

  std::uint64_t physical_capacity = 2 * TiB;
  std::uint64_t compressed_size = 128 * GiB;
  std::uint64_t sub_region_size = 128 * GiB;
  std::uint64_t promoted_size = 512 * MiB;
  std::uint64_t advertised_ospa_capacity = 0;  // 0: twice compressed_size
  MetadataFormat metadata_format = MetadataFormat::Compact;

  std::uint64_t metadata_base = kAutoBase;
  std::uint64_t activity_base = kAutoBase;
  std::uint64_t compressed_base = kAutoBase;
  std::uint64_t promoted_base = kAutoBase;
};

/// Bit pitch of one metadata entry in the metadata region.
constexpr unsigned metadata_pitch_bits(MetadataFormat f) {
  switch (f) {
    case MetadataFormat::Naive: return 512;
    case MetadataFormat::Colocated: return 283;
    case MetadataFormat::Compact: return 256;
  }
  return 512;
}

/// Used bits of one metadata entry.
constexpr unsigned metadata_entry_bits(MetadataFormat f) {
  switch (f) {
    case MetadataFormat::Naive: return 265;
    case MetadataFormat::Colocated: return 283;
    case MetadataFormat::Compact: return 256;
  }
  return 512;
}

/// Inclusive range of 64B metadata lines (numbered from metadata_base)
/// touched by one entry.
struct LineSpan {
  std::uint64_t first = 0;
  std::uint64_t last = 0;
  constexpr unsigned count() const { return static_cast<unsigned>(last - first + 1); }
};

/// Immutable map of the device's physical address space: metadata, page
/// activity, compressed and promoted regions, plus all chunk arithmetic.
class DeviceLayout {
 public:
  static DeviceLayout make(const LayoutParams& params);

  const Region& metadata() const { return metadata_; }
  const Region& activity() const { return activity_; }
  const Region& compressed() const { return compressed_; }
  const Region& promoted() const { return promoted_; }

  std::uint64_t physical_capacity() const { return physical_capacity_; }
  std::uint64_t advertised_ospa_capacity() const { return advertised_; }
  std::uint64_t page_count() const { return advertised_ / kPageSize; }
  std::uint64_t sub_region_size() const { return sub_region_size_; }
  std::uint32_t sub_region_count() const { return sub_region_count_; }
  std::uint64_t chunks_per_sub_region() const { return sub_region_size_ / kChunkSize; }
  std::uint64_t pchunk_count() const { return promoted_.size / kPageSize; }
  MetadataFormat metadata_format() const { return format_; }

  /// Address of the first byte of the metadata entry for `ospn`.
  Mpa metadata_mpa(std::uint64_t ospn) const;
  /// 64B metadata lines holding the entry for `ospn`.
  LineSpan metadata_lines(std::uint64_t ospn) const;
  /// Pages whose entries overlap metadata line `line`.
  struct OspnRange {
    std::uint64_t first = 0;
    std::uint64_t last = 0;  // inclusive
  };
  OspnRange ospns_in_metadata_line(std::uint64_t line) const;
  Mpa metadata_line_mpa(std::uint64_t line) const { return Mpa{metadata_.base + line * kLineSize}; }

  std::uint64_t sub_region_base(std::uint32_t sub_region) const;
  /// Sub-region-relative index of a 512B C-chunk.
  std::uint32_t chunk_index(Mpa mpa, std::uint32_t sub_region) const;
  Mpa chunk_mpa(std::uint32_t sub_region, std::uint32_t index) const;

  /// P-chunk index (0-based within the promoted region).
  Mpa pchunk_mpa(std::uint64_t index) const;
  std::uint64_t pchunk_index(Mpa mpa) const;

  Mpa activity_line_mpa(std::uint64_t line) const { return Mpa{activity_.base + line * kLineSize}; }

  RegionKind classify(Mpa mpa) const;

 private:
  std::uint64_t physical_capacity_ = 0;
  std::uint64_t advertised_ = 0;
  std::uint64_t sub_region_size_ = 0;
  std::uint32_t sub_region_count_ = 0;
  MetadataFormat format_ = MetadataFormat::Compact;
  Region metadata_;
  Region activity_;
  Region compressed_;
  Region promoted_;
};

/// 29-bit pointer to a 4KB-aligned P-chunk anywhere in the 41-bit space.
std::uint32_t pchunk_pointer(Mpa mpa);
Mpa pchunk_pointer_mpa(std::uint32_t pointer);

}  // namespace ibex
