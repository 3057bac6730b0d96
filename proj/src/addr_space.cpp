#include "ibex/addr_space.hpp"

#include <bit>
#include <string>

namespace ibex {

namespace {

constexpr std::uint64_t align_up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("device layout: " + what);
}

bool page_aligned(std::uint64_t v) { return v % kPageSize == 0; }

bool overlaps(const Region& a, const Region& b) {
  return a.size && b.size && a.base < b.end() && b.base < a.end();
}

}  // namespace

std::string_view to_string(RegionKind k) {
  switch (k) {
    case RegionKind::Metadata: return "metadata";
    case RegionKind::Activity: return "activity";
    case RegionKind::Compressed: return "compressed";
    case RegionKind::Promoted: return "promoted";
    case RegionKind::Unmapped: return "unmapped";
  }
  return "?";
}

DeviceLayout DeviceLayout::make(const LayoutParams& p) {
  DeviceLayout l;
  l.physical_capacity_ = p.physical_capacity;
  l.format_ = p.metadata_format;
  l.sub_region_size_ = p.sub_region_size;

  require(p.physical_capacity > 0 && p.physical_capacity <= 2 * TiB,
          "physical_capacity must be in (0, 2TB] (41-bit addressing)");
  require(std::has_single_bit(p.sub_region_size) && p.sub_region_size >= kPageSize,
          "sub_region_size must be a power of two >= 4KB");
  require(p.compressed_size > 0 && p.compressed_size % p.sub_region_size == 0,
          "compressed_size must be a positive multiple of sub_region_size");
  require(p.promoted_size > 0 && page_aligned(p.promoted_size), "promoted_size must be a positive multiple of 4KB");

  l.advertised_ = p.advertised_ospa_capacity ? p.advertised_ospa_capacity : 2 * p.compressed_size;
  require(page_aligned(l.advertised_), "advertised_ospa_capacity must be a multiple of 4KB");
  require(l.advertised_ / kPageSize <= (1ull << 30), "advertised_ospa_capacity exceeds the 30-bit OSPN range");
  l.sub_region_count_ = static_cast<std::uint32_t>(p.compressed_size / p.sub_region_size);

  const std::uint64_t pages = l.advertised_ / kPageSize;
  const std::uint64_t meta_bits = pages * metadata_pitch_bits(p.metadata_format);
  const std::uint64_t meta_size = align_up((meta_bits + 7) / 8, kPageSize);
  const std::uint64_t act_size = align_up(p.promoted_size / kPageSize * 4, kPageSize);

  auto place = [](std::uint64_t requested, std::uint64_t cursor) {
    return requested == LayoutParams::kAutoBase ? cursor : requested;
  };
  std::uint64_t cursor = 0;
  l.metadata_ = {place(p.metadata_base, cursor), meta_size};
  cursor = l.metadata_.end();
  l.activity_ = {place(p.activity_base, cursor), act_size};
  cursor = l.activity_.end();
  l.compressed_ = {place(p.compressed_base, cursor), p.compressed_size};
  cursor = l.compressed_.end();
  l.promoted_ = {place(p.promoted_base, cursor), p.promoted_size};

  for (const Region* r : {&l.metadata_, &l.activity_, &l.compressed_, &l.promoted_}) {
    require(page_aligned(r->base), "region bases must be 4KB-aligned");
    require(r->end() <= l.physical_capacity_, "regions exceed physical_capacity");
  }
  const Region* all[] = {&l.metadata_, &l.activity_, &l.compressed_, &l.promoted_};
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) require(!overlaps(*all[i], *all[j]), "regions must be disjoint");
  return l;
}

Mpa DeviceLayout::metadata_mpa(std::uint64_t ospn) const {
  if (ospn >= page_count()) throw AddressFault("ospn " + std::to_string(ospn) + " beyond advertised capacity");
  return Mpa{metadata_.base + ospn * metadata_pitch_bits(format_) / 8};
}

LineSpan DeviceLayout::metadata_lines(std::uint64_t ospn) const {
  if (ospn >= page_count()) throw AddressFault("ospn " + std::to_string(ospn) + " beyond advertised capacity");
  const std::uint64_t first_bit = ospn * metadata_pitch_bits(format_);
  const std::uint64_t last_bit = first_bit + metadata_entry_bits(format_) - 1;
  return {first_bit / (kLineSize * 8), last_bit / (kLineSize * 8)};
}

DeviceLayout::OspnRange DeviceLayout::ospns_in_metadata_line(std::uint64_t line) const {
  const std::uint64_t pitch = metadata_pitch_bits(format_);
  const std::uint64_t width = metadata_entry_bits(format_);
  const std::uint64_t line_first = line * kLineSize * 8;
  const std::uint64_t line_last = line_first + kLineSize * 8 - 1;
  // entry k spans [k*pitch, k*pitch + width - 1]
  const std::uint64_t first = line_first >= width ? (line_first - width) / pitch + 1 : 0;
  std::uint64_t last = line_last / pitch;
  if (last >= page_count()) last = page_count() - 1;
  return {first, last};
}

std::uint64_t DeviceLayout::sub_region_base(std::uint32_t sub_region) const {
  if (sub_region >= sub_region_count_) throw EncodingError("sub-region " + std::to_string(sub_region) + " out of range");
  return compressed_.base + std::uint64_t{sub_region} * sub_region_size_;
}

std::uint32_t DeviceLayout::chunk_index(Mpa mpa, std::uint32_t sub_region) const {
  const std::uint64_t base = sub_region_base(sub_region);
  if (mpa.value % kChunkSize != 0) throw EncodingError("C-chunk address is not 512B-aligned");
  if (mpa.value < base || mpa.value >= base + sub_region_size_)
    throw EncodingError("C-chunk address outside sub-region " + std::to_string(sub_region));
  return static_cast<std::uint32_t>((mpa.value - base) >> 9);
}

Mpa DeviceLayout::chunk_mpa(std::uint32_t sub_region, std::uint32_t index) const {
  if (index >= chunks_per_sub_region()) throw EncodingError("C-chunk index out of range");
  return Mpa{sub_region_base(sub_region) + (std::uint64_t{index} << 9)};
}

Mpa DeviceLayout::pchunk_mpa(std::uint64_t index) const {
  if (index >= pchunk_count()) throw EncodingError("P-chunk index out of range");
  return Mpa{promoted_.base + index * kPageSize};
}

std::uint64_t DeviceLayout::pchunk_index(Mpa mpa) const {
  if (mpa.value % kPageSize != 0 || !promoted_.contains(mpa.value))
    throw EncodingError("address is not a P-chunk of the promoted region");
  return (mpa.value - promoted_.base) / kPageSize;
}

RegionKind DeviceLayout::classify(Mpa mpa) const {
  if (metadata_.contains(mpa.value)) return RegionKind::Metadata;
  if (activity_.contains(mpa.value)) return RegionKind::Activity;
  if (compressed_.contains(mpa.value)) return RegionKind::Compressed;
  if (promoted_.contains(mpa.value)) return RegionKind::Promoted;
  return RegionKind::Unmapped;
}

std::uint32_t pchunk_pointer(Mpa mpa) {
  if (mpa.value % kPageSize != 0) throw EncodingError("P-chunk address is not 4KB-aligned");
  if (mpa.value >= 2 * TiB) throw EncodingError("P-chunk address beyond the 41-bit space");
  return static_cast<std::uint32_t>(mpa.value >> 12);
}

Mpa pchunk_pointer_mpa(std::uint32_t pointer) {
  if (pointer >= (1u << 29)) throw DecodeError("P-chunk pointer exceeds 29 bits");
  return Mpa{std::uint64_t{pointer} << 12};
}

}  // namespace ibex
