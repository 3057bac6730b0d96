#include "ibex/metadata_codec.hpp"

#include <algorithm>
#include <string>

#include "ibex/bit_stream.hpp"

namespace ibex {

namespace fw = field_width;

namespace {

template <class Err>
void check(bool ok, const char* what) {
  if (!ok) throw Err(std::string("metadata entry: ") + what);
}

template <class Err>
void check_slots(std::span<const std::uint32_t> slots, unsigned used, const char* what) {
  for (std::size_t i = used; i < slots.size(); ++i) check<Err>(slots[i] == 0, what);
}

PageType to_type(std::uint64_t v) { return static_cast<PageType>(v & 3u); }

// Naive and co-located formats share the pointer-slot rule: shadows or stored
// chunks occupy slots [0, n) and a P-chunk pointer lives in slot 7.
template <class Err>
void check_full_pointer_slots(const std::array<std::uint32_t, 8>& ptr, const PointerUsage& u) {
  if (u.pchunk) {
    check_slots<Err>(std::span(ptr).first(7), u.chunk_pointers, "unused chunk pointer slot is not zero");
    check<Err>(ptr[7] % 8 == 0, "P-chunk pointer is not 4KB-aligned");
  } else {
    check_slots<Err>(ptr, u.chunk_pointers, "unused chunk pointer slot is not zero");
  }
}

}  // namespace

std::string_view to_string(PageType t) {
  switch (t) {
    case PageType::Zero: return "zero";
    case PageType::Compressed: return "compressed";
    case PageType::Promoted: return "promoted";
    case PageType::Incompressible: return "incompressible";
  }
  return "?";
}

std::string_view to_string(MetadataFormat f) {
  switch (f) {
    case MetadataFormat::Naive: return "naive";
    case MetadataFormat::Colocated: return "colocated";
    case MetadataFormat::Compact: return "compact";
  }
  return "?";
}

PointerUsage pointer_usage_naive(PageType type, std::uint8_t num_chunks) {
  PointerUsage u;
  switch (type) {
    case PageType::Zero:
      check<EncodingError>(num_chunks == 0, "zero page must have num_chunks = 0");
      break;
    case PageType::Compressed:
      check<EncodingError>(num_chunks <= 6, "compressed page uses one to seven chunks");
      u.chunk_pointers = num_chunks + 1u;
      break;
    case PageType::Incompressible:
      check<EncodingError>(num_chunks == 7, "incompressible page must use eight chunks");
      u.chunk_pointers = 8;
      break;
    case PageType::Promoted:
      u.pchunk = true;
      u.dirty = num_chunks == 7;
      u.chunk_pointers = u.dirty ? 0u : num_chunks + 1u;
      break;
  }
  return u;
}

template <class Err>
PointerUsage pointer_usage(std::span<const PageType, 4> type, std::span<const std::uint8_t, 4> sz,
                           std::uint8_t num_chunks) {
  check<Err>(num_chunks <= 7, "num_chunks exceeds 3 bits");
  bool promoted = false;
  bool all_zero = true;
  std::size_t stored = 0;
  for (int i = 0; i < 4; ++i) {
    check<Err>(sz[i] <= 7, "block_sz exceeds 3 bits");
    if (type[i] == PageType::Zero) check<Err>(sz[i] == 0, "zero block must have block_sz = 0");
    if (type[i] == PageType::Incompressible) check<Err>(sz[i] == 7, "incompressible block must have block_sz = 7");
    if (type[i] == PageType::Promoted) promoted = true;
    if (type[i] != PageType::Zero) {
      all_zero = false;
      stored += aligned_block_size(sz[i]);
    }
  }
  const unsigned needed = static_cast<unsigned>((stored + kChunkSize - 1) / kChunkSize);

  PointerUsage u;
  if (promoted) {
    u.pchunk = true;
    if (num_chunks == 7) {
      u.dirty = true;
      for (int i = 0; i < 4; ++i) {
        check<Err>(type[i] == PageType::Promoted || type[i] == PageType::Zero,
                   "dirty promoted page may only hold promoted or zero blocks");
        check<Err>(sz[i] == 0, "dirty promoted page has no stored block sizes");
      }
      return u;
    }
    u.chunk_pointers = num_chunks + 1u;
    check<Err>(u.chunk_pointers == needed, "num_chunks disagrees with stored block sizes");
    return u;
  }
  if (all_zero) {
    check<Err>(num_chunks == 0, "zero page must have num_chunks = 0");
    return u;
  }
  u.chunk_pointers = num_chunks + 1u;
  check<Err>(u.chunk_pointers == needed, "num_chunks disagrees with stored block sizes");
  if (u.chunk_pointers == 8)
    for (int i = 0; i < 4; ++i)
      check<Err>(type[i] == PageType::Incompressible, "an eight-chunk page must be incompressible in every block");
  return u;
}

template PointerUsage pointer_usage<EncodingError>(std::span<const PageType, 4>, std::span<const std::uint8_t, 4>,
                                                   std::uint8_t);
template PointerUsage pointer_usage<DecodeError>(std::span<const PageType, 4>, std::span<const std::uint8_t, 4>,
                                                 std::uint8_t);

// ---- naive --------------------------------------------------------------

EncodedEntry<64> encode_naive(const NaiveEntry& e) {
  check<EncodingError>(e.num_chunks <= 7, "num_chunks exceeds 3 bits");
  check<EncodingError>(e.wr_cntr <= 15, "wr_cntr exceeds 4 bits");
  const PointerUsage u = pointer_usage_naive(e.type, e.num_chunks);
  check_full_pointer_slots<EncodingError>(e.ptr_chunk, u);

  EncodedEntry<64> out;
  BitWriter w(out.bytes);
  w.put(static_cast<unsigned>(e.type), fw::kType);
  w.put(e.num_chunks, fw::kNumChunks);
  w.put(e.wr_cntr, fw::kWrCntr);
  for (auto p : e.ptr_chunk) w.put(p, fw::kFullPointer);
  out.bits = w.bits_written();
  return out;
}

NaiveEntry decode_naive(std::span<const std::uint8_t> bytes) {
  check<DecodeError>(bytes.size() * 8 >= kNaiveEntryBits, "naive entry truncated");
  BitReader r(bytes);
  NaiveEntry e;
  e.type = to_type(r.get(fw::kType));
  e.num_chunks = static_cast<std::uint8_t>(r.get(fw::kNumChunks));
  e.wr_cntr = static_cast<std::uint8_t>(r.get(fw::kWrCntr));
  for (auto& p : e.ptr_chunk) p = static_cast<std::uint32_t>(r.get(fw::kFullPointer));
  check<DecodeError>(r.rest_is_zero(), "reserved bits of naive slot are not zero");
  PointerUsage u;
  try {
    u = pointer_usage_naive(e.type, e.num_chunks);
  } catch (const EncodingError& err) {
    throw DecodeError(err.what());
  }
  check_full_pointer_slots<DecodeError>(e.ptr_chunk, u);
  return e;
}

// ---- co-located -----------------------------------------------------------

EncodedEntry<36> encode_colocated(const ColocatedEntry& e) {
  check<EncodingError>(e.wr_cntr <= 15, "wr_cntr exceeds 4 bits");
  const PointerUsage u = pointer_usage<EncodingError>(e.block_type, e.block_sz, e.num_chunks);
  check_full_pointer_slots<EncodingError>(e.ptr_chunk, u);

  EncodedEntry<36> out;
  BitWriter w(out.bytes);
  for (auto t : e.block_type) w.put(static_cast<unsigned>(t), fw::kType);
  for (auto s : e.block_sz) w.put(s, fw::kBlockSz);
  w.put(e.num_chunks, fw::kNumChunks);
  w.put(e.wr_cntr, fw::kWrCntr);
  for (auto p : e.ptr_chunk) w.put(p, fw::kFullPointer);
  out.bits = w.bits_written();
  return out;
}

ColocatedEntry decode_colocated(std::span<const std::uint8_t> bytes) {
  check<DecodeError>(bytes.size() * 8 >= kColocatedEntryBits, "co-located entry truncated");
  BitReader r(bytes.first(36));
  ColocatedEntry e;
  for (auto& t : e.block_type) t = to_type(r.get(fw::kType));
  for (auto& s : e.block_sz) s = static_cast<std::uint8_t>(r.get(fw::kBlockSz));
  e.num_chunks = static_cast<std::uint8_t>(r.get(fw::kNumChunks));
  e.wr_cntr = static_cast<std::uint8_t>(r.get(fw::kWrCntr));
  for (auto& p : e.ptr_chunk) p = static_cast<std::uint32_t>(r.get(fw::kFullPointer));
  check<DecodeError>(r.rest_is_zero(), "padding bits of co-located entry are not zero");
  const PointerUsage u = pointer_usage<DecodeError>(e.block_type, e.block_sz, e.num_chunks);
  check_full_pointer_slots<DecodeError>(e.ptr_chunk, u);
  return e;
}

// ---- compact --------------------------------------------------------------

namespace {

template <class Err>
void check_compact(const CompactEntry& e, const PointerUsage& u) {
  const unsigned in_slots = std::min(u.chunk_pointers, 7u);
  check_slots<Err>(e.ptr_chunk, in_slots, "unused chunk pointer slot is not zero");
  for (unsigned i = 0; i < in_slots; ++i)
    check<Err>(e.ptr_chunk[i] < (1u << fw::kChunkIndex), "chunk index exceeds 28 bits");
  if (u.pchunk) {
    check<Err>(e.ptr_last < (1u << fw::kLastPointer), "P-chunk pointer exceeds 29 bits");
  } else if (u.chunk_pointers == 8) {
    check<Err>(e.ptr_last < (1u << fw::kChunkIndex), "eighth chunk index exceeds 28 bits");
  } else {
    check<Err>(e.ptr_last == 0, "unused ptr_last is not zero");
  }
  if (u.chunk_pointers == 0) check<Err>(e.sub_region == 0, "sub_region set on a page without C-chunks");
}

}  // namespace

EncodedEntry<32> encode_compact(const CompactEntry& e) {
  check<EncodingError>(e.wr_cntr <= 15, "wr_cntr exceeds 4 bits");
  check<EncodingError>(e.sub_region <= 15, "sub_region exceeds 4 bits");
  const PointerUsage u = pointer_usage<EncodingError>(e.block_type, e.block_sz, e.num_chunks);
  check_compact<EncodingError>(e, u);

  EncodedEntry<32> out;
  BitWriter w(out.bytes);
  for (auto t : e.block_type) w.put(static_cast<unsigned>(t), fw::kType);
  for (auto s : e.block_sz) w.put(s, fw::kBlockSz);
  w.put(e.num_chunks, fw::kNumChunks);
  w.put(e.wr_cntr, fw::kWrCntr);
  w.put(e.sub_region, fw::kSubRegion);
  for (auto p : e.ptr_chunk) w.put(p, fw::kChunkIndex);
  w.put(e.ptr_last, fw::kLastPointer);
  out.bits = w.bits_written();
  return out;
}

CompactEntry decode_compact(std::span<const std::uint8_t> bytes) {
  check<DecodeError>(bytes.size() >= 32, "compact entry truncated");
  BitReader r(bytes.first(32));
  CompactEntry e;
  for (auto& t : e.block_type) t = to_type(r.get(fw::kType));
  for (auto& s : e.block_sz) s = static_cast<std::uint8_t>(r.get(fw::kBlockSz));
  e.num_chunks = static_cast<std::uint8_t>(r.get(fw::kNumChunks));
  e.wr_cntr = static_cast<std::uint8_t>(r.get(fw::kWrCntr));
  e.sub_region = static_cast<std::uint8_t>(r.get(fw::kSubRegion));
  for (auto& p : e.ptr_chunk) p = static_cast<std::uint32_t>(r.get(fw::kChunkIndex));
  e.ptr_last = static_cast<std::uint32_t>(r.get(fw::kLastPointer));
  const PointerUsage u = pointer_usage<DecodeError>(e.block_type, e.block_sz, e.num_chunks);
  check_compact<DecodeError>(e, u);
  return e;
}

// ---- activity -------------------------------------------------------------

std::uint32_t pack_activity(const ActivityEntry& e) {
  if (e.ospn >= (1u << 30)) throw EncodingError("activity entry: ospn exceeds 30 bits");
  return (e.allocated ? 0x8000'0000u : 0u) | (e.ospn << 1) | (e.referenced ? 1u : 0u);
}

ActivityEntry unpack_activity(std::uint32_t word) {
  return ActivityEntry{(word >> 31) != 0, (word >> 1) & ((1u << 30) - 1), (word & 1u) != 0};
}

// ---- sizes ----------------------------------------------------------------

ChunkRequirement required_chunks(std::size_t compressed_size) {
  if (compressed_size > kPageSize)
    throw ContractViolation("compressed size " + std::to_string(compressed_size) + " exceeds the 4KB page");
  if (compressed_size == 0) return {0, PageType::Zero};
  if (compressed_size <= 7 * kChunkSize)
    return {static_cast<unsigned>((compressed_size + kChunkSize - 1) / kChunkSize), PageType::Compressed};
  return {8, PageType::Incompressible};
}

std::uint8_t encode_block_sz(std::size_t size) {
  if (size == 0 || size > kBlockSize)
    throw ContractViolation("compressed block size " + std::to_string(size) + " outside 1..1024");
  return static_cast<std::uint8_t>((size + 127) / 128 - 1);
}

}  // namespace ibex
