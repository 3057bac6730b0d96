#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "entry_gen.hpp"
#include "ibex/metadata_codec.hpp"

using namespace ibex;
using namespace ibex::fixtures;

namespace {

// Reference packer: fields appended LSB-first from bit 0, in declaration order.
struct RefBits {
  std::vector<bool> bits;
  void put(std::uint64_t v, unsigned w) {
    for (unsigned i = 0; i < w; ++i) bits.push_back((v >> i) & 1);
  }
  std::vector<std::uint8_t> bytes(std::size_t n) const {
    std::vector<std::uint8_t> out(n, 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) out[i / 8] |= std::uint8_t(1u << (i % 8));
    return out;
  }
};

std::vector<std::uint8_t> ref_naive(const NaiveEntry& e) {
  RefBits b;
  b.put(unsigned(e.type), 2);
  b.put(e.num_chunks, 3);
  b.put(e.wr_cntr, 4);
  for (auto p : e.ptr_chunk) b.put(p, 32);
  EXPECT_EQ(b.bits.size(), 265u);
  return b.bytes(64);
}

std::vector<std::uint8_t> ref_colocated(const ColocatedEntry& e) {
  RefBits b;
  for (auto t : e.block_type) b.put(unsigned(t), 2);
  for (auto s : e.block_sz) b.put(s, 3);
  b.put(e.num_chunks, 3);
  b.put(e.wr_cntr, 4);
  for (auto p : e.ptr_chunk) b.put(p, 32);
  EXPECT_EQ(b.bits.size(), 283u);
  return b.bytes(36);
}

std::vector<std::uint8_t> ref_compact(const CompactEntry& e) {
  RefBits b;
  for (auto t : e.block_type) b.put(unsigned(t), 2);
  for (auto s : e.block_sz) b.put(s, 3);
  b.put(e.num_chunks, 3);
  b.put(e.wr_cntr, 4);
  b.put(e.sub_region, 4);
  for (auto p : e.ptr_chunk) b.put(p, 28);
  b.put(e.ptr_last, 29);
  EXPECT_EQ(b.bits.size(), 256u);
  return b.bytes(32);
}

template <std::size_t N>
std::vector<std::uint8_t> as_vec(const EncodedEntry<N>& e) {
  return {e.bytes.begin(), e.bytes.end()};
}

}  // namespace

TEST(MetadataCodec, WidthsMatchHardwareTotals) {
  EXPECT_EQ(encode_naive(NaiveEntry{}).bits, 265u);
  EXPECT_EQ(encode_colocated(ColocatedEntry{}).bits, 283u);
  EXPECT_EQ(encode_compact(CompactEntry{}).bits, 256u);
  EXPECT_EQ(sizeof(EncodedEntry<32>::bytes), 32u);
}

TEST(MetadataCodec, ZeroCompactEntryIsAllZeroBytes) {
  const auto enc = encode_compact(CompactEntry{});
  for (auto b : enc.bytes) EXPECT_EQ(b, 0);
  EXPECT_EQ(decode_compact(enc.bytes), CompactEntry{});
}

TEST(MetadataCodec, NaiveRoundTripMatchesReferenceLayout) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100000; ++i) {
    const NaiveEntry e = random_naive(rng);
    const auto enc = encode_naive(e);
    ASSERT_EQ(as_vec(enc), ref_naive(e)) << i;
    ASSERT_EQ(decode_naive(enc.bytes), e) << i;
  }
}

TEST(MetadataCodec, ColocatedRoundTripMatchesReferenceLayout) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100000; ++i) {
    const ColocatedEntry e = random_colocated(rng);
    const auto enc = encode_colocated(e);
    ASSERT_EQ(as_vec(enc), ref_colocated(e)) << i;
    ASSERT_EQ(decode_colocated(enc.bytes), e) << i;
  }
}

TEST(MetadataCodec, CompactRoundTripMatchesReferenceLayout) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100000; ++i) {
    const CompactEntry e = random_compact(rng);
    const auto enc = encode_compact(e);
    ASSERT_EQ(as_vec(enc), ref_compact(e)) << i;
    ASSERT_EQ(decode_compact(enc.bytes), e) << i;
  }
}

TEST(MetadataCodec, EncodingRejectsOverflowAndInconsistency) {
  NaiveEntry n;
  n.wr_cntr = 16;
  EXPECT_THROW(encode_naive(n), EncodingError);
  n = {};
  n.type = PageType::Compressed;
  n.num_chunks = 7;  // eight chunks is incompressible
  EXPECT_THROW(encode_naive(n), EncodingError);
  n = {};
  n.ptr_chunk[3] = 5;  // zero page with a pointer
  EXPECT_THROW(encode_naive(n), EncodingError);

  CompactEntry c;
  c.block_type = {PageType::Compressed, PageType::Zero, PageType::Zero, PageType::Zero};
  c.block_sz = {3, 0, 0, 0};  // 512B -> one chunk
  c.num_chunks = 1;
  EXPECT_THROW(encode_compact(c), EncodingError);
  c.num_chunks = 0;
  c.ptr_chunk[0] = 1u << 28;
  EXPECT_THROW(encode_compact(c), EncodingError);
  c.ptr_chunk[0] = 9;
  EXPECT_NO_THROW(encode_compact(c));

  ColocatedEntry z;
  z.block_sz[2] = 1;  // zero block with a size
  EXPECT_THROW(encode_colocated(z), EncodingError);
}

TEST(MetadataCodec, DecodingRejectsReservedBits) {
  auto enc = encode_naive(NaiveEntry{});
  enc.bytes[40] = 1;  // bit 320, beyond the 265 used bits
  EXPECT_THROW(decode_naive(enc.bytes), DecodeError);

  auto col = encode_colocated(ColocatedEntry{});
  col.bytes[35] = 0x80;  // padding bit 287
  EXPECT_THROW(decode_colocated(col.bytes), DecodeError);

  // compact: Zero types with num_chunks = 3
  std::array<std::uint8_t, 32> raw{};
  raw[2] = 0x03 << 4;  // bits 20..22
  EXPECT_THROW(decode_compact(raw), DecodeError);
  EXPECT_THROW(decode_compact(std::span<const std::uint8_t>(raw).first(31)), DecodeError);
}

TEST(MetadataCodec, ActivityPacking) {
  EXPECT_EQ(pack_activity({false, 0, false}), 0u);
  const ActivityEntry e{true, 5, true};
  EXPECT_EQ(pack_activity(e), 0x8000'0000u | (5u << 1) | 1u);
  EXPECT_EQ(unpack_activity(pack_activity(e)), e);
  EXPECT_THROW(pack_activity({true, 1u << 30, false}), EncodingError);

  std::mt19937_64 rng(4);
  for (int i = 0; i < (1 << 16); ++i) {
    const ActivityEntry a{bool(rng() & 1), std::uint32_t(rng() % (1u << 30)), bool(rng() & 1)};
    ASSERT_EQ(unpack_activity(pack_activity(a)), a);
  }
}

TEST(MetadataCodec, RequiredChunks) {
  EXPECT_EQ(required_chunks(2000), (ChunkRequirement{4, PageType::Compressed}));
  EXPECT_EQ(required_chunks(0), (ChunkRequirement{0, PageType::Zero}));
  EXPECT_EQ(required_chunks(3584), (ChunkRequirement{7, PageType::Compressed}));
  EXPECT_EQ(required_chunks(3585), (ChunkRequirement{8, PageType::Incompressible}));
  EXPECT_EQ(required_chunks(1), (ChunkRequirement{1, PageType::Compressed}));
  EXPECT_THROW(required_chunks(4097), ContractViolation);
}

TEST(MetadataCodec, BlockSizeCodes) {
  EXPECT_EQ(encode_block_sz(256), 1);
  EXPECT_EQ(aligned_block_size(1), 256u);
  EXPECT_EQ(encode_block_sz(1), 0);
  EXPECT_EQ(aligned_block_size(0), 128u);
  EXPECT_EQ(encode_block_sz(1024), 7);
  EXPECT_EQ(aligned_block_size(7), 1024u);
  for (std::size_t n = 1; n <= 1024; ++n) {
    const auto s = encode_block_sz(n);
    ASSERT_GE(aligned_block_size(s), n);
    ASSERT_LT(aligned_block_size(s) - n, 128u);
  }
  EXPECT_THROW(encode_block_sz(0), ContractViolation);
  EXPECT_THROW(encode_block_sz(1025), ContractViolation);
}

TEST(MetadataCodec, NumChunksFollowsAlignedSum) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 5000; ++i) {
    std::array<PageType, 4> t{};
    std::array<std::uint8_t, 4> s{};
    unsigned sum = 0;
    for (int b = 0; b < 4; ++b) {
      if (rng() % 3) {
        t[b] = PageType::Compressed;
        s[b] = rng() % 7;
        sum += (s[b] + 1) * 128;
      }
    }
    const unsigned n = (sum + 511) / 512;
    if (n == 0) continue;
    EXPECT_EQ(pointer_usage<EncodingError>(t, s, std::uint8_t(n - 1)).chunk_pointers, n);
    if (n > 1) EXPECT_THROW(pointer_usage<EncodingError>(t, s, std::uint8_t(n - 2)), EncodingError);
  }
}

TEST(MetadataCodec, PromotedPageShadowState) {
  const std::array<PageType, 4> t{PageType::Promoted, PageType::Promoted, PageType::Zero, PageType::Zero};
  const std::array<std::uint8_t, 4> shadows{1, 1, 0, 0};
  const auto clean = pointer_usage<EncodingError>(t, shadows, 0);
  EXPECT_TRUE(clean.pchunk);
  EXPECT_FALSE(clean.dirty);
  EXPECT_EQ(clean.chunk_pointers, 1u);

  const std::array<std::uint8_t, 4> none{};
  const auto dirty = pointer_usage<EncodingError>(t, none, 7);
  EXPECT_TRUE(dirty.dirty);
  EXPECT_EQ(dirty.chunk_pointers, 0u);
  EXPECT_THROW(pointer_usage<EncodingError>(t, shadows, 7), EncodingError);
}
