#include <gtest/gtest.h>

#include <map>
#include <random>

#include "ibex/compression_engine.hpp"
#include "test_util.hpp"

using namespace ibex;
using ibex::fixtures::count;

namespace {

using Page = std::array<std::uint8_t, kPageSize>;

Page filler_page(std::uint16_t target_per_block, std::uint32_t seed) {
  Page p{};
  for (unsigned b = 0; b < kBlocksPerPage; ++b)
    SizeOracleBackend::make_filler(std::span<std::uint8_t, kBlockSize>(p.data() + b * kBlockSize, kBlockSize),
                                   target_per_block, seed + b);
  return p;
}

Page noise_page(std::uint64_t seed) {
  Page p;
  std::mt19937_64 rng(seed);
  for (auto& b : p) b = static_cast<std::uint8_t>(rng());
  return p;
}

Ospa at(std::uint64_t ospn, std::size_t offset = 0) { return Ospa{ospn * kPageSize + offset}; }

struct Rig {
  SizeOracleBackend oracle;
  LzBackend lz;
  CompressionEngine engine;

  Rig(EngineConfig cfg, MetadataFormat f, bool use_lz = false, std::uint64_t promoted = 1 * MiB)
      : engine(with_audit(cfg), DeviceLayout::make(fixtures::small_layout(f, promoted)),
               use_lz ? static_cast<const CompressorBackend&>(lz) : oracle) {}

  static EngineConfig with_audit(EngineConfig c) {
    c.audit = true;
    return c;
  }
};

EngineConfig page4k(bool shadowed = true) {
  EngineConfig c;
  c.mode = CompressionMode::Page4k;
  c.shadowed_promotion = shadowed;
  return c;
}

}  // namespace

TEST(CompressionEngine, Page4kReadPromotesWholePage) {
  Rig r(page4k(), MetadataFormat::Naive);
  const Page content = filler_page(500, 1);  // 2000B stream, 4 chunks
  r.engine.preload(3, content);
  ASSERT_EQ(r.engine.page(3)->chunk_count, 4);

  Line got;
  const Plan first = r.engine.read(at(3, 128), &got);
  EXPECT_EQ(count(first, Category::PromotionRead), 32u);
  EXPECT_EQ(count(first, Category::PromotionWrite), 64u);
  EXPECT_EQ(count(first, Category::ExternalData), 0u);
  EXPECT_EQ(count(first, Category::MetadataRead), 1u);
  EXPECT_EQ(count(first, Category::Allocator), 1u);
  EXPECT_EQ(count(first, Category::ActivityUpdate), 2u);
  EXPECT_TRUE(std::equal(got.begin(), got.end(), content.begin() + 128));
  EXPECT_TRUE(r.engine.page(3)->clean());

  const Plan second = r.engine.read(at(3, 4032), &got);
  EXPECT_EQ(second.access_count(), 1u);
  EXPECT_EQ(count(second, Category::ExternalData, false), 1u);
  EXPECT_TRUE(std::equal(got.begin(), got.end(), content.begin() + 4032));
}

TEST(CompressionEngine, ResponseFollowsDecompressNotPromotionWrite) {
  Rig r(page4k(), MetadataFormat::Naive);
  r.engine.preload(0, filler_page(500, 2));
  const Plan p = r.engine.read(at(0), nullptr);
  int respond = -1;
  for (std::size_t i = 0; i < p.steps.size(); ++i)
    if (p.steps[i].respond) respond = static_cast<int>(i);
  ASSERT_GE(respond, 0);
  EXPECT_EQ(p.steps[respond].delay_cycles, 256u);  // 4KB at 64 cycles per KB
  for (const auto& s : p.steps)
    for (const auto& a : s.accesses)
      if (a.category == Category::PromotionWrite) EXPECT_TRUE(s.background);
}

TEST(CompressionEngine, ZeroPageHitCostsNothing) {
  Rig r(page4k(), MetadataFormat::Naive);
  Line got;
  got.fill(0xAA);
  const Plan miss = r.engine.read(at(9), &got);
  EXPECT_EQ(miss.access_count(), 1u);
  const Plan hit = r.engine.read(at(9, 64), &got);
  EXPECT_EQ(hit.access_count(), 0u);
  EXPECT_EQ(got, Line{});
  EXPECT_EQ(r.engine.page(9), nullptr);
}

TEST(CompressionEngine, WriteToCleanPromotedPageFreesShadows) {
  Rig r(page4k(), MetadataFormat::Naive);
  r.engine.preload(1, filler_page(500, 3));
  r.engine.read(at(1), nullptr);
  const auto before = r.engine.allocator().allocated_cchunks();
  const Line payload = fixtures::line_of(5);
  const Plan w = r.engine.write(at(1, 64), &payload);
  EXPECT_EQ(count(w, Category::ExternalData, true), 1u);
  EXPECT_EQ(count(w, Category::ExternalData, false), 0u);
  EXPECT_EQ(count(w, Category::Allocator, true), 4u);
  EXPECT_EQ(count(w, Category::PromotionRead), 0u);
  EXPECT_EQ(before - r.engine.allocator().allocated_cchunks(), 4u);
  EXPECT_TRUE(r.engine.page(1)->dirty());
  EXPECT_EQ(r.engine.stats().shadow_chunks_freed, 4u);

  // dirty now: further writes are a single data access
  const Plan again = r.engine.write(at(1, 128), &payload);
  EXPECT_EQ(again.access_count(), 1u);
}

TEST(CompressionEngine, UnshadowedPromotionFreesChunksAtOnce) {
  Rig r(page4k(false), MetadataFormat::Naive);
  r.engine.preload(1, filler_page(500, 3));
  const Plan p = r.engine.read(at(1), nullptr);
  EXPECT_EQ(count(p, Category::Allocator, true), 4u);
  EXPECT_TRUE(r.engine.page(1)->dirty());
}

TEST(CompressionEngine, IncompressibleWritesInPlaceThenRecompress) {
  Rig r(page4k(), MetadataFormat::Naive, true);
  const Page content = noise_page(7);
  r.engine.preload(2, content);
  ASSERT_EQ(r.engine.page(2)->chunk_count, 8);
  ASSERT_EQ(r.engine.page(2)->type[0], PageType::Incompressible);

  const Line zero{};
  for (unsigned i = 0; i < 15; ++i) {
    const Plan w = r.engine.write(at(2, i * kLineSize), &zero);
    EXPECT_EQ(count(w, Category::ExternalData, true), 1u);
    EXPECT_EQ(count(w, Category::DemotionRead), 0u);
  }
  EXPECT_EQ(r.engine.page(2)->wr_cntr, 15);
  EXPECT_EQ(r.engine.stats().recompression_checks, 0u);

  // the 16th write makes a quarter of the page zero, enough to shrink it
  for (unsigned i = 15; i < 64; ++i) {
    const Plan w = r.engine.write(at(2, i * kLineSize), &zero);
    if (i == 15) {
      EXPECT_EQ(r.engine.stats().recompression_checks, 1u);
      EXPECT_EQ(count(w, Category::DemotionRead), 64u);
    }
  }
  EXPECT_GE(r.engine.stats().recompression_rewrites, 1u);
  const PageState* st = r.engine.page(2);
  ASSERT_NE(st, nullptr);
  EXPECT_LT(st->chunk_count, 8);

  Page want = content;
  std::fill_n(want.begin(), 64 * kLineSize, 0);
  const Bytes got = r.engine.peek_page(2);
  EXPECT_TRUE(std::equal(got.begin(), got.end(), want.begin()));
}

TEST(CompressionEngine, ZeroWriteToZeroPageIsFree) {
  Rig r(page4k(), MetadataFormat::Naive);
  const Line zero{};
  const Plan w = r.engine.write(at(4), &zero);
  EXPECT_EQ(count(w, Category::ExternalData), 0u);
  EXPECT_EQ(count(w, Category::PromotionWrite), 0u);
  EXPECT_EQ(r.engine.page(4), nullptr);
}

TEST(CompressionEngine, FirstWriteToZeroPageZeroFills) {
  Rig r(page4k(), MetadataFormat::Naive);
  const Line payload = fixtures::line_of(1);
  const Plan w = r.engine.write(at(4, 192), &payload);
  EXPECT_EQ(count(w, Category::PromotionWrite), 64u);
  EXPECT_EQ(count(w, Category::ExternalData, true), 1u);
  EXPECT_TRUE(r.engine.page(4)->dirty());
  const Bytes page = r.engine.peek_page(4);
  EXPECT_TRUE(std::equal(payload.begin(), payload.end(), page.begin() + 192));
}

TEST(CompressionEngine, CleanDemotionWritesNothingCompressed) {
  Rig r(page4k(), MetadataFormat::Naive);
  r.engine.preload(5, filler_page(500, 4));
  r.engine.read(at(5), nullptr);
  const auto cchunks = r.engine.allocator().allocated_cchunks();
  const Plan d = r.engine.demote_one();
  EXPECT_EQ(count(d, Category::DemotionWrite), 0u);
  EXPECT_EQ(count(d, Category::DemotionRead), 0u);
  EXPECT_EQ(r.engine.stats().demotions_clean, 1u);
  EXPECT_EQ(r.engine.stats().demotion_compressions, 0u);
  EXPECT_EQ(r.engine.allocator().allocated_cchunks(), cchunks);
  EXPECT_EQ(r.engine.allocator().allocated_pchunks(), 0u);
  EXPECT_EQ(r.engine.page(5)->type[0], PageType::Compressed);
  EXPECT_FALSE(r.engine.page(5)->promoted());

  const Plan again = r.engine.read(at(5), nullptr);
  EXPECT_EQ(count(again, Category::PromotionRead), 32u);
}

TEST(CompressionEngine, DirtyDemotionRecompresses) {
  Rig r(page4k(), MetadataFormat::Naive);
  r.engine.preload(6, filler_page(384, 5));  // 1536B, 3 chunks
  const Line same = [&] {
    Line l;
    const Bytes p = r.engine.peek_page(6);
    std::copy_n(p.begin(), kLineSize, l.begin());
    return l;
  }();
  r.engine.write(at(6), &same);  // dirties without changing content
  ASSERT_TRUE(r.engine.page(6)->dirty());
  const Plan d = r.engine.demote_one();
  EXPECT_EQ(count(d, Category::DemotionRead), 64u);
  EXPECT_EQ(count(d, Category::DemotionWrite), 24u);
  EXPECT_EQ(r.engine.page(6)->chunk_count, 3);
  EXPECT_EQ(r.engine.stats().demotions_dirty, 1u);
}

TEST(CompressionEngine, DirtyAllZeroPageDemotesToZero) {
  Rig r(page4k(), MetadataFormat::Naive);
  const Line payload = fixtures::line_of(2), zero{};
  r.engine.write(at(7, 64), &payload);
  r.engine.write(at(7, 64), &zero);
  const Plan d = r.engine.demote_one();
  EXPECT_EQ(count(d, Category::DemotionWrite), 0u);
  EXPECT_EQ(r.engine.page(7), nullptr);
  EXPECT_EQ(r.engine.allocator().allocated_cchunks(), 0u);
  EXPECT_EQ(r.engine.allocator().allocated_pchunks(), 0u);
}

TEST(CompressionEngine, ColocatedReadFetchesOnlyItsBlock) {
  Rig r(EngineConfig{}, MetadataFormat::Compact);
  Page content = filler_page(300, 8);
  r.engine.preload(0, content);
  const CompressedPage cp = classify_and_compress(content, CompressionMode::Colocated1k, r.oracle);
  for (unsigned b = 0; b < kBlocksPerPage; ++b) {
    const std::size_t chunks = blocks_to_fetch(cp.layout, b).size();
    const Plan p = r.engine.read(at(0, b * kBlockSize + 64), nullptr);
    EXPECT_EQ(count(p, Category::PromotionRead), chunks * kLinesPerChunk) << b;
    EXPECT_EQ(count(p, Category::PromotionWrite), kLinesPerBlock) << b;
    EXPECT_EQ(count(p, Category::Allocator), b == 0 ? 1u : 0u) << b;
  }
  EXPECT_EQ(r.engine.stats().page_promotions, 1u);
  EXPECT_EQ(r.engine.stats().block_promotions, 4u);
}

TEST(CompressionEngine, BaselineMapsOspaToItself) {
  EngineConfig c;
  c.uncompressed_baseline = true;
  Rig r(c, MetadataFormat::Compact);
  const Line payload = fixtures::line_of(3);
  const Plan w = r.engine.write(at(11, 320), &payload);
  ASSERT_EQ(w.access_count(), 1u);
  EXPECT_EQ(w.steps[0].accesses[0].mpa.value, 11 * kPageSize + 320);
  Line got;
  r.engine.read(at(11, 320), &got);
  EXPECT_EQ(got, payload);
  EXPECT_EQ(r.engine.physical_bytes(), kPageSize);
}

TEST(CompressionEngine, RejectsBadModePairings) {
  SizeOracleBackend o;
  const auto naive = DeviceLayout::make(fixtures::small_layout(MetadataFormat::Naive));
  const auto compact = DeviceLayout::make(fixtures::small_layout(MetadataFormat::Compact));
  EXPECT_THROW(CompressionEngine(page4k(), compact, o), ConfigError);
  EXPECT_THROW(CompressionEngine(EngineConfig{}, naive, o), ConfigError);
  EngineConfig c;
  c.shadowed_promotion = false;
  EXPECT_THROW(CompressionEngine(c, compact, o), ConfigError);
}

TEST(CompressionEngine, AccessBeyondCapacityFaults) {
  Rig r(page4k(), MetadataFormat::Naive);
  const std::uint64_t n = r.engine.layout().page_count();
  EXPECT_THROW(r.engine.read(at(n), nullptr), AddressFault);
  EXPECT_THROW(r.engine.write(at(n), nullptr), AddressFault);
}

// Random traffic against a flat byte array, with a promoted region small
// enough that demotion runs constantly.
struct FuzzCase {
  CompressionMode mode;
  MetadataFormat format;
  bool shadowed;
};

class EngineFuzz : public ::testing::TestWithParam<FuzzCase> {};

TEST_P(EngineFuzz, MatchesFlatMemory) {
  const FuzzCase fc = GetParam();
  EngineConfig cfg;
  cfg.mode = fc.mode;
  cfg.shadowed_promotion = fc.shadowed;
  cfg.demotion_threshold = 4;
  Rig r(cfg, fc.format, true, 16 * kPageSize);
  const std::uint64_t pages = 48;
  std::map<std::uint64_t, Page> ref;
  std::mt19937_64 rng(static_cast<std::uint64_t>(fc.mode) * 7 + static_cast<std::uint64_t>(fc.format));
  for (std::uint64_t p = 0; p < pages; p += 3) {
    Page content{};
    if (p % 2) r.lz.synthesize(content, 1.0 + double(p % 5), p);
    r.engine.preload(p, content);
    ref[p] = content;
  }
  for (int i = 0; i < 20000; ++i) {
    const std::uint64_t p = rng() % pages;
    const std::size_t off = (rng() % kLinesPerPage) * kLineSize;
    auto& want = ref.try_emplace(p, Page{}).first->second;
    if (rng() % 3 == 0) {
      Line payload{};
      switch (rng() % 3) {
        case 0: break;
        case 1: payload.fill(static_cast<std::uint8_t>(rng())); break;
        default:
          for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
      }
      r.engine.write(at(p, off), &payload);
      std::copy(payload.begin(), payload.end(), want.begin() + off);
    } else {
      Line got;
      r.engine.read(at(p, off), &got);
      ASSERT_TRUE(std::equal(got.begin(), got.end(), want.begin() + off)) << "step " << i;
    }
    while (r.engine.demotion_needed()) r.engine.demote_one();
  }
  for (const auto& [p, want] : ref) {
    const Bytes got = r.engine.peek_page(p);
    ASSERT_TRUE(std::equal(got.begin(), got.end(), want.begin())) << p;
  }
  EXPECT_GT(r.engine.stats().demotions_dirty, 0u);
  EXPECT_TRUE(r.engine.allocator().conserved());
}

INSTANTIATE_TEST_SUITE_P(Modes, EngineFuzz,
                         ::testing::Values(FuzzCase{CompressionMode::Page4k, MetadataFormat::Naive, true},
                                           FuzzCase{CompressionMode::Page4k, MetadataFormat::Naive, false},
                                           FuzzCase{CompressionMode::Colocated1k, MetadataFormat::Colocated, true},
                                           FuzzCase{CompressionMode::Colocated1k, MetadataFormat::Compact, true}));

TEST(CompressionEngine, ColocatedWriteToZeroBlockKeepsNeighbours) {
  Rig r(EngineConfig{}, MetadataFormat::Compact);
  Page content = filler_page(200, 9);
  std::fill_n(content.begin(), kBlockSize, 0);
  r.engine.preload(0, content);
  ASSERT_EQ(r.engine.page(0)->type[0], PageType::Zero);
  const Line payload = fixtures::line_of(4);
  r.engine.write(at(0, 64), &payload);
  std::copy(payload.begin(), payload.end(), content.begin() + 64);
  const Bytes got = r.engine.peek_page(0);
  EXPECT_TRUE(std::equal(got.begin(), got.end(), content.begin()));
  EXPECT_TRUE(r.engine.page(0)->dirty());
}
