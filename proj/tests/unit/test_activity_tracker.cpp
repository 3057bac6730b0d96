#include <gtest/gtest.h>

#include <random>
#include <set>

#include "ibex/activity_tracker.hpp"
#include "test_util.hpp"

using namespace ibex;

namespace {

DeviceLayout with_pchunks(std::uint64_t n) {
  return DeviceLayout::make(fixtures::small_layout(MetadataFormat::Compact, n * kPageSize));
}

std::size_t n_of(const std::vector<MemoryAccess>& t, Category c, bool write) {
  std::size_t n = 0;
  for (const auto& a : t) n += a.category == c && a.write == write;
  return n;
}

const ActivityTracker::Probe kNothingCached = [](std::uint64_t) { return false; };

}  // namespace

TEST(ActivityTracker, PromoteWritesSlotOfLine) {
  const auto l = with_pchunks(64);
  ActivityTracker t(l, 1);
  ActivityBatch b;
  t.on_promote(0, 1234, b);
  EXPECT_EQ(t.entry(0), (ActivityEntry{true, 1234, true}));
  std::vector<MemoryAccess> traffic;
  t.flush(b, &traffic);
  ASSERT_EQ(traffic.size(), 2u);
  EXPECT_EQ(traffic[0].mpa, l.activity_line_mpa(0));
  EXPECT_EQ(n_of(traffic, Category::ActivityUpdate, false), 1u);
  EXPECT_EQ(n_of(traffic, Category::ActivityUpdate, true), 1u);
  EXPECT_TRUE(b.empty());
}

TEST(ActivityTracker, BurstInOneLineCoalesces) {
  ActivityTracker t(with_pchunks(64), 1);
  ActivityBatch b;
  for (std::uint64_t p = 0; p < 16; ++p) t.on_promote(p, p + 10, b);
  std::vector<MemoryAccess> traffic;
  t.flush(b, &traffic);
  EXPECT_EQ(traffic.size(), 2u);

  ActivityBatch c;
  t.on_promote(16, 1, c);
  t.on_promote(40, 2, c);
  traffic.clear();
  t.flush(c, &traffic);
  EXPECT_EQ(traffic.size(), 4u);
}

TEST(ActivityTracker, LifecycleToggles) {
  ActivityTracker t(with_pchunks(16), 1);
  ActivityBatch b;
  t.on_promote(3, 9, b);
  EXPECT_TRUE(t.entry(3).allocated);
  EXPECT_THROW(t.on_promote(3, 9, b), InvariantViolation);
  t.on_demote(3, b, nullptr);
  EXPECT_FALSE(t.entry(3).allocated);
  EXPECT_THROW(t.on_demote(3, b, nullptr), InvariantViolation);
  t.on_promote(3, 9, b);
  EXPECT_TRUE(t.entry(3).allocated);
  EXPECT_EQ(t.allocated_entries(), 1u);
}

TEST(ActivityTracker, AllReferencedFallsBackToRandom) {
  ActivityTracker t(with_pchunks(16), 1);
  ActivityBatch b;
  for (std::uint64_t p = 0; p < 16; ++p) t.on_promote(p, 100 + p, b);
  std::vector<MemoryAccess> traffic;
  const Victim v = t.select_victim(kNothingCached, &traffic);
  EXPECT_TRUE(v.via_random);
  EXPECT_LT(v.pchunk, 16u);
  EXPECT_EQ(v.ospn, 100 + v.pchunk);
  for (std::uint64_t p = 0; p < 16; ++p) EXPECT_FALSE(t.entry(p).referenced);
  EXPECT_EQ(n_of(traffic, Category::ActivityScan, false), 1u);
  EXPECT_EQ(t.random_victims(), 1u);
}

TEST(ActivityTracker, ClearedEntryIsChosenOnTheNextPass) {
  ActivityTracker t(with_pchunks(16), 1);
  ActivityBatch b;
  t.on_promote(0, 7, b);
  EXPECT_TRUE(t.select_victim(kNothingCached, nullptr).via_random);
  std::vector<MemoryAccess> traffic;
  const Victim v = t.select_victim(kNothingCached, &traffic);
  EXPECT_FALSE(v.via_random);
  EXPECT_EQ(v.pchunk, 0u);
  // settles the earlier line, re-reads from the cursor, wraps to line 0
  EXPECT_EQ(n_of(traffic, Category::ActivityScan, true), 1u);
  EXPECT_EQ(n_of(traffic, Category::ActivityScan, false), 2u);
}

TEST(ActivityTracker, CachedEntriesAreSkipped) {
  ActivityTracker t(with_pchunks(16), 3);
  ActivityBatch b;
  t.on_promote(0, 7, b);
  t.on_promote(1, 8, b);
  t.select_victim(kNothingCached, nullptr);  // clears both referenced bits
  const Victim v = t.select_victim([](std::uint64_t o) { return o == 7; }, nullptr);
  EXPECT_FALSE(v.via_random);
  EXPECT_EQ(v.pchunk, 1u);
  EXPECT_EQ(v.ospn, 8u);
}

TEST(ActivityTracker, DemoteInFetchedLineMergesWrite) {
  ActivityTracker t(with_pchunks(32), 1);
  ActivityBatch b;
  t.on_promote(0, 1, b);
  t.on_promote(20, 2, b);
  const Victim v = t.select_victim(kNothingCached, nullptr);
  std::vector<MemoryAccess> traffic;
  ActivityBatch demote_batch;
  t.on_demote(v.pchunk, demote_batch, &traffic);
  EXPECT_EQ(n_of(traffic, Category::ActivityScan, true), 1u);
  EXPECT_TRUE(demote_batch.empty());

  // a demotion outside the pending line goes through the batch
  t.on_demote(20, demote_batch, &traffic);
  EXPECT_EQ(demote_batch.lines(), std::vector<std::uint64_t>{1});
}

TEST(ActivityTracker, DemotedEntryIsNotSelectedAgain) {
  ActivityTracker t(with_pchunks(16), 1);
  ActivityBatch b;
  t.on_promote(4, 1, b);
  t.on_promote(9, 2, b);
  const Victim first = t.select_victim(kNothingCached, nullptr);
  t.on_demote(first.pchunk, b, nullptr);
  for (int i = 0; i < 5; ++i) EXPECT_NE(t.select_victim(kNothingCached, nullptr).pchunk, first.pchunk);
}

TEST(ActivityTracker, MarkReferencedIsLazyAndIgnoresFreeEntries) {
  ActivityTracker t(with_pchunks(16), 1);
  ActivityBatch b;
  t.on_promote(2, 5, b);
  t.select_victim(kNothingCached, nullptr);
  EXPECT_FALSE(t.entry(2).referenced);
  ActivityBatch m;
  t.mark_referenced(2, m);
  EXPECT_TRUE(t.entry(2).referenced);
  t.mark_referenced(3, m);  // free entry
  EXPECT_FALSE(t.entry(3).allocated);
  EXPECT_EQ(m.lines().size(), 1u);
}

TEST(ActivityTracker, EmptyRegionIsAContractViolation) {
  ActivityTracker t(with_pchunks(16), 1);
  EXPECT_THROW(t.select_victim(kNothingCached, nullptr), ContractViolation);
}

// Every non-random victim was unreferenced when its line was fetched and had
// no cached metadata. Checked against snapshots taken outside the tracker.
TEST(ActivityTracker, SecondChanceSoundnessUnderChurn) {
  const std::uint64_t n = 256;
  ActivityTracker t(with_pchunks(n), 17);
  std::mt19937_64 rng(5);
  std::set<std::uint64_t> live, cached;
  std::uint64_t next_ospn = 1;
  std::size_t non_random = 0;
  for (int step = 0; step < 50000; ++step) {
    ActivityBatch b;
    const auto op = rng() % 10;
    if (op < 4 && live.size() < n) {
      std::uint64_t p;
      do p = rng() % n;
      while (live.count(p));
      t.on_promote(p, next_ospn++ % (1u << 30), b);
      live.insert(p);
    } else if (op < 6 && !live.empty()) {
      auto it = live.begin();
      std::advance(it, rng() % live.size());
      t.mark_referenced(*it, b);
    } else if (op < 7) {
      cached.clear();
      for (auto p : live)
        if (rng() % 4 == 0) cached.insert(t.entry(p).ospn);
    } else if (!live.empty()) {
      std::vector<bool> ref_before(n);
      for (std::uint64_t p = 0; p < n; ++p) ref_before[p] = t.entry(p).referenced;
      std::vector<MemoryAccess> traffic;
      const Victim v = t.select_victim([&](std::uint64_t o) { return cached.count(o) > 0; }, &traffic);
      ASSERT_TRUE(live.count(v.pchunk));
      ASSERT_EQ(t.entry(v.pchunk).ospn, v.ospn);
      const std::size_t fetched = n_of(traffic, Category::ActivityScan, false);
      if (!v.via_random) {
        ++non_random;
        ASSERT_FALSE(cached.count(v.ospn));
        // referenced before the call only if the scan came all the way round
        if (ref_before[v.pchunk]) ASSERT_GT(fetched, n / kActivityEntriesPerLine);
      }
      t.on_demote(v.pchunk, b, &traffic);
      live.erase(v.pchunk);
    }
    t.flush(b, nullptr);
    ASSERT_EQ(t.allocated_entries(), live.size());
  }
  EXPECT_GT(non_random, 1000u);
}
