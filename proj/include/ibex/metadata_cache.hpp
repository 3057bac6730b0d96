#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ibex/addr_space.hpp"

namespace ibex {

struct MetaCacheConfig {
  std::uint64_t capacity_bytes = 96 * KiB;
  unsigned ways = 16;
  unsigned hit_latency_cycles = 4;

  std::uint64_t sets() const { return capacity_bytes / (kLineSize * ways); }
};

struct MetaEviction {
  std::uint64_t line = 0;
  bool dirty = false;
  std::uint64_t insertion_age = 0;  // fills since this line was filled, the evicting one included
};

struct MetaLookup {
  bool hit = false;
  std::vector<std::uint64_t> filled;   // lines read from the metadata region
  std::vector<MetaEviction> evicted;   // victims displaced by the fills
};

struct MetaCacheStats {
  std::uint64_t lookups = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t line_fills = 0;
  std::uint64_t evictions = 0;
  std::uint64_t dirty_evictions = 0;
  std::uint64_t probes = 0;
  std::uint64_t insertion_age_sum = 0;
  std::uint64_t insertion_age_max = 0;
};

/// Set-associative, write-back, write-allocate LRU cache of 64B metadata
/// lines, indexed by metadata line number so entries sharing a line share a
/// cache slot. Entries that straddle two lines (packed co-located format) are
/// resident only when both lines are.
class MetadataCache {
 public:
  MetadataCache(const MetaCacheConfig& config, const DeviceLayout& layout);

  /// Looks up the entry of `ospn`, refreshing LRU state and filling any
  /// missing lines.
  MetaLookup lookup(std::uint64_t ospn);
  /// Presence test with no effect on LRU state or statistics other than the
  /// probe counter.
  bool probe(std::uint64_t ospn) const;
  /// Marks the resident lines of `ospn` dirty; false if the entry is not
  /// fully resident.
  bool mark_dirty(std::uint64_t ospn);

  bool contains_line(std::uint64_t line) const;
  /// Cleans every dirty line and returns them in line order (end of run).
  std::vector<std::uint64_t> flush_dirty();

  const MetaCacheConfig& config() const { return config_; }
  const MetaCacheStats& stats() const { return stats_; }
  std::uint64_t resident_lines() const;

  struct CachedLine {
    std::uint64_t line;
    bool dirty;
    std::uint64_t last_use;
  };
  std::vector<CachedLine> snapshot() const;

 private:
  struct Way {
    std::uint64_t line = 0;
    bool valid = false;
    bool dirty = false;
    std::uint64_t last_use = 0;
    std::uint64_t inserted_at = 0;
  };

  Way* find(std::uint64_t line);
  const Way* find(std::uint64_t line) const;
  /// Brings `line` in as MRU; returns the displaced victim, if any.
  std::optional<MetaEviction> fill(std::uint64_t line);

  MetaCacheConfig config_;
  DeviceLayout layout_;
  std::uint64_t sets_;
  std::vector<Way> ways_;
  std::uint64_t clock_ = 0;
  std::uint64_t insertions_ = 0;
  mutable MetaCacheStats stats_;
};

}  // namespace ibex
