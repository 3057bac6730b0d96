#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "ibex/addr_space.hpp"
#include "ibex/metadata_codec.hpp"

namespace ibex {

inline constexpr unsigned kActivityEntriesPerLine = kLineSize / 4;

struct Victim {
  std::uint64_t ospn = 0;
  std::uint64_t pchunk = 0;
  bool via_random = false;
};

/// What the scanner saw for the chosen entry, captured before any update.
struct VictimAudit {
  Victim victim;
  bool referenced_at_fetch = false;
  bool cached_at_selection = false;
};

/// Activity-line read-modify-writes gathered during one event. Lines touched
/// more than once in the same batch cost a single read and a single write.
class ActivityBatch {
 public:
  void touch(std::uint64_t line);
  bool empty() const { return lines_.empty(); }
  const std::vector<std::uint64_t>& lines() const { return lines_; }

 private:
  std::vector<std::uint64_t> lines_;
};

/// Page activity region (one 4B entry per P-chunk) and the demotion scanner
/// that walks it with a cursor, clearing referenced bits and skipping pages
/// whose metadata is still cached.
class ActivityTracker {
 public:
  using Probe = std::function<bool(std::uint64_t ospn)>;

  ActivityTracker(const DeviceLayout& layout, std::uint64_t seed);

  /// Marks a freshly allocated P-chunk as holding `ospn`, referenced.
  void on_promote(std::uint64_t pchunk, std::uint64_t ospn, ActivityBatch& batch);
  /// Lazy reference update from a metadata-cache eviction.
  void mark_referenced(std::uint64_t pchunk, ActivityBatch& batch);
  /// Clears the entry of a demoted P-chunk. When it sits in the line the
  /// last selection fetched, the clear rides on that line's write-back.
  void on_demote(std::uint64_t pchunk, ActivityBatch& batch, std::vector<MemoryAccess>* traffic);
  /// Scans from the cursor for the next victim; scan traffic goes to
  /// `traffic` (ActivityScan).
  Victim select_victim(const Probe& cached, std::vector<MemoryAccess>* traffic);

  /// One read and one write per batched line, tagged ActivityUpdate.
  void flush(ActivityBatch& batch, std::vector<MemoryAccess>* traffic) const;

  ActivityEntry entry(std::uint64_t pchunk) const { return unpack_activity(words_.at(pchunk)); }
  std::uint64_t allocated_entries() const { return allocated_; }
  std::uint64_t cursor() const { return cursor_; }
  std::uint64_t entry_count() const { return words_.size(); }

  std::uint64_t victims() const { return victims_; }
  std::uint64_t random_victims() const { return random_victims_; }
  /// Lines fetched per selection -> number of selections.
  const std::map<std::uint64_t, std::uint64_t>& scan_histogram() const { return scan_hist_; }

  void set_audit(std::function<void(const VictimAudit&)> hook) { audit_ = std::move(hook); }

 private:
  std::uint64_t line_of(std::uint64_t pchunk) const { return pchunk / kActivityEntriesPerLine; }
  void emit(std::uint64_t line, bool write, Category c, std::vector<MemoryAccess>* traffic) const;

  DeviceLayout layout_;
  std::vector<std::uint32_t> words_;
  std::uint64_t allocated_ = 0;
  std::uint64_t cursor_ = 0;
  std::mt19937_64 rng_;
  std::optional<std::uint64_t> pending_line_;

  std::uint64_t victims_ = 0;
  std::uint64_t random_victims_ = 0;
  std::map<std::uint64_t, std::uint64_t> scan_hist_;
  std::function<void(const VictimAudit&)> audit_;
};

}  // namespace ibex
