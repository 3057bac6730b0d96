#include "ibex/activity_tracker.hpp"

#include <algorithm>
#include <string>

namespace ibex {

void ActivityBatch::touch(std::uint64_t line) {
  if (std::find(lines_.begin(), lines_.end(), line) == lines_.end()) lines_.push_back(line);
}

ActivityTracker::ActivityTracker(const DeviceLayout& layout, std::uint64_t seed)
    : layout_(layout), words_(layout.pchunk_count(), 0), rng_(seed) {}

void ActivityTracker::emit(std::uint64_t line, bool write, Category c, std::vector<MemoryAccess>* traffic) const {
  if (traffic) traffic->push_back({layout_.activity_line_mpa(line), write, c});
}

void ActivityTracker::on_promote(std::uint64_t pchunk, std::uint64_t ospn, ActivityBatch& batch) {
  ActivityEntry e = entry(pchunk);
  if (e.allocated)
    throw InvariantViolation("activity entry " + std::to_string(pchunk) + " promoted while allocated");
  words_[pchunk] = pack_activity({true, static_cast<std::uint32_t>(ospn), true});
  ++allocated_;
  batch.touch(line_of(pchunk));
}

void ActivityTracker::mark_referenced(std::uint64_t pchunk, ActivityBatch& batch) {
  ActivityEntry e = entry(pchunk);
  if (!e.allocated) return;
  e.referenced = true;
  words_[pchunk] = pack_activity(e);
  batch.touch(line_of(pchunk));
}

void ActivityTracker::on_demote(std::uint64_t pchunk, ActivityBatch& batch, std::vector<MemoryAccess>* traffic) {
  if (!entry(pchunk).allocated)
    throw InvariantViolation("activity entry " + std::to_string(pchunk) + " demoted while free");
  words_[pchunk] = 0;
  --allocated_;
  const std::uint64_t line = line_of(pchunk);
  if (pending_line_ == line) {
    emit(line, true, Category::ActivityScan, traffic);
    pending_line_.reset();
  } else {
    batch.touch(line);
  }
}

Victim ActivityTracker::select_victim(const Probe& cached, std::vector<MemoryAccess>* traffic) {
  if (allocated_ == 0) throw ContractViolation("demotion requested with an empty promoted region");
  if (pending_line_) {
    // previous selection was never demoted; settle its write-back
    emit(*pending_line_, true, Category::ActivityScan, traffic);
    pending_line_.reset();
  }
  const std::uint64_t n = words_.size();
  std::uint64_t fetched = 0;
  std::uint64_t pos = cursor_;
  for (;;) {
    const std::uint64_t line = line_of(pos);
    const std::uint64_t end = std::min<std::uint64_t>((line + 1) * kActivityEntriesPerLine, n);
    emit(line, false, Category::ActivityScan, traffic);
    ++fetched;

    const std::vector<std::uint32_t> fetched_words(words_.begin() + line * kActivityEntriesPerLine,
                                                   words_.begin() + end);
    bool dirty = false;
    std::optional<std::uint64_t> chosen;
    std::vector<std::uint64_t> allocated;
    for (std::uint64_t slot = pos; slot < end; ++slot) {
      ActivityEntry e = entry(slot);
      if (!e.allocated) continue;
      allocated.push_back(slot);
      if (e.referenced) {
        e.referenced = false;
        words_[slot] = pack_activity(e);
        dirty = true;
        continue;
      }
      if (cached(e.ospn)) continue;
      chosen = slot;
      break;
    }
    bool via_random = false;
    if (!chosen && !allocated.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, allocated.size() - 1);
      chosen = allocated[pick(rng_)];
      via_random = true;
    }
    if (!chosen) {
      if (dirty) emit(line, true, Category::ActivityScan, traffic);
      pos = end % n;
      continue;
    }
    Victim v{entry(*chosen).ospn, *chosen, via_random};
    cursor_ = (*chosen + 1) % n;
    pending_line_ = line;
    ++victims_;
    if (via_random) ++random_victims_;
    ++scan_hist_[fetched];
    if (audit_) {
      const ActivityEntry before = unpack_activity(fetched_words[*chosen - line * kActivityEntriesPerLine]);
      audit_({v, before.referenced, cached(v.ospn)});
    }
    return v;
  }
}

void ActivityTracker::flush(ActivityBatch& batch, std::vector<MemoryAccess>* traffic) const {
  for (std::uint64_t line : batch.lines()) {
    emit(line, false, Category::ActivityUpdate, traffic);
    emit(line, true, Category::ActivityUpdate, traffic);
  }
  batch = ActivityBatch{};
}

}  // namespace ibex
