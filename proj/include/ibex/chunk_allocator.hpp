#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ibex/addr_space.hpp"
#include "ibex/types.hpp"

namespace ibex {

/// Free list of fixed-size chunks. The head lives in a register; next
/// pointers live in-band in the first bytes of each free chunk, so popping or
/// pushing costs one 64B access at the chunk touched. Chunks never handed out
/// since construction form an implicit index-ordered tail of the list.
class FreeList {
 public:
  static constexpr std::uint64_t kNil = ~0ull;

  explicit FreeList(std::uint64_t total = 0) : total_(total) {}

  std::uint64_t total() const { return total_; }
  std::uint64_t free_count() const { return total_ - allocated_; }
  std::uint64_t allocated_count() const { return allocated_; }
  std::uint64_t head() const;

  /// Removes and returns the head; kNil when empty.
  std::uint64_t pop();
  /// Pushes `index` as the new head. Throws InvariantViolation on double free.
  void push(std::uint64_t index);
  bool is_allocated(std::uint64_t index) const;
  /// Recounts list membership: every chunk is either live or reachable from
  /// the head exactly once.
  bool audit() const;

 private:
  std::uint64_t total_ = 0;
  std::uint64_t allocated_ = 0;
  std::uint64_t watermark_ = 0;  // indices >= watermark were never allocated
  std::vector<std::uint64_t> pushed_;
  std::vector<bool> live_;
};

struct ChunkGrant {
  std::uint32_t sub_region = 0;
  std::uint8_t count = 0;
  std::array<std::uint32_t, 8> index{};  // sub-region-relative
  std::span<const std::uint32_t> chunks() const { return std::span(index).first(count); }
};

/// C-chunk lists per sub-region plus the P-chunk list of the promoted region.
/// Every list operation appends its in-band pointer traffic to `traffic`
/// (category Allocator); pass nullptr for untimed setup work.
class ChunkAllocator {
 public:
  static constexpr std::uint64_t kDefaultDemotionThreshold = 256;

  explicit ChunkAllocator(const DeviceLayout& layout,
                          std::uint64_t demotion_threshold = kDefaultDemotionThreshold);

  /// n chunks from the lowest-index sub-region holding at least n free ones.
  /// nullopt (and a counted exhaustion event) when no sub-region can serve.
  std::optional<ChunkGrant> alloc_cchunks(unsigned n, std::vector<MemoryAccess>* traffic);
  void free_cchunks(std::uint32_t sub_region, std::span<const std::uint32_t> chunks,
                    std::vector<MemoryAccess>* traffic);

  /// P-chunk index, or nullopt when the promoted region is full.
  std::optional<std::uint64_t> alloc_pchunk(std::vector<MemoryAccess>* traffic);
  void free_pchunk(std::uint64_t index, std::vector<MemoryAccess>* traffic);

  /// Raised while free P-chunks are below the demotion threshold.
  bool demotion_needed() const { return pchunks_.free_count() < demotion_threshold_; }
  std::uint64_t demotion_threshold() const { return demotion_threshold_; }

  std::uint64_t free_pchunks() const { return pchunks_.free_count(); }
  std::uint64_t allocated_pchunks() const { return pchunks_.allocated_count(); }
  std::uint64_t free_cchunks(std::uint32_t sub_region) const { return cchunks_.at(sub_region).free_count(); }
  std::uint64_t allocated_cchunks() const;
  std::uint64_t allocated_cchunks(std::uint32_t sub_region) const {
    return cchunks_.at(sub_region).allocated_count();
  }
  std::uint64_t cchunks_per_sub_region() const { return layout_.chunks_per_sub_region(); }
  std::uint32_t sub_region_count() const { return static_cast<std::uint32_t>(cchunks_.size()); }
  bool cchunk_allocated(std::uint32_t sub_region, std::uint32_t index) const {
    return cchunks_.at(sub_region).is_allocated(index);
  }
  bool pchunk_allocated(std::uint64_t index) const { return pchunks_.is_allocated(index); }
  std::uint64_t exhaustion_events() const { return exhaustion_events_; }

  /// allocated + free == total for every list, by recount.
  bool conserved() const;

 private:
  DeviceLayout layout_;
  std::uint64_t demotion_threshold_;
  std::vector<FreeList> cchunks_;
  FreeList pchunks_;
  std::uint64_t exhaustion_events_ = 0;
};

}  // namespace ibex
