#include "ibex/chunk_allocator.hpp"

#include <string>
#include <vector>

namespace ibex {

std::uint64_t FreeList::head() const {
  if (!pushed_.empty()) return pushed_.back();
  return watermark_ < total_ ? watermark_ : kNil;
}

std::uint64_t FreeList::pop() {
  std::uint64_t idx;
  if (!pushed_.empty()) {
    idx = pushed_.back();
    pushed_.pop_back();
  } else if (watermark_ < total_) {
    idx = watermark_++;
    live_.push_back(false);
  } else {
    return kNil;
  }
  live_[idx] = true;
  ++allocated_;
  return idx;
}

void FreeList::push(std::uint64_t index) {
  if (!is_allocated(index)) throw InvariantViolation("free of chunk " + std::to_string(index) + " that is not allocated");
  live_[index] = false;
  pushed_.push_back(index);
  --allocated_;
}

bool FreeList::is_allocated(std::uint64_t index) const { return index < live_.size() && live_[index]; }

bool FreeList::audit() const {
  std::uint64_t live = 0;
  for (bool b : live_) live += b;
  if (live != allocated_) return false;
  std::vector<bool> seen(live_.size(), false);
  for (auto idx : pushed_) {
    if (idx >= live_.size() || live_[idx] || seen[idx]) return false;
    seen[idx] = true;
  }
  return live + pushed_.size() + (total_ - watermark_) == total_;
}

ChunkAllocator::ChunkAllocator(const DeviceLayout& layout, std::uint64_t demotion_threshold)
    : layout_(layout),
      demotion_threshold_(demotion_threshold),
      cchunks_(layout.sub_region_count(), FreeList(layout.chunks_per_sub_region())),
      pchunks_(layout.pchunk_count()) {}

std::optional<ChunkGrant> ChunkAllocator::alloc_cchunks(unsigned n, std::vector<MemoryAccess>* traffic) {
  if (n < 1 || n > 8) throw ContractViolation("alloc_cchunks: n must be in 1..8");
  for (std::uint32_t sr = 0; sr < cchunks_.size(); ++sr) {
    FreeList& list = cchunks_[sr];
    if (list.free_count() < n) continue;
    ChunkGrant g;
    g.sub_region = sr;
    g.count = static_cast<std::uint8_t>(n);
    for (unsigned i = 0; i < n; ++i) {
      const auto idx = static_cast<std::uint32_t>(list.pop());
      // reading the popped node yields the next head
      if (traffic) traffic->push_back({layout_.chunk_mpa(sr, idx), false, Category::Allocator});
      g.index[i] = idx;
    }
    return g;
  }
  ++exhaustion_events_;
  return std::nullopt;
}

void ChunkAllocator::free_cchunks(std::uint32_t sub_region, std::span<const std::uint32_t> chunks,
                                  std::vector<MemoryAccess>* traffic) {
  FreeList& list = cchunks_.at(sub_region);
  for (auto idx : chunks) {
    list.push(idx);
    if (traffic) traffic->push_back({layout_.chunk_mpa(sub_region, idx), true, Category::Allocator});
  }
}

std::optional<std::uint64_t> ChunkAllocator::alloc_pchunk(std::vector<MemoryAccess>* traffic) {
  const std::uint64_t idx = pchunks_.pop();
  if (idx == FreeList::kNil) return std::nullopt;
  if (traffic) traffic->push_back({layout_.pchunk_mpa(idx), false, Category::Allocator});
  return idx;
}

void ChunkAllocator::free_pchunk(std::uint64_t index, std::vector<MemoryAccess>* traffic) {
  pchunks_.push(index);
  if (traffic) traffic->push_back({layout_.pchunk_mpa(index), true, Category::Allocator});
}

std::uint64_t ChunkAllocator::allocated_cchunks() const {
  std::uint64_t n = 0;
  for (const auto& l : cchunks_) n += l.allocated_count();
  return n;
}

bool ChunkAllocator::conserved() const {
  for (const auto& l : cchunks_)
    if (!l.audit()) return false;
  return pchunks_.audit();
}

}  // namespace ibex
