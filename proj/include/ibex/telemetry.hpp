#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ibex/types.hpp"
#include "ibex/workload.hpp"

namespace ibex {

std::optional<Category> category_from_string(std::string_view name);

/// Per-category count of 64B channel accesses.
class TrafficBreakdown {
 public:
  void record(const MemoryAccess& a) { ++counts_[static_cast<std::size_t>(a.category)]; }
  std::uint64_t count(Category c) const { return counts_[static_cast<std::size_t>(c)]; }
  std::uint64_t total() const;
  double share(Category c) const;
  /// Metadata reads + writes.
  std::uint64_t metadata() const { return count(Category::MetadataRead) + count(Category::MetadataWrite); }
  const std::array<std::uint64_t, kCategoryCount>& counts() const { return counts_; }

 private:
  std::array<std::uint64_t, kCategoryCount> counts_{};
};

struct RatioSample {
  std::uint64_t request = 0;
  std::uint64_t allocated_bytes = 0;
  std::uint64_t physical_bytes = 0;
  double ratio = 0.0;
};

/// Compression ratio sampled every `interval` completed requests.
class RatioSampler {
 public:
  explicit RatioSampler(std::uint64_t interval = 100000) : interval_(interval) {}

  bool due(std::uint64_t completed) const { return interval_ && completed % interval_ == 0; }
  void sample(std::uint64_t request, std::uint64_t allocated, std::uint64_t physical);
  /// Geometric mean over samples with a defined ratio; 0 when none.
  double geomean() const;
  const std::vector<RatioSample>& samples() const { return samples_; }
  std::uint64_t interval() const { return interval_; }

 private:
  std::uint64_t interval_;
  std::vector<RatioSample> samples_;
};

class LatencyStats {
 public:
  void add(Tick t) { values_.push_back(t); }
  std::size_t count() const { return values_.size(); }
  /// Nearest-rank percentile, p in (0, 100].
  Tick percentile(double p) const;
  double mean() const;
  Tick max() const;

 private:
  std::vector<Tick> values_;
};

enum class PagefaultMode : std::uint8_t { Uncompressed, Ibex };

struct PagefaultResult {
  std::uint64_t accesses = 0;
  std::uint64_t cold_faults = 0;
  std::uint64_t capacity_faults = 0;
  std::uint64_t resident_bytes_peak = 0;
};

/// Resident bytes a page costs in `mode`: 4KB uncompressed; under IBEX the
/// chunk-allocated size implied by the page's annotation (zero pages cost 0,
/// unannotated pages 4KB).
std::uint64_t pagefault_page_cost(const TraceRecord& first, PagefaultMode mode);

/// LRU resident set bounded by `capacity_bytes`; a miss on a page seen
/// before is a capacity fault, a first touch is a cold fault.
PagefaultResult pagefault_analysis(const Trace& trace, std::uint64_t capacity_bytes, PagefaultMode mode);

}  // namespace ibex
