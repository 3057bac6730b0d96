#include "ibex/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <list>
#include <numeric>
#include <unordered_map>

#include "ibex/metadata_codec.hpp"

namespace ibex {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::ExternalData: return "external_data";
    case Category::MetadataRead: return "metadata_read";
    case Category::MetadataWrite: return "metadata_write";
    case Category::PromotionRead: return "promotion_read";
    case Category::PromotionWrite: return "promotion_write";
    case Category::DemotionRead: return "demotion_read";
    case Category::DemotionWrite: return "demotion_write";
    case Category::ActivityScan: return "activity_scan";
    case Category::ActivityUpdate: return "activity_update";
    case Category::Allocator: return "allocator";
  }
  throw InvariantViolation("unknown traffic category");
}

std::optional<Category> category_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryCount; ++i)
    if (to_string(static_cast<Category>(i)) == name) return static_cast<Category>(i);
  return std::nullopt;
}

std::uint64_t TrafficBreakdown::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0ull); }

double TrafficBreakdown::share(Category c) const {
  const std::uint64_t t = total();
  return t ? double(count(c)) / double(t) : 0.0;
}

void RatioSampler::sample(std::uint64_t request, std::uint64_t allocated, std::uint64_t physical) {
  samples_.push_back({request, allocated, physical, physical ? double(allocated) / double(physical) : 0.0});
}

double RatioSampler::geomean() const {
  double log_sum = 0;
  std::size_t n = 0;
  for (const auto& s : samples_) {
    if (s.ratio <= 0) continue;
    log_sum += std::log(s.ratio);
    ++n;
  }
  return n ? std::exp(log_sum / double(n)) : 0.0;
}

Tick LatencyStats::percentile(double p) const {
  if (values_.empty()) return 0;
  std::vector<Tick> v = values_;
  const std::size_t rank = static_cast<std::size_t>(std::ceil(p / 100.0 * double(v.size())));
  const std::size_t k = std::clamp<std::size_t>(rank, 1, v.size()) - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

double LatencyStats::mean() const {
  if (values_.empty()) return 0;
  long double sum = 0;
  for (Tick t : values_) sum += t;
  return static_cast<double>(sum / values_.size());
}

Tick LatencyStats::max() const { return values_.empty() ? 0 : *std::max_element(values_.begin(), values_.end()); }

std::uint64_t pagefault_page_cost(const TraceRecord& r, PagefaultMode mode) {
  if (mode == PagefaultMode::Uncompressed) return kPageSize;
  switch (r.kind) {
    case Annotation::Zero: return 0;
    case Annotation::Ratio: {
      const auto size = static_cast<std::size_t>(std::ceil(double(kPageSize) / r.ratio));
      return required_chunks(std::min<std::size_t>(size, kPageSize)).chunk_count * kChunkSize;
    }
    default: return kPageSize;
  }
}

PagefaultResult pagefault_analysis(const Trace& trace, std::uint64_t capacity_bytes, PagefaultMode mode) {
  if (capacity_bytes < kPageSize) throw ConfigError("resident capacity must hold at least one page");
  PagefaultResult out;
  struct Resident {
    std::list<std::uint64_t>::iterator pos;
    std::uint64_t cost;
  };
  std::list<std::uint64_t> lru;  // front = most recent
  std::unordered_map<std::uint64_t, Resident> resident;
  std::unordered_map<std::uint64_t, std::uint64_t> cost;  // fixed at first touch
  std::uint64_t used = 0;

  for (const auto& r : trace.records) {
    ++out.accesses;
    const std::uint64_t page = r.ospa.ospn();
    if (auto it = resident.find(page); it != resident.end()) {
      lru.splice(lru.begin(), lru, it->second.pos);
      continue;
    }
    auto [c, first] = cost.try_emplace(page, pagefault_page_cost(r, mode));
    if (first)
      ++out.cold_faults;
    else
      ++out.capacity_faults;
    while (used + c->second > capacity_bytes && !lru.empty()) {
      const std::uint64_t victim = lru.back();
      used -= resident.at(victim).cost;
      resident.erase(victim);
      lru.pop_back();
    }
    lru.push_front(page);
    resident[page] = {lru.begin(), c->second};
    used += c->second;
    out.resident_bytes_peak = std::max(out.resident_bytes_peak, used);
  }
  return out;
}

}  // namespace ibex
