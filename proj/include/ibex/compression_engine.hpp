#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "ibex/activity_tracker.hpp"
#include "ibex/addr_space.hpp"
#include "ibex/block_compressor.hpp"
#include "ibex/chunk_allocator.hpp"
#include "ibex/metadata_cache.hpp"
#include "ibex/metadata_codec.hpp"

namespace ibex {

enum class CapacityPolicy : std::uint8_t { Abort, Count };

struct EngineConfig {
  CompressionMode mode = CompressionMode::Colocated1k;
  bool shadowed_promotion = true;
  bool uncompressed_baseline = false;
  LatencyModel latency;
  MetaCacheConfig meta_cache;
  std::uint64_t demotion_threshold = ChunkAllocator::kDefaultDemotionThreshold;
  std::uint64_t seed = 1;
  CapacityPolicy capacity_policy = CapacityPolicy::Abort;
  bool audit = false;  // conservation checks after every operation
};

/// One group of channel accesses issued together. A step starts when step
/// `after` completes (-1: the operation's start) plus `delay_cycles`, and
/// completes when its last access does.
struct PlanStep {
  int after = -1;
  std::uint64_t delay_cycles = 0;
  std::vector<MemoryAccess> accesses;
  bool respond = false;
  bool background = false;
};

struct Plan {
  std::vector<PlanStep> steps;

  int add(int after, std::uint64_t delay_cycles, bool background = false) {
    steps.push_back(PlanStep{after, delay_cycles, {}, false, background});
    return static_cast<int>(steps.size()) - 1;
  }
  std::size_t access_count() const;
};

struct EngineStats {
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t zero_served = 0;
  std::uint64_t page_promotions = 0;   // P-chunk allocations
  std::uint64_t block_promotions = 0;  // blocks (or whole pages) decompressed into a P-chunk
  std::uint64_t zero_fills = 0;
  std::uint64_t dirtying_writes = 0;
  std::uint64_t shadow_chunks_freed = 0;
  std::uint64_t incompressible_writes = 0;
  std::uint64_t recompression_checks = 0;
  std::uint64_t recompression_rewrites = 0;
  std::uint64_t demotions_clean = 0;
  std::uint64_t demotions_dirty = 0;
  std::uint64_t demotion_compressions = 0;
  std::uint64_t demotions_failed = 0;
  std::uint64_t inline_demotions = 0;
  std::uint64_t capacity_events = 0;
  std::uint64_t unpromoted_reads = 0;  // compressed reads served without promotion (P-chunks exhausted)
  std::array<std::uint64_t, 9> chunk_histogram{};   // chunk count of every compressed page image
  std::array<std::uint64_t, 8> block_sz_histogram{};  // size code of every compressed 1KB block
};

/// Per-page translation state. Pages absent from the table are zero pages.
struct PageState {
  std::array<PageType, 4> type{};
  std::array<std::uint8_t, 4> size_code{};
  std::uint8_t chunk_count = 0;  // C-chunks still allocated (shadows included)
  std::uint32_t sub_region = 0;
  std::array<std::uint32_t, 8> chunk{};
  std::optional<std::uint64_t> pchunk;
  std::uint8_t wr_cntr = 0;
  std::uint16_t stream_bytes = 0;  // page4k compressed size

  bool promoted() const { return pchunk.has_value(); }
  bool clean() const { return pchunk && chunk_count > 0; }
  bool dirty() const { return pchunk && chunk_count == 0; }
};

/// Request pipeline of the device: translation through the metadata cache,
/// promotion on access, the write path, incompressible-page recompression and
/// demotion. Every operation mutates functional state immediately and
/// returns the timed plan of channel accesses it implies.
class CompressionEngine {
 public:
  CompressionEngine(const EngineConfig& config, const DeviceLayout& layout, const CompressorBackend& backend);

  Plan read(Ospa ospa, Line* out);
  /// `payload` null: the line keeps its current content.
  Plan write(Ospa ospa, const Line* payload);

  bool demotion_needed() const { return !config_.uncompressed_baseline && alloc_.demotion_needed(); }
  bool has_promoted_pages() const { return tracker_.allocated_entries() > 0; }
  /// Selects and demotes one victim. Empty plan if there is nothing to do.
  Plan demote_one();
  /// Writes back every dirty metadata line.
  Plan flush_metadata();

  /// Untimed initial content.
  void preload(std::uint64_t ospn, std::span<const std::uint8_t, kPageSize> content);

  /// Functional view of a page without timing side effects.
  Bytes peek_page(std::uint64_t ospn) const;

  const PageState* page(std::uint64_t ospn) const;
  std::vector<std::uint64_t> touched_pages() const;
  /// Metadata entry for `ospn` encoded in the configured format.
  Bytes encode_entry(std::uint64_t ospn) const;
  std::string describe_entry(std::uint64_t ospn) const;

  std::uint64_t allocated_bytes() const;  // non-zero pages x 4KB
  std::uint64_t physical_bytes() const;   // C-chunks x 512 + P-chunks x 4KB

  const EngineStats& stats() const { return stats_; }
  const EngineConfig& config() const { return config_; }
  const DeviceLayout& layout() const { return layout_; }
  const ChunkAllocator& allocator() const { return alloc_; }
  const MetadataCache& metadata_cache() const { return cache_; }
  ActivityTracker& tracker() { return tracker_; }
  const ActivityTracker& tracker() const { return tracker_; }
  MetadataFormat format() const { return layout_.metadata_format(); }

  /// Cross-module consistency: allocator conservation, one activity entry per
  /// promoted page, chunk ownership. Throws InvariantViolation.
  void audit() const;

 private:
  using PageBuf = std::array<std::uint8_t, kPageSize>;

  int lookup_metadata(Plan& plan, std::uint64_t ospn);
  void handle_evictions(Plan& plan, const std::vector<MetaEviction>& evicted);
  void touch_metadata(Plan& plan, std::uint64_t ospn);

  PackedPageLayout layout_of(const PageState& st) const;
  Mpa chunk_line_mpa(const PageState& st, std::size_t stream_offset) const;
  Mpa pchunk_line_mpa(const PageState& st, std::size_t page_offset) const;
  void fetch_stream_range(const PageState& st, const std::vector<unsigned>& ordinals, Category c,
                          std::vector<MemoryAccess>& out) const;

  Bytes gather(const PageState& st) const;
  void scatter(const PageState& st, std::span<const std::uint8_t> image);
  PageBuf& pchunk_data(std::uint64_t pchunk);

  struct Promotion {
    int respond_step = -1;
    int done_step = -1;
    bool promoted = false;
    Bytes content;  // decompressed block (whole page in page4k mode)
  };

  bool ensure_pchunk(Plan& plan, std::uint64_t ospn, PageState& st, int& gate);
  Promotion promote_block(Plan& plan, std::uint64_t ospn, PageState& st, unsigned block, int gate);
  int make_dirty(Plan& plan, PageState& st, int gate);
  void free_chunks(PageState& st, std::vector<MemoryAccess>& traffic);
  bool store_compressed(PageState& st, const CompressedPage& cp, std::vector<MemoryAccess>* traffic);
  void recompress(Plan& plan, std::uint64_t ospn, PageState& st, int gate);
  int demote_into(Plan& plan, int gate);
  void capacity_failure(const char* what);
  void record_histograms(const CompressedPage& cp);
  void erase_if_zero(std::uint64_t ospn);

  Plan baseline_access(Ospa ospa, bool write, const Line* payload, Line* out);

  EngineConfig config_;
  DeviceLayout layout_;
  const CompressorBackend& backend_;
  ChunkAllocator alloc_;
  MetadataCache cache_;
  ActivityTracker tracker_;
  std::unordered_map<std::uint64_t, PageState> pages_;
  std::unordered_map<std::uint64_t, std::unique_ptr<PageBuf>> pdata_;
  std::unordered_map<std::uint64_t, std::array<std::uint8_t, kChunkSize>> cdata_;  // by chunk mpa >> 9
  std::unordered_map<std::uint64_t, std::unique_ptr<PageBuf>> flat_;               // baseline store
  std::unordered_map<std::uint64_t, std::uint64_t> pchunk_owner_;
  EngineStats stats_;
};

}  // namespace ibex
