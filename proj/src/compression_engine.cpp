#include "ibex/compression_engine.hpp"

#include <algorithm>
#include <cstring>
#include <set>
#include <sstream>
#include <string>

namespace ibex {

namespace {

bool stored_type(PageType t) { return t == PageType::Compressed || t == PageType::Incompressible; }

void push_lines(std::vector<MemoryAccess>& out, std::uint64_t base, unsigned lines, bool write, Category c) {
  for (unsigned i = 0; i < lines; ++i) out.push_back({Mpa{base + i * kLineSize}, write, c});
}

}  // namespace

std::size_t Plan::access_count() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.accesses.size();
  return n;
}

CompressionEngine::CompressionEngine(const EngineConfig& config, const DeviceLayout& layout,
                                     const CompressorBackend& backend)
    : config_(config),
      layout_(layout),
      backend_(backend),
      alloc_(layout, config.demotion_threshold),
      cache_(config.meta_cache, layout),
      tracker_(layout, config.seed) {
  const bool page4k = config.mode == CompressionMode::Page4k;
  if (page4k != (layout.metadata_format() == MetadataFormat::Naive))
    throw ConfigError("page4k mode pairs with the naive metadata format; colocated1k with colocated or compact");
  if (!page4k && !config.shadowed_promotion)
    throw ConfigError("co-located compression requires shadowed promotion");
}

// ---- metadata ---------------------------------------------------------------

int CompressionEngine::lookup_metadata(Plan& plan, std::uint64_t ospn) {
  MetaLookup r = cache_.lookup(ospn);
  const int s = plan.add(-1, config_.meta_cache.hit_latency_cycles);
  for (std::uint64_t line : r.filled)
    plan.steps[s].accesses.push_back({layout_.metadata_line_mpa(line), false, Category::MetadataRead});
  handle_evictions(plan, r.evicted);
  return s;
}

void CompressionEngine::handle_evictions(Plan& plan, const std::vector<MetaEviction>& evicted) {
  if (evicted.empty()) return;
  std::vector<MemoryAccess> traffic;
  ActivityBatch batch;
  for (const auto& ev : evicted) {
    if (ev.dirty) traffic.push_back({layout_.metadata_line_mpa(ev.line), true, Category::MetadataWrite});
    const auto range = layout_.ospns_in_metadata_line(ev.line);
    for (std::uint64_t o = range.first; o <= range.last; ++o) {
      auto it = pages_.find(o);
      if (it != pages_.end() && it->second.pchunk) tracker_.mark_referenced(*it->second.pchunk, batch);
    }
  }
  tracker_.flush(batch, &traffic);
  if (traffic.empty()) return;
  const int s = plan.add(-1, 0, true);
  plan.steps[s].accesses = std::move(traffic);
}

void CompressionEngine::touch_metadata(Plan& plan, std::uint64_t ospn) {
  if (cache_.mark_dirty(ospn)) return;
  // not resident: read-modify-write straight to the metadata region
  const LineSpan span = layout_.metadata_lines(ospn);
  const int r = plan.add(-1, 0, true);
  for (std::uint64_t l = span.first; l <= span.last; ++l)
    plan.steps[r].accesses.push_back({layout_.metadata_line_mpa(l), false, Category::MetadataRead});
  const int w = plan.add(r, 0, true);
  for (std::uint64_t l = span.first; l <= span.last; ++l)
    plan.steps[w].accesses.push_back({layout_.metadata_line_mpa(l), true, Category::MetadataWrite});
}

Plan CompressionEngine::flush_metadata() {
  Plan plan;
  if (config_.uncompressed_baseline) return plan;
  const int s = plan.add(-1, 0, true);
  for (std::uint64_t line : cache_.flush_dirty())
    plan.steps[s].accesses.push_back({layout_.metadata_line_mpa(line), true, Category::MetadataWrite});
  return plan;
}

// ---- storage helpers --------------------------------------------------------

PackedPageLayout CompressionEngine::layout_of(const PageState& st) const {
  if (config_.mode == CompressionMode::Colocated1k)
    return layout_from_descriptors(st.type, st.size_code, st.chunk_count > 0);
  PackedPageLayout l;
  l.mode = CompressionMode::Page4k;
  for (auto& b : l.blocks) {
    b.type = st.type[0];
    b.stored = st.chunk_count > 0;
  }
  l.chunk_count = st.chunk_count;
  l.stream_bytes = st.stream_bytes;
  return l;
}

Mpa CompressionEngine::chunk_line_mpa(const PageState& st, std::size_t off) const {
  const std::size_t ord = off / kChunkSize;
  if (ord >= st.chunk_count) throw InvariantViolation("stream offset beyond the page's chunks");
  return Mpa{layout_.chunk_mpa(st.sub_region, st.chunk[ord]).value + (off % kChunkSize) / kLineSize * kLineSize};
}

Mpa CompressionEngine::pchunk_line_mpa(const PageState& st, std::size_t off) const {
  return Mpa{layout_.pchunk_mpa(*st.pchunk).value + off / kLineSize * kLineSize};
}

void CompressionEngine::fetch_stream_range(const PageState& st, const std::vector<unsigned>& ordinals, Category c,
                                           std::vector<MemoryAccess>& out) const {
  for (unsigned ord : ordinals)
    push_lines(out, layout_.chunk_mpa(st.sub_region, st.chunk.at(ord)).value, kLinesPerChunk, false, c);
}

Bytes CompressionEngine::gather(const PageState& st) const {
  Bytes image(std::size_t{st.chunk_count} * kChunkSize, 0);
  for (unsigned i = 0; i < st.chunk_count; ++i) {
    auto it = cdata_.find(layout_.chunk_mpa(st.sub_region, st.chunk[i]).value >> 9);
    if (it != cdata_.end()) std::copy(it->second.begin(), it->second.end(), image.begin() + i * kChunkSize);
  }
  return image;
}

void CompressionEngine::scatter(const PageState& st, std::span<const std::uint8_t> image) {
  for (unsigned i = 0; i < st.chunk_count; ++i) {
    auto& dst = cdata_[layout_.chunk_mpa(st.sub_region, st.chunk[i]).value >> 9];
    std::copy_n(image.begin() + i * kChunkSize, kChunkSize, dst.begin());
  }
}

CompressionEngine::PageBuf& CompressionEngine::pchunk_data(std::uint64_t pchunk) {
  auto& slot = pdata_[pchunk];
  if (!slot) slot = std::make_unique<PageBuf>(PageBuf{});
  return *slot;
}

void CompressionEngine::record_histograms(const CompressedPage& cp) {
  ++stats_.chunk_histogram[cp.layout.chunk_count];
  if (cp.layout.mode != CompressionMode::Colocated1k) return;
  for (const auto& b : cp.layout.blocks)
    if (b.stored) ++stats_.block_sz_histogram[b.size_code];
}

void CompressionEngine::capacity_failure(const char* what) {
  ++stats_.capacity_events;
  if (config_.capacity_policy == CapacityPolicy::Abort) throw CapacityExhausted(what);
}

void CompressionEngine::free_chunks(PageState& st, std::vector<MemoryAccess>& traffic) {
  if (st.chunk_count == 0) return;
  for (unsigned i = 0; i < st.chunk_count; ++i) cdata_.erase(layout_.chunk_mpa(st.sub_region, st.chunk[i]).value >> 9);
  alloc_.free_cchunks(st.sub_region, std::span(st.chunk).first(st.chunk_count), &traffic);
  st.chunk = {};
  st.chunk_count = 0;
  st.stream_bytes = 0;
}

bool CompressionEngine::store_compressed(PageState& st, const CompressedPage& cp, std::vector<MemoryAccess>* traffic) {
  record_histograms(cp);
  st.chunk = {};
  st.chunk_count = 0;
  st.size_code = {};
  for (unsigned b = 0; b < kBlocksPerPage; ++b) st.type[b] = cp.layout.blocks[b].type;
  st.stream_bytes = cp.layout.mode == CompressionMode::Page4k ? cp.layout.stream_bytes : 0;
  if (cp.layout.chunk_count == 0) return true;
  std::vector<MemoryAccess> tmp;
  auto grant = alloc_.alloc_cchunks(cp.layout.chunk_count, &tmp);
  if (!grant) return false;
  if (traffic) traffic->insert(traffic->end(), tmp.begin(), tmp.end());
  st.sub_region = grant->sub_region;
  st.chunk_count = grant->count;
  std::copy(grant->chunks().begin(), grant->chunks().end(), st.chunk.begin());
  if (cp.layout.mode == CompressionMode::Colocated1k)
    for (unsigned b = 0; b < kBlocksPerPage; ++b) st.size_code[b] = cp.layout.blocks[b].size_code;
  scatter(st, cp.image);
  return true;
}

void CompressionEngine::erase_if_zero(std::uint64_t ospn) {
  auto it = pages_.find(ospn);
  if (it == pages_.end()) return;
  const PageState& st = it->second;
  if (!st.pchunk && st.chunk_count == 0 &&
      std::all_of(st.type.begin(), st.type.end(), [](PageType t) { return t == PageType::Zero; }))
    pages_.erase(it);
}

// ---- promotion --------------------------------------------------------------

bool CompressionEngine::ensure_pchunk(Plan& plan, std::uint64_t ospn, PageState& st, int& gate) {
  if (st.pchunk) return true;
  std::vector<MemoryAccess> traffic;
  auto idx = alloc_.alloc_pchunk(&traffic);
  if (!idx) {
    ++stats_.inline_demotions;
    gate = demote_into(plan, gate);
    idx = alloc_.alloc_pchunk(&traffic);
  }
  if (!idx) return false;
  const int s = plan.add(gate, 0);
  plan.steps[s].accesses = std::move(traffic);
  gate = s;
  st.pchunk = *idx;
  pchunk_owner_[*idx] = ospn;
  pchunk_data(*idx).fill(0);
  ActivityBatch batch;
  tracker_.on_promote(*idx, ospn, batch);
  const int a = plan.add(s, 0, true);
  tracker_.flush(batch, &plan.steps[a].accesses);
  ++stats_.page_promotions;
  return true;
}

CompressionEngine::Promotion CompressionEngine::promote_block(Plan& plan, std::uint64_t ospn, PageState& st,
                                                              unsigned block, int gate) {
  Promotion out;
  const PackedPageLayout layout = layout_of(st);
  const bool page4k = config_.mode == CompressionMode::Page4k;

  const int fetch = plan.add(gate, 0);
  fetch_stream_range(st, blocks_to_fetch(layout, block), Category::PromotionRead, plan.steps[fetch].accesses);
  const std::size_t dsize = page4k ? kPageSize : layout.blocks[block].aligned_size;
  const int dec = plan.add(fetch, config_.latency.decompress_cycles(dsize));
  out.respond_step = out.done_step = dec;
  out.content = extract_block(layout, gather(st), block, backend_);

  int g = dec;
  if (!ensure_pchunk(plan, ospn, st, g)) {
    ++stats_.unpromoted_reads;
    return out;
  }
  const int w = plan.add(g, 0, true);
  PageBuf& data = pchunk_data(*st.pchunk);
  if (page4k) {
    push_lines(plan.steps[w].accesses, layout_.pchunk_mpa(*st.pchunk).value, kLinesPerPage, true,
               Category::PromotionWrite);
    std::copy(out.content.begin(), out.content.end(), data.begin());
    st.type.fill(PageType::Promoted);
  } else {
    push_lines(plan.steps[w].accesses, layout_.pchunk_mpa(*st.pchunk).value + block * kBlockSize, kLinesPerBlock,
               true, Category::PromotionWrite);
    std::copy(out.content.begin(), out.content.end(), data.begin() + block * kBlockSize);
    st.type[block] = PageType::Promoted;
  }
  ++stats_.block_promotions;
  out.done_step = w;
  out.promoted = true;
  if (!config_.shadowed_promotion) out.done_step = make_dirty(plan, st, w);
  touch_metadata(plan, ospn);
  return out;
}

int CompressionEngine::make_dirty(Plan& plan, PageState& st, int gate) {
  if (!st.pchunk) throw InvariantViolation("make_dirty on a page without a P-chunk");
  if (st.chunk_count == 0) return gate;
  const PackedPageLayout layout = layout_of(st);
  const Bytes image = gather(st);
  PageBuf& data = pchunk_data(*st.pchunk);

  // blocks still living only in C-chunks move into the P-chunk first
  std::set<unsigned> ordinals;
  std::vector<unsigned> moved;
  std::size_t decompress_bytes = 0;
  for (unsigned b = 0; b < kBlocksPerPage; ++b) {
    if (!stored_type(st.type[b])) continue;
    for (unsigned o : blocks_to_fetch(layout, b)) ordinals.insert(o);
    moved.push_back(b);
    if (st.type[b] == PageType::Compressed) decompress_bytes += layout.blocks[b].aligned_size;
  }
  int last = gate;
  if (!moved.empty()) {
    const int r = plan.add(gate, 0, true);
    fetch_stream_range(st, std::vector<unsigned>(ordinals.begin(), ordinals.end()), Category::PromotionRead,
                       plan.steps[r].accesses);
    const int w = plan.add(r, config_.latency.decompress_cycles(decompress_bytes), true);
    for (unsigned b : moved) {
      const Bytes blk = extract_block(layout, image, b, backend_);
      if (config_.mode == CompressionMode::Page4k) {
        std::copy(blk.begin(), blk.end(), data.begin());
        push_lines(plan.steps[w].accesses, layout_.pchunk_mpa(*st.pchunk).value, kLinesPerPage, true,
                   Category::PromotionWrite);
        st.type.fill(PageType::Promoted);
        break;
      }
      std::copy(blk.begin(), blk.end(), data.begin() + b * kBlockSize);
      push_lines(plan.steps[w].accesses, layout_.pchunk_mpa(*st.pchunk).value + b * kBlockSize, kLinesPerBlock, true,
                 Category::PromotionWrite);
      st.type[b] = PageType::Promoted;
      ++stats_.block_promotions;
    }
    last = w;
  }
  const int f = plan.add(last, 0, true);
  stats_.shadow_chunks_freed += st.chunk_count;
  free_chunks(st, plan.steps[f].accesses);
  st.size_code = {};
  st.wr_cntr = 0;
  ++stats_.dirtying_writes;
  return f;
}

// ---- requests ---------------------------------------------------------------

Plan CompressionEngine::baseline_access(Ospa ospa, bool write, const Line* payload, Line* out) {
  Plan plan;
  const int s = plan.add(-1, 0);
  plan.steps[s].respond = true;
  plan.steps[s].accesses.push_back({Mpa{ospa.value / kLineSize * kLineSize}, write, Category::ExternalData});
  const std::size_t off = ospa.page_offset() / kLineSize * kLineSize;
  auto it = flat_.find(ospa.ospn());
  if (write) {
    if (!payload) return plan;
    if (it == flat_.end()) {
      if (all_zero(*payload)) return plan;
      it = flat_.emplace(ospa.ospn(), std::make_unique<PageBuf>(PageBuf{})).first;
    }
    std::copy(payload->begin(), payload->end(), it->second->begin() + off);
  } else if (out) {
    if (it == flat_.end())
      out->fill(0);
    else
      std::copy_n(it->second->begin() + off, kLineSize, out->begin());
  }
  return plan;
}

Plan CompressionEngine::read(Ospa ospa, Line* out) {
  const std::uint64_t ospn = ospa.ospn();
  if (ospn >= layout_.page_count()) throw AddressFault("read beyond advertised capacity");
  ++stats_.reads;
  if (config_.uncompressed_baseline) return baseline_access(ospa, false, nullptr, out);

  Plan plan;
  const int meta = lookup_metadata(plan, ospn);
  const std::size_t off = ospa.page_offset() / kLineSize * kLineSize;
  const unsigned block = static_cast<unsigned>(off / kBlockSize);
  auto it = pages_.find(ospn);
  const PageType type = it == pages_.end() ? PageType::Zero : it->second.type[block];

  switch (type) {
    case PageType::Zero: {
      ++stats_.zero_served;
      plan.steps[meta].respond = true;
      if (out) out->fill(0);
      break;
    }
    case PageType::Promoted: {
      PageState& st = it->second;
      const int s = plan.add(meta, 0);
      plan.steps[s].accesses.push_back({pchunk_line_mpa(st, off), false, Category::ExternalData});
      plan.steps[s].respond = true;
      if (out) std::copy_n(pchunk_data(*st.pchunk).begin() + off, kLineSize, out->begin());
      break;
    }
    case PageType::Incompressible: {
      PageState& st = it->second;
      const PackedPageLayout layout = layout_of(st);
      const std::size_t soff =
          config_.mode == CompressionMode::Page4k ? off : layout.blocks[block].start_offset + off % kBlockSize;
      const Mpa mpa = chunk_line_mpa(st, soff);
      const int s = plan.add(meta, 0);
      plan.steps[s].accesses.push_back({mpa, false, Category::ExternalData});
      plan.steps[s].respond = true;
      if (out) {
        const auto& c = cdata_[mpa.value >> 9];
        std::copy_n(c.begin() + mpa.value % kChunkSize, kLineSize, out->begin());
      }
      break;
    }
    case PageType::Compressed: {
      PageState& st = it->second;
      Promotion p = promote_block(plan, ospn, st, block, meta);
      plan.steps[p.respond_step].respond = true;
      const std::size_t in_content = config_.mode == CompressionMode::Page4k ? off : off % kBlockSize;
      if (out) std::copy_n(p.content.begin() + in_content, kLineSize, out->begin());
      break;
    }
  }
  if (config_.audit) audit();
  return plan;
}

Plan CompressionEngine::write(Ospa ospa, const Line* payload) {
  const std::uint64_t ospn = ospa.ospn();
  if (ospn >= layout_.page_count()) throw AddressFault("write beyond advertised capacity");
  ++stats_.writes;
  if (config_.uncompressed_baseline) return baseline_access(ospa, true, payload, nullptr);

  Plan plan;
  const int meta = lookup_metadata(plan, ospn);
  const std::size_t off = ospa.page_offset() / kLineSize * kLineSize;
  const unsigned block = static_cast<unsigned>(off / kBlockSize);
  const bool page4k = config_.mode == CompressionMode::Page4k;
  auto it = pages_.find(ospn);
  const PageType type = it == pages_.end() ? PageType::Zero : it->second.type[block];

  auto data_write = [&](PageState& st, int gate) {
    const int s = plan.add(gate, 0);
    plan.steps[s].accesses.push_back({pchunk_line_mpa(st, off), true, Category::ExternalData});
    plan.steps[s].respond = true;
    if (payload) std::copy(payload->begin(), payload->end(), pchunk_data(*st.pchunk).begin() + off);
  };

  switch (type) {
    case PageType::Zero: {
      if (!payload || all_zero(*payload)) {
        ++stats_.zero_served;
        plan.steps[meta].respond = true;
        break;
      }
      const bool fresh = it == pages_.end();
      PageState& st = fresh ? pages_[ospn] : it->second;
      int g = meta;
      if (!ensure_pchunk(plan, ospn, st, g)) {
        if (fresh) pages_.erase(ospn);
        ++stats_.capacity_events;
        throw CapacityExhausted("no P-chunk available for a write to a zero page");
      }
      // stored neighbours move out before this block's descriptor changes
      make_dirty(plan, st, g);
      const int z = plan.add(g, 0);
      const std::uint64_t base = layout_.pchunk_mpa(*st.pchunk).value;
      PageBuf& data = pchunk_data(*st.pchunk);
      if (page4k) {
        push_lines(plan.steps[z].accesses, base, kLinesPerPage, true, Category::PromotionWrite);
        data.fill(0);
        st.type.fill(PageType::Promoted);
      } else {
        push_lines(plan.steps[z].accesses, base + block * kBlockSize, kLinesPerBlock, true, Category::PromotionWrite);
        std::fill_n(data.begin() + block * kBlockSize, kBlockSize, 0);
        st.type[block] = PageType::Promoted;
        st.size_code[block] = 0;
      }
      ++stats_.zero_fills;
      data_write(st, z);
      touch_metadata(plan, ospn);
      break;
    }
    case PageType::Promoted: {
      PageState& st = it->second;
      data_write(st, meta);
      if (st.clean()) {
        make_dirty(plan, st, meta);
        touch_metadata(plan, ospn);
      }
      break;
    }
    case PageType::Compressed: {
      PageState& st = it->second;
      Promotion p = promote_block(plan, ospn, st, block, meta);
      if (!p.promoted) {
        ++stats_.capacity_events;
        throw CapacityExhausted("no P-chunk available to promote a written page");
      }
      data_write(st, p.done_step);
      make_dirty(plan, st, p.done_step);
      touch_metadata(plan, ospn);
      break;
    }
    case PageType::Incompressible: {
      PageState& st = it->second;
      const PackedPageLayout layout = layout_of(st);
      const std::size_t soff = page4k ? off : layout.blocks[block].start_offset + off % kBlockSize;
      const Mpa mpa = chunk_line_mpa(st, soff);
      const int s = plan.add(meta, 0);
      plan.steps[s].accesses.push_back({mpa, true, Category::ExternalData});
      plan.steps[s].respond = true;
      if (payload) std::copy(payload->begin(), payload->end(), cdata_[mpa.value >> 9].begin() + mpa.value % kChunkSize);
      ++stats_.incompressible_writes;
      if (++st.wr_cntr >= kWrCntrThreshold) {
        st.wr_cntr = 0;
        recompress(plan, ospn, st, s);
      }
      touch_metadata(plan, ospn);
      erase_if_zero(ospn);
      break;
    }
  }
  if (config_.audit) audit();
  return plan;
}

void CompressionEngine::recompress(Plan& plan, std::uint64_t ospn, PageState& st, int gate) {
  ++stats_.recompression_checks;
  if (st.pchunk) return;  // a promoted page is rewritten by demotion instead
  const PackedPageLayout layout = layout_of(st);
  const Bytes image = gather(st);
  const int r = plan.add(gate, 0, true);
  std::vector<unsigned> all(st.chunk_count);
  for (unsigned i = 0; i < st.chunk_count; ++i) all[i] = i;
  fetch_stream_range(st, all, Category::DemotionRead, plan.steps[r].accesses);

  PageBuf content{};
  if (config_.mode == CompressionMode::Page4k) {
    const Bytes page = extract_block(layout, image, 0, backend_);
    std::copy(page.begin(), page.end(), content.begin());
  } else {
    for (unsigned b = 0; b < kBlocksPerPage; ++b) {
      const Bytes blk = extract_block(layout, image, b, backend_);
      std::copy(blk.begin(), blk.end(), content.begin() + b * kBlockSize);
    }
  }
  const CompressedPage cp = classify_and_compress(content, config_.mode, backend_);
  const int c = plan.add(r, config_.latency.compress_cycles(kPageSize), true);
  if (cp.layout.chunk_count >= st.chunk_count) return;

  ++stats_.recompression_rewrites;
  free_chunks(st, plan.steps[c].accesses);
  if (!store_compressed(st, cp, &plan.steps[c].accesses))
    throw InvariantViolation("recompression could not reallocate the chunks it just freed");
  for (unsigned i = 0; i < st.chunk_count; ++i)
    push_lines(plan.steps[c].accesses, layout_.chunk_mpa(st.sub_region, st.chunk[i]).value, kLinesPerChunk, true,
               Category::DemotionWrite);
  (void)ospn;
}

// ---- demotion ---------------------------------------------------------------

Plan CompressionEngine::demote_one() {
  Plan plan;
  if (config_.uncompressed_baseline || tracker_.allocated_entries() == 0) return plan;
  demote_into(plan, -1);
  if (config_.audit) audit();
  return plan;
}

int CompressionEngine::demote_into(Plan& plan, int gate) {
  if (tracker_.allocated_entries() == 0) return gate;
  const int scan = plan.add(gate, 0, true);
  const Victim v = tracker_.select_victim([this](std::uint64_t o) { return cache_.probe(o); },
                                          &plan.steps[scan].accesses);
  auto it = pages_.find(v.ospn);
  if (it == pages_.end() || it->second.pchunk != v.pchunk)
    throw InvariantViolation("activity entry names page " + std::to_string(v.ospn) + " which does not own P-chunk " +
                             std::to_string(v.pchunk));
  PageState& st = it->second;
  const bool page4k = config_.mode == CompressionMode::Page4k;
  int last = scan;

  if (st.clean()) {
    for (unsigned b = 0; b < kBlocksPerPage; ++b) {
      if (st.type[b] != PageType::Promoted) continue;
      if (page4k)
        st.type[b] = st.chunk_count == kChunksPerPage ? PageType::Incompressible : PageType::Compressed;
      else
        st.type[b] = st.size_code[b] == 7 ? PageType::Incompressible : PageType::Compressed;
    }
    ++stats_.demotions_clean;
  } else {
    const int r = plan.add(scan, 0, true);
    PageBuf content = pchunk_data(v.pchunk);
    const std::uint64_t base = layout_.pchunk_mpa(v.pchunk).value;
    std::size_t compress_bytes = 0;
    for (unsigned b = 0; b < kBlocksPerPage; ++b) {
      if (st.type[b] == PageType::Promoted) {
        if (!page4k) push_lines(plan.steps[r].accesses, base + b * kBlockSize, kLinesPerBlock, false,
                                Category::DemotionRead);
        compress_bytes += kBlockSize;
      } else {
        std::fill_n(content.begin() + b * kBlockSize, kBlockSize, 0);
      }
    }
    if (page4k) {
      push_lines(plan.steps[r].accesses, base, kLinesPerPage, false, Category::DemotionRead);
      compress_bytes = kPageSize;
    }
    const CompressedPage cp = classify_and_compress(content, config_.mode, backend_);
    ++stats_.demotion_compressions;
    const int c = plan.add(r, config_.latency.compress_cycles(compress_bytes), true);
    PageState next;
    if (!store_compressed(next, cp, &plan.steps[c].accesses)) {
      ++stats_.demotions_failed;
      capacity_failure("compressed region exhausted during demotion");
      return c;
    }
    for (unsigned i = 0; i < next.chunk_count; ++i)
      push_lines(plan.steps[c].accesses, layout_.chunk_mpa(next.sub_region, next.chunk[i]).value, kLinesPerChunk,
                 true, Category::DemotionWrite);
    next.pchunk = st.pchunk;
    st = next;
    last = c;
    ++stats_.demotions_dirty;
  }

  const int f = plan.add(last, 0, true);
  auto& tail = plan.steps[f].accesses;
  alloc_.free_pchunk(v.pchunk, &tail);
  ActivityBatch batch;
  tracker_.on_demote(v.pchunk, batch, &tail);
  tracker_.flush(batch, &tail);
  pdata_.erase(v.pchunk);
  pchunk_owner_.erase(v.pchunk);
  st.pchunk.reset();
  st.wr_cntr = 0;
  touch_metadata(plan, v.ospn);
  erase_if_zero(v.ospn);
  return f;
}

// ---- setup and inspection -------------------------------------------------

void CompressionEngine::preload(std::uint64_t ospn, std::span<const std::uint8_t, kPageSize> content) {
  if (ospn >= layout_.page_count()) throw AddressFault("preload beyond advertised capacity");
  if (config_.uncompressed_baseline) {
    if (all_zero(content)) {
      flat_.erase(ospn);
      return;
    }
    auto& slot = flat_[ospn];
    slot = std::make_unique<PageBuf>();
    std::copy(content.begin(), content.end(), slot->begin());
    return;
  }
  if (pages_.count(ospn)) throw ContractViolation("preload of a page that already holds data");
  const CompressedPage cp = classify_and_compress(content, config_.mode, backend_);
  if (cp.layout.chunk_count == 0) return;
  PageState st;
  if (!store_compressed(st, cp, nullptr)) {
    ++stats_.capacity_events;
    throw CapacityExhausted("compressed region exhausted while loading initial page contents");
  }
  pages_.emplace(ospn, st);
}

Bytes CompressionEngine::peek_page(std::uint64_t ospn) const {
  Bytes page(kPageSize, 0);
  if (config_.uncompressed_baseline) {
    auto f = flat_.find(ospn);
    if (f != flat_.end()) std::copy(f->second->begin(), f->second->end(), page.begin());
    return page;
  }
  auto it = pages_.find(ospn);
  if (it == pages_.end()) return page;
  const PageState& st = it->second;
  const PackedPageLayout layout = layout_of(st);
  const Bytes image = gather(st);
  const PageBuf* p = st.pchunk ? pdata_.at(*st.pchunk).get() : nullptr;
  if (config_.mode == CompressionMode::Page4k) {
    if (st.type[0] == PageType::Promoted) return Bytes(p->begin(), p->end());
    if (st.type[0] == PageType::Zero) return page;
    return extract_block(layout, image, 0, backend_);
  }
  for (unsigned b = 0; b < kBlocksPerPage; ++b) {
    auto dst = page.begin() + b * kBlockSize;
    if (st.type[b] == PageType::Promoted) {
      std::copy_n(p->begin() + b * kBlockSize, kBlockSize, dst);
    } else if (st.type[b] != PageType::Zero) {
      const Bytes blk = extract_block(layout, image, b, backend_);
      std::copy(blk.begin(), blk.end(), dst);
    }
  }
  return page;
}

const PageState* CompressionEngine::page(std::uint64_t ospn) const {
  auto it = pages_.find(ospn);
  return it == pages_.end() ? nullptr : &it->second;
}

std::vector<std::uint64_t> CompressionEngine::touched_pages() const {
  std::vector<std::uint64_t> out;
  if (config_.uncompressed_baseline) {
    for (const auto& [o, _] : flat_) out.push_back(o);
  } else {
    for (const auto& [o, _] : pages_) out.push_back(o);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t CompressionEngine::allocated_bytes() const {
  return (config_.uncompressed_baseline ? flat_.size() : pages_.size()) * kPageSize;
}

std::uint64_t CompressionEngine::physical_bytes() const {
  if (config_.uncompressed_baseline) return flat_.size() * kPageSize;
  return alloc_.allocated_cchunks() * kChunkSize + alloc_.allocated_pchunks() * kPageSize;
}

Bytes CompressionEngine::encode_entry(std::uint64_t ospn) const {
  PageState zero;
  const PageState* found = page(ospn);
  const PageState& st = found ? *found : zero;
  const bool promoted = st.pchunk.has_value();
  std::uint8_t num_chunks = 0;
  if (promoted && st.chunk_count == 0)
    num_chunks = 7;
  else if (st.chunk_count > 0)
    num_chunks = static_cast<std::uint8_t>(st.chunk_count - 1);
  auto full_ptr = [&](unsigned i) {
    return static_cast<std::uint32_t>(layout_.chunk_mpa(st.sub_region, st.chunk[i]).value >> 9);
  };

  switch (layout_.metadata_format()) {
    case MetadataFormat::Naive: {
      NaiveEntry e;
      e.type = st.type[0];
      e.num_chunks = num_chunks;
      e.wr_cntr = st.wr_cntr;
      for (unsigned i = 0; i < st.chunk_count; ++i) e.ptr_chunk[i] = full_ptr(i);
      if (promoted) e.ptr_chunk[7] = static_cast<std::uint32_t>(layout_.pchunk_mpa(*st.pchunk).value >> 9);
      const auto enc = encode_naive(e);
      return Bytes(enc.bytes.begin(), enc.bytes.end());
    }
    case MetadataFormat::Colocated: {
      ColocatedEntry e;
      e.block_type = st.type;
      e.block_sz = st.size_code;
      e.num_chunks = num_chunks;
      e.wr_cntr = st.wr_cntr;
      for (unsigned i = 0; i < st.chunk_count; ++i) e.ptr_chunk[i] = full_ptr(i);
      if (promoted) e.ptr_chunk[7] = static_cast<std::uint32_t>(layout_.pchunk_mpa(*st.pchunk).value >> 9);
      const auto enc = encode_colocated(e);
      return Bytes(enc.bytes.begin(), enc.bytes.end());
    }
    case MetadataFormat::Compact: {
      CompactEntry e;
      e.block_type = st.type;
      e.block_sz = st.size_code;
      e.num_chunks = num_chunks;
      e.wr_cntr = st.wr_cntr;
      e.sub_region = static_cast<std::uint8_t>(st.chunk_count ? st.sub_region : 0);
      for (unsigned i = 0; i < std::min<unsigned>(st.chunk_count, 7); ++i) e.ptr_chunk[i] = st.chunk[i];
      if (st.chunk_count == 8) e.ptr_last = st.chunk[7];
      if (promoted) e.ptr_last = pchunk_pointer(layout_.pchunk_mpa(*st.pchunk));
      const auto enc = encode_compact(e);
      return Bytes(enc.bytes.begin(), enc.bytes.end());
    }
  }
  return {};
}

std::string CompressionEngine::describe_entry(std::uint64_t ospn) const {
  const Bytes raw = encode_entry(ospn);
  std::ostringstream os;
  auto types = [&](const std::array<PageType, 4>& t, const std::array<std::uint8_t, 4>& s) {
    for (unsigned b = 0; b < 4; ++b) os << (b ? " " : "") << to_string(t[b]) << '/' << unsigned(s[b]);
  };
  switch (layout_.metadata_format()) {
    case MetadataFormat::Naive: {
      const NaiveEntry e = decode_naive(raw);
      os << "type=" << to_string(e.type) << " num_chunks=" << unsigned(e.num_chunks)
         << " wr_cntr=" << unsigned(e.wr_cntr) << " ptr=";
      for (unsigned i = 0; i < 8; ++i) os << (i ? "," : "") << e.ptr_chunk[i];
      break;
    }
    case MetadataFormat::Colocated: {
      const ColocatedEntry e = decode_colocated(raw);
      os << "blocks=[";
      types(e.block_type, e.block_sz);
      os << "] num_chunks=" << unsigned(e.num_chunks) << " wr_cntr=" << unsigned(e.wr_cntr) << " ptr=";
      for (unsigned i = 0; i < 8; ++i) os << (i ? "," : "") << e.ptr_chunk[i];
      break;
    }
    case MetadataFormat::Compact: {
      const CompactEntry e = decode_compact(raw);
      os << "blocks=[";
      types(e.block_type, e.block_sz);
      os << "] num_chunks=" << unsigned(e.num_chunks) << " wr_cntr=" << unsigned(e.wr_cntr)
         << " sub_region=" << unsigned(e.sub_region) << " ptr=";
      for (unsigned i = 0; i < 7; ++i) os << (i ? "," : "") << e.ptr_chunk[i];
      os << " last=" << e.ptr_last;
      break;
    }
  }
  return os.str();
}

void CompressionEngine::audit() const {
  if (config_.uncompressed_baseline) return;
  if (!alloc_.conserved()) throw InvariantViolation("chunk allocator lost or duplicated a chunk");
  std::uint64_t promoted = 0, cchunks = 0;
  for (const auto& [ospn, st] : pages_) {
    if (st.pchunk) {
      ++promoted;
      if (!alloc_.pchunk_allocated(*st.pchunk)) throw InvariantViolation("page holds a free P-chunk");
      const ActivityEntry a = tracker_.entry(*st.pchunk);
      if (!a.allocated || a.ospn != ospn) throw InvariantViolation("activity entry does not match its page");
    }
    cchunks += st.chunk_count;
    for (unsigned i = 0; i < st.chunk_count; ++i)
      if (!alloc_.cchunk_allocated(st.sub_region, st.chunk[i])) throw InvariantViolation("page holds a free C-chunk");
    if (config_.mode == CompressionMode::Colocated1k && st.chunk_count > 0 &&
        layout_of(st).chunk_count != st.chunk_count)
      throw InvariantViolation("block sizes disagree with the page's chunk count");
  }
  if (promoted != alloc_.allocated_pchunks() || promoted != tracker_.allocated_entries())
    throw InvariantViolation("promoted pages, P-chunks and activity entries disagree");
  if (cchunks != alloc_.allocated_cchunks()) throw InvariantViolation("C-chunks leaked");
}

}  // namespace ibex
