#include "ibex/metadata_cache.hpp"

#include <algorithm>

namespace ibex {

MetadataCache::MetadataCache(const MetaCacheConfig& config, const DeviceLayout& layout)
    : config_(config), layout_(layout), sets_(config.sets()) {
  if (config.ways == 0 || sets_ == 0 || config.capacity_bytes % (kLineSize * config.ways) != 0)
    throw ConfigError("metadata cache: capacity must be a positive multiple of 64B x ways");
  ways_.resize(sets_ * config.ways);
}

MetadataCache::Way* MetadataCache::find(std::uint64_t line) {
  Way* set = &ways_[(line % sets_) * config_.ways];
  for (unsigned w = 0; w < config_.ways; ++w)
    if (set[w].valid && set[w].line == line) return &set[w];
  return nullptr;
}

const MetadataCache::Way* MetadataCache::find(std::uint64_t line) const {
  return const_cast<MetadataCache*>(this)->find(line);
}

std::optional<MetaEviction> MetadataCache::fill(std::uint64_t line) {
  Way* set = &ways_[(line % sets_) * config_.ways];
  Way* slot = nullptr;
  for (unsigned w = 0; w < config_.ways && !slot; ++w)
    if (!set[w].valid) slot = &set[w];
  std::optional<MetaEviction> victim;
  if (!slot) {
    slot = std::min_element(set, set + config_.ways,
                            [](const Way& a, const Way& b) { return a.last_use < b.last_use; });
    victim = MetaEviction{slot->line, slot->dirty, insertions_ + 1 - slot->inserted_at};
    ++stats_.evictions;
    if (slot->dirty) ++stats_.dirty_evictions;
    stats_.insertion_age_sum += victim->insertion_age;
    stats_.insertion_age_max = std::max(stats_.insertion_age_max, victim->insertion_age);
  }
  *slot = Way{line, true, false, ++clock_, ++insertions_};
  ++stats_.line_fills;
  return victim;
}

MetaLookup MetadataCache::lookup(std::uint64_t ospn) {
  const LineSpan span = layout_.metadata_lines(ospn);
  MetaLookup out;
  out.hit = true;
  ++stats_.lookups;
  for (std::uint64_t line = span.first; line <= span.last; ++line) {
    if (Way* w = find(line)) {
      w->last_use = ++clock_;
      continue;
    }
    out.hit = false;
    out.filled.push_back(line);
    if (auto v = fill(line)) out.evicted.push_back(*v);
  }
  if (out.hit)
    ++stats_.hits;
  else
    ++stats_.misses;
  return out;
}

bool MetadataCache::probe(std::uint64_t ospn) const {
  ++stats_.probes;
  const LineSpan span = layout_.metadata_lines(ospn);
  for (std::uint64_t line = span.first; line <= span.last; ++line)
    if (!find(line)) return false;
  return true;
}

bool MetadataCache::mark_dirty(std::uint64_t ospn) {
  const LineSpan span = layout_.metadata_lines(ospn);
  for (std::uint64_t line = span.first; line <= span.last; ++line)
    if (!find(line)) return false;
  for (std::uint64_t line = span.first; line <= span.last; ++line) find(line)->dirty = true;
  return true;
}

bool MetadataCache::contains_line(std::uint64_t line) const { return find(line) != nullptr; }

std::vector<std::uint64_t> MetadataCache::flush_dirty() {
  std::vector<std::uint64_t> lines;
  for (auto& w : ways_)
    if (w.valid && w.dirty) {
      lines.push_back(w.line);
      w.dirty = false;
    }
  std::sort(lines.begin(), lines.end());
  return lines;
}

std::uint64_t MetadataCache::resident_lines() const {
  return static_cast<std::uint64_t>(std::count_if(ways_.begin(), ways_.end(), [](const Way& w) { return w.valid; }));
}

std::vector<MetadataCache::CachedLine> MetadataCache::snapshot() const {
  std::vector<CachedLine> out;
  for (const auto& w : ways_)
    if (w.valid) out.push_back({w.line, w.dirty, w.last_use});
  std::sort(out.begin(), out.end(), [](const CachedLine& a, const CachedLine& b) { return a.line < b.line; });
  return out;
}

}  // namespace ibex
