#include "ibex/block_compressor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "ibex/metadata_codec.hpp"

namespace ibex {

namespace {

constexpr std::size_t kMinMatch = 4;
constexpr unsigned kHashBits = 12;
constexpr std::size_t kMaxOffset = 0xFFFF;

std::uint32_t load32(std::span<const std::uint8_t> in, std::size_t i) {
  std::uint32_t v;
  std::memcpy(&v, in.data() + i, 4);
  return v;
}

std::uint32_t hash32(std::uint32_t v) { return (v * 2654435761u) >> (32 - kHashBits); }

void put_length(Bytes& out, std::size_t len) {
  while (len >= 255) {
    out.push_back(255);
    len -= 255;
  }
  out.push_back(static_cast<std::uint8_t>(len));
}

void emit_sequence(Bytes& out, std::span<const std::uint8_t> literals, std::size_t offset, std::size_t match_len) {
  const std::size_t lit = literals.size();
  const std::size_t m = match_len ? match_len - kMinMatch : 0;
  out.push_back(static_cast<std::uint8_t>((std::min<std::size_t>(lit, 15) << 4) | std::min<std::size_t>(m, 15)));
  if (lit >= 15) put_length(out, lit - 15);
  out.insert(out.end(), literals.begin(), literals.end());
  if (!match_len) return;
  out.push_back(static_cast<std::uint8_t>(offset & 0xFF));
  out.push_back(static_cast<std::uint8_t>(offset >> 8));
  if (m >= 15) put_length(out, m - 15);
}

class StreamCursor {
 public:
  explicit StreamCursor(std::span<const std::uint8_t> s) : s_(s) {}
  std::uint8_t byte() {
    if (pos_ >= s_.size()) throw DecodeError("lz: stream truncated");
    return s_[pos_++];
  }
  std::size_t length(std::size_t base) {
    if (base < 15) return base;
    std::size_t len = base;
    std::uint8_t b;
    do {
      b = byte();
      len += b;
    } while (b == 255);
    return len;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos_ + n > s_.size()) throw DecodeError("lz: literal run past end of stream");
    auto out = s_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  std::span<const std::uint8_t> s_;
  std::size_t pos_ = 0;
};

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint8_t kFillerMagic0 = 0xA5;
constexpr std::uint8_t kFillerMagic1 = 0x5A;
constexpr std::size_t kFillerHeader = 8;
constexpr std::size_t kZeroRecord = 1;
constexpr std::size_t kFillerRecord = 7;

}  // namespace

bool all_zero(std::span<const std::uint8_t> bytes) {
  return std::all_of(bytes.begin(), bytes.end(), [](std::uint8_t b) { return b == 0; });
}

std::string_view to_string(CompressionMode m) {
  return m == CompressionMode::Page4k ? "page4k" : "colocated1k";
}

// ---- LZ -------------------------------------------------------------------

std::optional<Bytes> LzBackend::compress(std::span<const std::uint8_t> in) const {
  const std::size_t n = in.size();
  Bytes out;
  out.reserve(n);
  std::array<std::int32_t, 1u << kHashBits> table;
  table.fill(-1);

  std::size_t anchor = 0;
  std::size_t i = 0;
  while (i + kMinMatch <= n) {
    const std::uint32_t seq = load32(in, i);
    const std::uint32_t h = hash32(seq);
    const std::int32_t cand = table[h];
    table[h] = static_cast<std::int32_t>(i);
    if (cand >= 0 && i - static_cast<std::size_t>(cand) <= kMaxOffset && load32(in, cand) == seq) {
      std::size_t len = kMinMatch;
      while (i + len < n && in[cand + len] == in[i + len]) ++len;
      emit_sequence(out, in.subspan(anchor, i - anchor), i - static_cast<std::size_t>(cand), len);
      for (std::size_t k = i + 1; k < i + len && k + kMinMatch <= n; ++k)
        table[hash32(load32(in, k))] = static_cast<std::int32_t>(k);
      i += len;
      anchor = i;
      if (out.size() >= n) return std::nullopt;
    } else {
      ++i;
    }
  }
  if (anchor < n) emit_sequence(out, in.subspan(anchor), 0, 0);
  if (out.size() >= n) return std::nullopt;
  return out;
}

Bytes LzBackend::decompress(std::span<const std::uint8_t> stream, std::size_t original_size) const {
  Bytes out;
  out.reserve(original_size);
  StreamCursor c(stream);
  while (out.size() < original_size) {
    const std::uint8_t token = c.byte();
    const std::size_t lit = c.length(token >> 4);
    if (out.size() + lit > original_size) throw DecodeError("lz: literals overrun the block");
    auto literals = c.take(lit);
    out.insert(out.end(), literals.begin(), literals.end());
    if (out.size() == original_size) break;
    const std::size_t offset = c.byte() | (std::size_t{c.byte()} << 8);
    const std::size_t len = c.length(token & 0x0F) + kMinMatch;
    if (offset == 0 || offset > out.size()) throw DecodeError("lz: match offset out of range");
    if (out.size() + len > original_size) throw DecodeError("lz: match overruns the block");
    const std::size_t from = out.size() - offset;
    for (std::size_t k = 0; k < len; ++k) out.push_back(out[from + k]);
  }
  return out;
}

void LzBackend::synthesize(std::span<std::uint8_t> out, double ratio, std::uint64_t seed) const {
  // 32B segments: fresh random bytes with probability 1/ratio, otherwise a
  // copy of an earlier segment. Copies cost a few bytes once compressed.
  constexpr std::size_t kSeg = 32;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double p_fresh = ratio <= 1.0 ? 1.0 : 1.0 / ratio;
  for (std::size_t pos = 0; pos < out.size(); pos += kSeg) {
    const std::size_t len = std::min(kSeg, out.size() - pos);
    const std::size_t block_start = pos - pos % kBlockSize;
    const bool fresh = pos == block_start || coin(rng) < p_fresh;
    if (fresh) {
      for (std::size_t k = 0; k < len; k += 8) {
        const std::uint64_t r = rng();
        std::memcpy(out.data() + pos + k, &r, std::min<std::size_t>(8, len - k));
      }
    } else {
      const std::size_t segs_before = (pos - block_start) / kSeg;
      const std::size_t src = block_start + (rng() % segs_before) * kSeg;
      std::memmove(out.data() + pos, out.data() + src, len);
    }
  }
}

// ---- size oracle ----------------------------------------------------------

void SizeOracleBackend::make_filler(std::span<std::uint8_t, kBlockSize> out, std::uint16_t target,
                                    std::uint32_t seed) {
  out[0] = kFillerMagic0;
  out[1] = kFillerMagic1;
  out[2] = static_cast<std::uint8_t>(target & 0xFF);
  out[3] = static_cast<std::uint8_t>(target >> 8);
  std::memcpy(out.data() + 4, &seed, 4);
  std::uint64_t state = seed;
  for (std::size_t k = kFillerHeader; k < kBlockSize; k += 8) {
    const std::uint64_t r = splitmix64(state);
    std::memcpy(out.data() + k, &r, std::min<std::size_t>(8, kBlockSize - k));
  }
}

std::optional<Bytes> SizeOracleBackend::compress(std::span<const std::uint8_t> block) const {
  if (block.size() % kBlockSize != 0) return std::nullopt;
  Bytes records;
  std::size_t payload = 0;
  std::array<std::uint8_t, kBlockSize> expect;
  for (std::size_t off = 0; off < block.size(); off += kBlockSize) {
    auto sub = block.subspan(off, kBlockSize);
    if (all_zero(sub)) {
      records.push_back(0);
      continue;
    }
    if (sub[0] != kFillerMagic0 || sub[1] != kFillerMagic1) return std::nullopt;
    const std::uint16_t target = static_cast<std::uint16_t>(sub[2] | (sub[3] << 8));
    std::uint32_t seed;
    std::memcpy(&seed, sub.data() + 4, 4);
    if (target == 0 || target >= kBlockSize) return std::nullopt;
    make_filler(expect, target, seed);
    if (!std::equal(expect.begin(), expect.end(), sub.begin())) return std::nullopt;
    records.insert(records.end(), {1, sub[2], sub[3], sub[4], sub[5], sub[6], sub[7]});
    payload += target;
  }
  const std::size_t total = std::max(payload, records.size());
  if (total >= block.size()) return std::nullopt;
  records.resize(total, 0);
  return records;
}

Bytes SizeOracleBackend::decompress(std::span<const std::uint8_t> stream, std::size_t original_size) const {
  if (original_size % kBlockSize != 0) throw DecodeError("oracle: size must be a multiple of 1KB");
  Bytes out(original_size, 0);
  std::size_t pos = 0;
  for (std::size_t off = 0; off < original_size; off += kBlockSize) {
    if (pos >= stream.size()) throw DecodeError("oracle: stream truncated");
    const std::uint8_t kind = stream[pos];
    if (kind == 0) {
      pos += kZeroRecord;
      continue;
    }
    if (kind != 1 || pos + kFillerRecord > stream.size()) throw DecodeError("oracle: bad record");
    const std::uint16_t target = static_cast<std::uint16_t>(stream[pos + 1] | (stream[pos + 2] << 8));
    std::uint32_t seed;
    std::memcpy(&seed, stream.data() + pos + 3, 4);
    make_filler(std::span<std::uint8_t, kBlockSize>(out.data() + off, kBlockSize), target, seed);
    pos += kFillerRecord;
  }
  return out;
}

void SizeOracleBackend::synthesize(std::span<std::uint8_t> out, double ratio, std::uint64_t seed) const {
  const double target_d = ratio <= 1.0 ? double(kBlockSize) : std::round(double(kBlockSize) / ratio);
  const auto target = static_cast<std::uint16_t>(std::clamp(target_d, 8.0, double(kBlockSize)));
  std::uint64_t state = seed;
  for (std::size_t off = 0; off + kBlockSize <= out.size(); off += kBlockSize) {
    const auto block_seed = static_cast<std::uint32_t>(splitmix64(state));
    make_filler(std::span<std::uint8_t, kBlockSize>(out.data() + off, kBlockSize), target, block_seed);
  }
}

std::unique_ptr<CompressorBackend> make_backend(std::string_view name) {
  if (name == "lz") return std::make_unique<LzBackend>();
  if (name == "oracle") return std::make_unique<SizeOracleBackend>();
  throw ConfigError("unknown compressor backend '" + std::string(name) + "' (expected lz or oracle)");
}

// ---- page layout ----------------------------------------------------------

PageType PackedPageLayout::page_type() const {
  if (mode == CompressionMode::Page4k) return blocks[0].type;
  bool any_promoted = false, all_zero_blocks = true, all_raw = true;
  for (const auto& b : blocks) {
    any_promoted |= b.type == PageType::Promoted;
    all_zero_blocks &= b.type == PageType::Zero;
    all_raw &= b.type == PageType::Incompressible;
  }
  if (any_promoted) return PageType::Promoted;
  if (all_zero_blocks) return PageType::Zero;
  if (all_raw) return PageType::Incompressible;
  return PageType::Compressed;
}

PackedPageLayout layout_from_descriptors(std::span<const PageType, 4> types, std::span<const std::uint8_t, 4> codes,
                                         bool shadow_valid) {
  PackedPageLayout l;
  l.mode = CompressionMode::Colocated1k;
  std::size_t offset = 0;
  for (unsigned i = 0; i < kBlocksPerPage; ++i) {
    BlockSlot& s = l.blocks[i];
    s.type = types[i];
    s.size_code = codes[i];
    s.stored = types[i] == PageType::Compressed || types[i] == PageType::Incompressible ||
               (types[i] == PageType::Promoted && shadow_valid);
    if (!s.stored) continue;
    s.aligned_size = static_cast<std::uint16_t>(aligned_block_size(codes[i]));
    s.raw_size = s.aligned_size;
    s.start_offset = static_cast<std::uint16_t>(offset);
    offset += s.aligned_size;
  }
  l.stream_bytes = static_cast<std::uint16_t>(offset);
  l.chunk_count = static_cast<std::uint8_t>((offset + kChunkSize - 1) / kChunkSize);
  return l;
}

CompressedPage classify_and_compress(std::span<const std::uint8_t, kPageSize> page, CompressionMode mode,
                                     const CompressorBackend& backend) {
  CompressedPage out;
  out.layout.mode = mode;

  if (mode == CompressionMode::Page4k) {
    if (all_zero(page)) return out;
    std::optional<Bytes> c;
    try {
      c = backend.compress(page);
    } catch (const Error&) {
      c.reset();
    }
    const std::size_t size = c ? c->size() : kPageSize;
    const ChunkRequirement req = required_chunks(size);
    for (auto& b : out.layout.blocks) {
      b.type = req.type;
      b.stored = true;
    }
    out.layout.chunk_count = static_cast<std::uint8_t>(req.chunk_count);
    out.layout.stream_bytes = static_cast<std::uint16_t>(req.type == PageType::Incompressible ? kPageSize : size);
    out.image.assign(req.chunk_count * kChunkSize, 0);
    if (req.type == PageType::Incompressible)
      std::copy(page.begin(), page.end(), out.image.begin());
    else
      std::copy(c->begin(), c->end(), out.image.begin());
    return out;
  }

  std::array<std::optional<Bytes>, kBlocksPerPage> payload;
  std::size_t total = 0;
  for (unsigned i = 0; i < kBlocksPerPage; ++i) {
    BlockSlot& s = out.layout.blocks[i];
    auto blk = page.subspan(i * kBlockSize, kBlockSize);
    if (all_zero(blk)) continue;  // Zero
    try {
      payload[i] = backend.compress(blk);
    } catch (const Error&) {
      payload[i].reset();
    }
    // a block that would fill the whole 1KB slot anyway is kept raw
    if (payload[i] && payload[i]->size() > kBlockSize - 128) payload[i].reset();
    s.stored = true;
    if (payload[i]) {
      s.type = PageType::Compressed;
      s.raw_size = static_cast<std::uint16_t>(payload[i]->size());
      s.size_code = encode_block_sz(payload[i]->size());
    } else {
      s.type = PageType::Incompressible;
      s.raw_size = kBlockSize;
      s.size_code = 7;
    }
    s.aligned_size = static_cast<std::uint16_t>(aligned_block_size(s.size_code));
    total += s.aligned_size;
  }
  if ((total + kChunkSize - 1) / kChunkSize == kChunksPerPage) {
    // eight chunks buy nothing over raw storage: keep the page uncompressed
    for (auto& s : out.layout.blocks) {
      s = BlockSlot{PageType::Incompressible, kBlockSize, 7, kBlockSize, 0, true};
    }
    payload = {};
  }
  std::size_t offset = 0;
  for (auto& s : out.layout.blocks) {
    if (!s.stored) continue;
    s.start_offset = static_cast<std::uint16_t>(offset);
    offset += s.aligned_size;
  }
  out.layout.stream_bytes = static_cast<std::uint16_t>(offset);
  out.layout.chunk_count = static_cast<std::uint8_t>((offset + kChunkSize - 1) / kChunkSize);
  out.image.assign(out.layout.chunk_count * kChunkSize, 0);
  for (unsigned i = 0; i < kBlocksPerPage; ++i) {
    const BlockSlot& s = out.layout.blocks[i];
    if (!s.stored) continue;
    auto dst = out.image.begin() + s.start_offset;
    if (s.type == PageType::Compressed)
      std::copy(payload[i]->begin(), payload[i]->end(), dst);
    else
      std::copy_n(page.begin() + i * kBlockSize, kBlockSize, dst);
  }
  return out;
}

std::vector<unsigned> blocks_to_fetch(const PackedPageLayout& layout, unsigned block) {
  if (block >= kBlocksPerPage) throw ContractViolation("block index out of range");
  std::vector<unsigned> out;
  const BlockSlot& s = layout.blocks[block];
  if (s.type != PageType::Compressed && s.type != PageType::Incompressible) return out;
  if (layout.mode == CompressionMode::Page4k) {
    for (unsigned c = 0; c < layout.chunk_count; ++c) out.push_back(c);
    return out;
  }
  const unsigned first = s.start_offset / kChunkSize;
  const unsigned last = (s.start_offset + s.aligned_size - 1) / kChunkSize;
  for (unsigned c = first; c <= last; ++c) out.push_back(c);
  return out;
}

Bytes extract_block(const PackedPageLayout& layout, std::span<const std::uint8_t> image, unsigned block,
                    const CompressorBackend& backend) {
  if (layout.mode == CompressionMode::Page4k) {
    const PageType t = layout.blocks[0].type;
    if (t == PageType::Zero) return Bytes(kPageSize, 0);
    if (image.size() < layout.chunk_count * kChunkSize) throw DecodeError("chunk image truncated");
    if (t == PageType::Incompressible) return Bytes(image.begin(), image.begin() + kPageSize);
    return backend.decompress(image, kPageSize);
  }
  const BlockSlot& s = layout.blocks.at(block);
  if (s.type == PageType::Zero) return Bytes(kBlockSize, 0);
  if (!s.stored) throw ContractViolation("block has no stored copy");
  if (image.size() < std::size_t{s.start_offset} + s.aligned_size) throw DecodeError("chunk image truncated");
  auto slot = image.subspan(s.start_offset, s.aligned_size);
  if (s.type == PageType::Incompressible) return Bytes(slot.begin(), slot.end());
  return backend.decompress(slot, kBlockSize);
}

}  // namespace ibex
