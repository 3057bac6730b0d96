#include "ibex/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

namespace ibex {

namespace {

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

bool file_exists(const std::string& path) { return std::ifstream(path).good(); }

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw TraceError("trace line " + std::to_string(line) + ": " + what);
}

template <class T>
bool parse_number(std::string_view s, T& out, int base = 10) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out, base);
  return ec == std::errc() && p == s.data() + s.size();
}

void check_payloads(const Trace& t) {
  for (const auto& r : t.records)
    if (r.kind == Annotation::Payload && r.payload_offset + kLineSize > t.blob.size())
      throw TraceError("payload offset " + std::to_string(r.payload_offset) + " lies outside the payload blob");
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

}  // namespace

Line Trace::payload(const TraceRecord& r) const {
  if (r.kind != Annotation::Payload || r.payload_offset + kLineSize > blob.size())
    throw TraceError("record has no payload in the blob");
  Line l;
  std::copy_n(blob.begin() + r.payload_offset, kLineSize, l.begin());
  return l;
}

std::uint64_t Trace::add_payload(const Line& line) {
  const std::uint64_t off = blob.size();
  blob.insert(blob.end(), line.begin(), line.end());
  return off;
}

// ---- text -------------------------------------------------------------------

Trace parse_text_trace(const std::string& text, Bytes blob) {
  Trace t;
  t.blob = std::move(blob);
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream fields(raw);
    std::string op, addr, tok;
    if (!(fields >> op)) continue;
    if (!(fields >> addr)) fail(lineno, "missing address");

    TraceRecord r;
    if (op == "R" || op == "r")
      r.op = Op::Read;
    else if (op == "W" || op == "w")
      r.op = Op::Write;
    else
      fail(lineno, "operation must be R or W, got '" + op + "'");

    std::string_view hex = addr;
    if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
    if (hex.empty() || !parse_number(hex, r.ospa.value, 16)) fail(lineno, "bad hex address '" + addr + "'");

    while (fields >> tok) {
      std::string_view v = tok;
      if (tok == "Z" || tok == "z") {
        r.kind = Annotation::Zero;
      } else if (v.starts_with("ratio=")) {
        v.remove_prefix(6);
        double ratio = 0;
        try {
          std::size_t used = 0;
          ratio = std::stod(std::string(v), &used);
          if (used != v.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          fail(lineno, "bad ratio '" + tok + "'");
        }
        if (!(ratio >= 1.0) || !std::isfinite(ratio)) fail(lineno, "ratio must be a finite value >= 1");
        r.kind = Annotation::Ratio;
        r.ratio = static_cast<float>(ratio);
      } else if (v.starts_with("payload=")) {
        v.remove_prefix(8);
        if (!parse_number(v, r.payload_offset)) fail(lineno, "bad payload offset '" + tok + "'");
        if (r.op != Op::Write) fail(lineno, "payload on a read");
        r.kind = Annotation::Payload;
      } else if (v.starts_with("pid=")) {
        v.remove_prefix(4);
        if (!parse_number(v, r.pid)) fail(lineno, "bad pid '" + tok + "'");
      } else {
        fail(lineno, "unknown field '" + tok + "'");
      }
    }
    r.ospa.value += std::uint64_t{r.pid} << kPidShift;
    t.records.push_back(r);
  }
  check_payloads(t);
  return t;
}

Trace load_text_trace(const std::string& path, const std::string& blob_path) {
  const Bytes text = read_file(path);
  Bytes blob;
  const std::string bp = blob_path.empty() ? path + ".blob" : blob_path;
  if (!blob_path.empty() || file_exists(bp)) blob = read_file(bp);
  return parse_text_trace(std::string(text.begin(), text.end()), std::move(blob));
}

void save_text_trace(const Trace& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw TraceError("cannot write " + path);
  char buf[32];
  for (const auto& r : t.records) {
    const std::uint64_t addr = r.ospa.value - (std::uint64_t{r.pid} << kPidShift);
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, addr, 16);
    out << (r.op == Op::Read ? 'R' : 'W') << " 0x" << std::string_view(buf, end - buf);
    switch (r.kind) {
      case Annotation::None: break;
      case Annotation::Zero: out << " Z"; break;
      case Annotation::Ratio: {
        auto [e2, ec2] = std::to_chars(buf, buf + sizeof buf, r.ratio);
        out << " ratio=" << std::string_view(buf, e2 - buf);
        break;
      }
      case Annotation::Payload: out << " payload=" << r.payload_offset; break;
    }
    if (r.pid) out << " pid=" << r.pid;
    out << '\n';
  }
  if (!t.blob.empty()) {
    std::ofstream blob(path + ".blob", std::ios::binary);
    blob.write(reinterpret_cast<const char*>(t.blob.data()), static_cast<std::streamsize>(t.blob.size()));
  }
}

// ---- binary -----------------------------------------------------------------

void save_binary_trace(const Trace& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceError("cannot write " + path);
  out.write(kBinaryMagic, 8);
  put(out, kBinaryVersion);
  put(out, kBinaryRecordSize);
  for (const auto& r : t.records) {
    put(out, r.ospa.value - (std::uint64_t{r.pid} << kPidShift));
    put(out, static_cast<std::uint8_t>(r.op));
    put(out, static_cast<std::uint8_t>(r.kind));
    put(out, r.pid);
    put(out, r.ratio);
    put(out, r.payload_offset);
  }
  if (!t.blob.empty()) {
    std::ofstream blob(path + ".blob", std::ios::binary);
    blob.write(reinterpret_cast<const char*>(t.blob.data()), static_cast<std::streamsize>(t.blob.size()));
  }
}

Trace load_binary_trace(const std::string& path, const std::string& blob_path) {
  const Bytes raw = read_file(path);
  if (raw.size() < 16 || std::memcmp(raw.data(), kBinaryMagic, 8) != 0) throw TraceError(path + ": not a binary trace");
  if (get<std::uint32_t>(raw.data() + 8) != kBinaryVersion) throw TraceError(path + ": unsupported version");
  if (get<std::uint32_t>(raw.data() + 12) != kBinaryRecordSize) throw TraceError(path + ": unexpected record size");
  if ((raw.size() - 16) % kBinaryRecordSize != 0) throw TraceError(path + ": truncated record");

  Trace t;
  const std::string bp = blob_path.empty() ? path + ".blob" : blob_path;
  if (!blob_path.empty() || file_exists(bp)) t.blob = read_file(bp);
  const std::size_t n = (raw.size() - 16) / kBinaryRecordSize;
  t.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = raw.data() + 16 + i * kBinaryRecordSize;
    TraceRecord r;
    const std::uint8_t op = p[8], kind = p[9];
    if (op > 1) throw TraceError("record " + std::to_string(i) + ": bad op " + std::to_string(op));
    if (kind > 3) throw TraceError("record " + std::to_string(i) + ": bad annotation " + std::to_string(kind));
    r.op = static_cast<Op>(op);
    r.kind = static_cast<Annotation>(kind);
    r.pid = get<std::uint16_t>(p + 10);
    r.ratio = get<float>(p + 12);
    r.payload_offset = get<std::uint64_t>(p + 16);
    r.ospa.value = get<std::uint64_t>(p) + (std::uint64_t{r.pid} << kPidShift);
    if (r.kind == Annotation::Ratio && !(r.ratio >= 1.0f))
      throw TraceError("record " + std::to_string(i) + ": ratio must be >= 1");
    t.records.push_back(r);
  }
  check_payloads(t);
  return t;
}

Trace load_trace(const std::string& path, const std::string& blob_path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot open " + path);
  char head[8] = {};
  in.read(head, 8);
  if (in.gcount() == 8 && std::memcmp(head, kBinaryMagic, 8) == 0) return load_binary_trace(path, blob_path);
  return load_text_trace(path, blob_path);
}

// ---- synthetic --------------------------------------------------------------

std::uint64_t page_content_seed(std::uint64_t ospn, std::uint64_t seed) { return mix(ospn ^ mix(seed)); }

Trace generate(const SyntheticSpec& spec, const CompressorBackend* backend) {
  if (spec.footprint_pages == 0) throw ConfigError("synthetic footprint must be at least one page");
  if (spec.read_ratio < 0 || spec.read_ratio > 1) throw ConfigError("read_ratio must lie in [0, 1]");
  if (spec.hot_fraction <= 0 || spec.hot_fraction > 1) throw ConfigError("hot_fraction must lie in (0, 1]");
  if (spec.hot_probability < 0 || spec.hot_probability > 1) throw ConfigError("hot_probability must lie in [0, 1]");
  if (spec.zero_fraction < 0 || spec.zero_fraction > 1) throw ConfigError("zero_fraction must lie in [0, 1]");
  if (spec.ratios.empty()) throw ConfigError("at least one ratio bucket is required");
  if (spec.payloads && !backend) throw ConfigError("payload generation needs a compressor backend");
  const std::uint64_t space = spec.address_pages ? spec.address_pages : 4 * spec.footprint_pages;
  if (space < spec.footprint_pages) throw ConfigError("address space smaller than the footprint");

  std::mt19937_64 rng(spec.seed);
  // random page map: distinct OSPNs in random order
  std::vector<std::uint64_t> pages;
  pages.reserve(spec.footprint_pages);
  if (space <= 2 * spec.footprint_pages) {
    std::vector<std::uint64_t> all(space);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    pages.assign(all.begin(), all.begin() + spec.footprint_pages);
  } else {
    std::unordered_set<std::uint64_t> seen;
    std::uniform_int_distribution<std::uint64_t> pick(0, space - 1);
    while (pages.size() < spec.footprint_pages) {
      const std::uint64_t p = pick(rng);
      if (seen.insert(p).second) pages.push_back(p);
    }
  }

  // per-page content class
  std::vector<double> weights;
  for (const auto& b : spec.ratios) weights.push_back(b.weight);
  std::discrete_distribution<std::size_t> bucket(weights.begin(), weights.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<float> page_ratio(spec.footprint_pages);  // 0 marks a zero page
  for (auto& r : page_ratio) r = unit(rng) < spec.zero_fraction ? 0.0f : static_cast<float>(spec.ratios[bucket(rng)].ratio);

  const std::uint64_t hot = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(spec.hot_fraction * spec.footprint_pages));
  std::vector<double> zipf_cdf;
  if (spec.zipf > 0) {
    zipf_cdf.resize(spec.footprint_pages);
    double acc = 0;
    for (std::uint64_t i = 0; i < spec.footprint_pages; ++i) zipf_cdf[i] = acc += 1.0 / std::pow(double(i + 1), spec.zipf);
    for (auto& c : zipf_cdf) c /= acc;
  }
  std::uniform_int_distribution<std::uint64_t> line(0, kLinesPerPage - 1);

  Trace t;
  t.records.reserve(spec.requests);
  std::vector<std::uint8_t> scratch(kPageSize);
  for (std::uint64_t i = 0; i < spec.requests; ++i) {
    std::uint64_t idx;
    if (spec.zipf > 0) {
      idx = static_cast<std::uint64_t>(std::lower_bound(zipf_cdf.begin(), zipf_cdf.end(), unit(rng)) - zipf_cdf.begin());
      idx = std::min(idx, spec.footprint_pages - 1);
    } else if (hot == spec.footprint_pages || unit(rng) < spec.hot_probability) {
      idx = std::uniform_int_distribution<std::uint64_t>(0, hot - 1)(rng);
    } else {
      idx = std::uniform_int_distribution<std::uint64_t>(hot, spec.footprint_pages - 1)(rng);
    }
    TraceRecord r;
    r.op = unit(rng) < spec.read_ratio ? Op::Read : Op::Write;
    r.ospa.value = pages[idx] * kPageSize + line(rng) * kLineSize;
    if (page_ratio[idx] == 0.0f) {
      r.kind = Annotation::Zero;
    } else {
      r.kind = Annotation::Ratio;
      r.ratio = page_ratio[idx];
    }
    if (r.op == Op::Write && spec.payloads) {
      // fresh content of the same compressibility class as the page
      const double ratio = page_ratio[idx] == 0.0f ? spec.ratios[bucket(rng)].ratio : page_ratio[idx];
      backend->synthesize(std::span(scratch).first(kBlockSize), ratio, rng());
      Line l;
      const std::size_t at = (r.ospa.value % kBlockSize) / kLineSize * kLineSize;
      std::copy_n(scratch.begin() + at, kLineSize, l.begin());
      t.records.push_back(r);
      TraceRecord& back = t.records.back();
      back.payload_offset = t.add_payload(l);
      // the page annotation rides on the preceding records; payload wins here
      back.kind = Annotation::Payload;
      back.ratio = 0.0f;
      continue;
    }
    t.records.push_back(r);
  }
  return t;
}

void instrument_writes(Trace& trace, double write_prob, std::uint64_t seed) {
  if (write_prob < 0 || write_prob > 1) throw ConfigError("write probability must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution flip(write_prob);
  for (auto& r : trace.records)
    if (r.op == Op::Read && flip(rng)) r.op = Op::Write;
}

}  // namespace ibex
