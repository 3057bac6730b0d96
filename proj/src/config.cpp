#include "ibex/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace ibex {

namespace {

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c); };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("expected an unsigned integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v) {
  const std::string l = lower(v);
  if (l == "1" || l == "true" || l == "on" || l == "yes") return true;
  if (l == "0" || l == "false" || l == "off" || l == "no") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

std::string fmt(double d) {
  std::ostringstream os;
  os << d;
  return os.str();
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

std::vector<RatioBucket> parse_buckets(const std::string& v) {
  std::vector<RatioBucket> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    RatioBucket b;
    b.ratio = parse_double(trim(item.substr(0, colon)));
    b.weight = colon == std::string::npos ? 1.0 : parse_double(trim(item.substr(colon + 1)));
    if (b.ratio < 1.0 || b.weight < 0) throw ConfigError("ratio buckets need ratio >= 1 and weight >= 0");
    out.push_back(b);
  }
  if (out.empty()) throw ConfigError("empty ratio bucket list");
  return out;
}

std::string fmt_buckets(const std::vector<RatioBucket>& b) {
  std::string out;
  for (std::size_t i = 0; i < b.size(); ++i) out += (i ? "," : "") + fmt(b[i].ratio) + ":" + fmt(b[i].weight);
  return out;
}

struct Key {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

void set_format(RunConfig& c, const std::string& v) {
  const std::string l = lower(v);
  if (l == "naive")
    c.layout.metadata_format = MetadataFormat::Naive;
  else if (l == "colocated")
    c.layout.metadata_format = MetadataFormat::Colocated;
  else if (l == "compact")
    c.layout.metadata_format = MetadataFormat::Compact;
  else
    throw ConfigError("metadata_format must be naive, colocated or compact");
}

const std::vector<std::pair<std::string, Key>>& registry() {
  static const std::vector<std::pair<std::string, Key>> keys = {
      {"mode",
       {[](RunConfig& c, const std::string& v) {
          const std::string l = lower(v);
          if (l == "page4k")
            c.engine.mode = CompressionMode::Page4k;
          else if (l == "colocated1k")
            c.engine.mode = CompressionMode::Colocated1k;
          else
            throw ConfigError("mode must be page4k or colocated1k");
        },
        [](const RunConfig& c) { return std::string(to_string(c.engine.mode)); }}},
      {"metadata_format", {set_format, [](const RunConfig& c) { return std::string(to_string(c.layout.metadata_format)); }}},
      {"colocate",
       {[](RunConfig& c, const std::string& v) {
          if (parse_bool(v)) {
            c.engine.mode = CompressionMode::Colocated1k;
            if (c.layout.metadata_format == MetadataFormat::Naive) c.layout.metadata_format = MetadataFormat::Colocated;
          } else {
            c.engine.mode = CompressionMode::Page4k;
            if (c.layout.metadata_format == MetadataFormat::Colocated) c.layout.metadata_format = MetadataFormat::Naive;
          }
        },
        [](const RunConfig& c) { return fmt_bool(c.engine.mode == CompressionMode::Colocated1k); }}},
      {"compaction",
       {[](RunConfig& c, const std::string& v) {
          if (parse_bool(v))
            c.layout.metadata_format = MetadataFormat::Compact;
          else if (c.layout.metadata_format == MetadataFormat::Compact)
            c.layout.metadata_format =
                c.engine.mode == CompressionMode::Colocated1k ? MetadataFormat::Colocated : MetadataFormat::Naive;
        },
        [](const RunConfig& c) { return fmt_bool(c.layout.metadata_format == MetadataFormat::Compact); }}},
      {"shadowed_promotion",
       {[](RunConfig& c, const std::string& v) { c.engine.shadowed_promotion = parse_bool(v); },
        [](const RunConfig& c) { return fmt_bool(c.engine.shadowed_promotion); }}},
      {"baseline",
       {[](RunConfig& c, const std::string& v) {
          const std::string l = lower(v);
          if (l != "ibex" && l != "uncompressed") throw ConfigError("baseline must be ibex or uncompressed");
          c.engine.uncompressed_baseline = l == "uncompressed";
        },
        [](const RunConfig& c) { return std::string(c.engine.uncompressed_baseline ? "uncompressed" : "ibex"); }}},
      {"backend",
       {[](RunConfig& c, const std::string& v) {
          const std::string l = lower(v);
          if (l != "lz" && l != "oracle") throw ConfigError("backend must be lz or oracle");
          c.backend = l;
        },
        [](const RunConfig& c) { return c.backend; }}},
      {"capacity_policy",
       {[](RunConfig& c, const std::string& v) {
          const std::string l = lower(v);
          if (l == "abort")
            c.engine.capacity_policy = CapacityPolicy::Abort;
          else if (l == "count")
            c.engine.capacity_policy = CapacityPolicy::Count;
          else
            throw ConfigError("capacity_policy must be abort or count");
        },
        [](const RunConfig& c) {
          return std::string(c.engine.capacity_policy == CapacityPolicy::Abort ? "abort" : "count");
        }}},
      {"seed",
       {[](RunConfig& c, const std::string& v) { c.engine.seed = parse_u64(v); },
        [](const RunConfig& c) { return std::to_string(c.engine.seed); }}},
      {"demotion_threshold",
       {[](RunConfig& c, const std::string& v) { c.engine.demotion_threshold = parse_u64(v); },
        [](const RunConfig& c) { return std::to_string(c.engine.demotion_threshold); }}},
      {"host_window",
       {[](RunConfig& c, const std::string& v) { c.host_window = static_cast<unsigned>(parse_u64(v)); },
        [](const RunConfig& c) { return std::to_string(c.host_window); }}},
      {"compressed_size",
       {[](RunConfig& c, const std::string& v) { c.layout.compressed_size = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.layout.compressed_size); }}},
      {"sub_region_size",
       {[](RunConfig& c, const std::string& v) { c.layout.sub_region_size = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.layout.sub_region_size); }}},
      {"promoted_size",
       {[](RunConfig& c, const std::string& v) { c.layout.promoted_size = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.layout.promoted_size); }}},
      {"advertised_capacity",
       {[](RunConfig& c, const std::string& v) { c.layout.advertised_ospa_capacity = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.layout.advertised_ospa_capacity); }}},
      {"metadata_cache_size",
       {[](RunConfig& c, const std::string& v) { c.engine.meta_cache.capacity_bytes = parse_size(v); },
        [](const RunConfig& c) { return std::to_string(c.engine.meta_cache.capacity_bytes); }}},
      {"metadata_cache_ways",
       {[](RunConfig& c, const std::string& v) { c.engine.meta_cache.ways = static_cast<unsigned>(parse_u64(v)); },
        [](const RunConfig& c) { return std::to_string(c.engine.meta_cache.ways); }}},
      {"metadata_cache_hit_cycles",
       {[](RunConfig& c, const std::string& v) {
          c.engine.meta_cache.hit_latency_cycles = static_cast<unsigned>(parse_u64(v));
        },
        [](const RunConfig& c) { return std::to_string(c.engine.meta_cache.hit_latency_cycles); }}},
      {"compress_cycles",
       {[](RunConfig& c, const std::string& v) { c.engine.latency.compress_cycles_per_kb = parse_u64(v); },
        [](const RunConfig& c) { return std::to_string(c.engine.latency.compress_cycles_per_kb); }}},
      {"decompress_cycles",
       {[](RunConfig& c, const std::string& v) { c.engine.latency.decompress_cycles_per_kb = parse_u64(v); },
        [](const RunConfig& c) { return std::to_string(c.engine.latency.decompress_cycles_per_kb); }}},
      {"device_clock_ghz",
       {[](RunConfig& c, const std::string& v) { c.clock.device_clock_hz = parse_double(v) * 1e9; },
        [](const RunConfig& c) { return fmt(c.clock.device_clock_hz / 1e9); }}},
      {"channels",
       {[](RunConfig& c, const std::string& v) {
          if (lower(v) == "unlimited") {
            c.dram.unlimited = true;
          } else {
            c.dram.unlimited = false;
            c.dram.channels = static_cast<unsigned>(parse_u64(v));
          }
        },
        [](const RunConfig& c) { return c.dram.unlimited ? std::string("unlimited") : std::to_string(c.dram.channels); }}},
      {"dram_rate_mts",
       {[](RunConfig& c, const std::string& v) { c.dram.data_rate_mts = parse_double(v); },
        [](const RunConfig& c) { return fmt(c.dram.data_rate_mts); }}},
      {"tCL",
       {[](RunConfig& c, const std::string& v) { c.dram.tCL = static_cast<unsigned>(parse_u64(v)); },
        [](const RunConfig& c) { return std::to_string(c.dram.tCL); }}},
      {"tRCD",
       {[](RunConfig& c, const std::string& v) { c.dram.tRCD = static_cast<unsigned>(parse_u64(v)); },
        [](const RunConfig& c) { return std::to_string(c.dram.tRCD); }}},
      {"tRP",
       {[](RunConfig& c, const std::string& v) { c.dram.tRP = static_cast<unsigned>(parse_u64(v)); },
        [](const RunConfig& c) { return std::to_string(c.dram.tRP); }}},
      {"link_latency_ns",
       {[](RunConfig& c, const std::string& v) { c.link.round_trip_ns = parse_double(v); },
        [](const RunConfig& c) { return fmt(c.link.round_trip_ns); }}},
      {"link_bandwidth_gbps",
       {[](RunConfig& c, const std::string& v) { c.link.bandwidth_gbps = parse_double(v); },
        [](const RunConfig& c) { return fmt(c.link.bandwidth_gbps); }}},
      {"trace", {[](RunConfig& c, const std::string& v) { c.trace = v; }, [](const RunConfig& c) { return c.trace; }}},
      {"trace_blob",
       {[](RunConfig& c, const std::string& v) { c.trace_blob = v; }, [](const RunConfig& c) { return c.trace_blob; }}},
      {"write_prob",
       {[](RunConfig& c, const std::string& v) { c.write_prob = parse_double(v); },
        [](const RunConfig& c) { return fmt(c.write_prob); }}},
      {"sample_interval",
       {[](RunConfig& c, const std::string& v) { c.sample_interval = parse_u64(v); },
        [](const RunConfig& c) { return std::to_string(c.sample_interval); }}},
      {"audit_interval",
       {[](RunConfig& c, const std::string& v) { c.audit_interval = parse_u64(v); },
        [](const RunConfig& c) { return std::to_string(c.audit_interval); }}},
      {"event_log",
       {[](RunConfig& c, const std::string& v) { c.event_log = v; }, [](const RunConfig& c) { return c.event_log; }}},
      {"synth.footprint_pages",
       {[](RunConfig& c, const std::string& v) { c.synth.footprint_pages = parse_u64(v); },
        [](const RunConfig& c) { return std::to_string(c.synth.footprint_pages); }}},
      {"synth.requests",
       {[](RunConfig& c, const std::string& v) { c.synth.requests = parse_u64(v); },
        [](const RunConfig& c) { return std::to_string(c.synth.requests); }}},
      {"synth.read_ratio",
       {[](RunConfig& c, const std::string& v) { c.synth.read_ratio = parse_double(v); },
        [](const RunConfig& c) { return fmt(c.synth.read_ratio); }}},
      {"synth.hot_fraction",
       {[](RunConfig& c, const std::string& v) { c.synth.hot_fraction = parse_double(v); },
        [](const RunConfig& c) { return fmt(c.synth.hot_fraction); }}},
      {"synth.hot_probability",
       {[](RunConfig& c, const std::string& v) { c.synth.hot_probability = parse_double(v); },
        [](const RunConfig& c) { return fmt(c.synth.hot_probability); }}},
      {"synth.zipf",
       {[](RunConfig& c, const std::string& v) { c.synth.zipf = parse_double(v); },
        [](const RunConfig& c) { return fmt(c.synth.zipf); }}},
      {"synth.zero_fraction",
       {[](RunConfig& c, const std::string& v) { c.synth.zero_fraction = parse_double(v); },
        [](const RunConfig& c) { return fmt(c.synth.zero_fraction); }}},
      {"synth.ratios",
       {[](RunConfig& c, const std::string& v) { c.synth.ratios = parse_buckets(v); },
        [](const RunConfig& c) { return fmt_buckets(c.synth.ratios); }}},
      {"synth.payloads",
       {[](RunConfig& c, const std::string& v) { c.synth.payloads = parse_bool(v); },
        [](const RunConfig& c) { return fmt_bool(c.synth.payloads); }}},
      {"synth.address_pages",
       {[](RunConfig& c, const std::string& v) { c.synth.address_pages = parse_u64(v); },
        [](const RunConfig& c) { return std::to_string(c.synth.address_pages); }}},
      {"synth.seed",
       {[](RunConfig& c, const std::string& v) { c.synth.seed = parse_u64(v); },
        [](const RunConfig& c) { return std::to_string(c.synth.seed); }}},
  };
  return keys;
}

const Key& find_key(const std::string& key) {
  const std::string& canonical = key == "link_latency" ? std::string("link_latency_ns") : key;
  for (const auto& [name, k] : registry())
    if (name == canonical) return k;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

std::uint64_t parse_size(const std::string& text) {
  const std::string t = trim(text);
  std::size_t i = 0;
  while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
  if (i == 0) throw ConfigError("bad size '" + text + "'");
  const std::uint64_t n = parse_u64(t.substr(0, i));
  std::string unit = lower(trim(t.substr(i)));
  static const std::map<std::string, std::uint64_t> units = {
      {"", 1},       {"b", 1},       {"k", KiB},     {"kb", KiB}, {"kib", KiB}, {"m", MiB}, {"mb", MiB},
      {"mib", MiB},  {"g", GiB},     {"gb", GiB},    {"gib", GiB}, {"t", TiB},  {"tb", TiB}, {"tib", TiB}};
  auto it = units.find(unit);
  if (it == units.end()) throw ConfigError("bad size unit in '" + text + "'");
  return n * it->second;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const Key& k = find_key(trim(key));
  try {
    k.set(*this, trim(value));
  } catch (const ConfigError& e) {
    throw ConfigError(trim(key) + ": " + e.what());
  }
}

void RunConfig::apply_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value");
    try {
      set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void RunConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  apply_text(ss.str(), path);
}

void RunConfig::validate() const {
  const bool page4k = engine.mode == CompressionMode::Page4k;
  if (page4k && layout.metadata_format != MetadataFormat::Naive)
    throw ConfigError("mode=page4k stores one type per page and needs metadata_format=naive "
                      "(metadata compaction requires co-location)");
  if (!page4k && layout.metadata_format == MetadataFormat::Naive)
    throw ConfigError("mode=colocated1k needs per-block descriptors: use metadata_format=colocated or compact");
  if (!page4k && !engine.shadowed_promotion)
    throw ConfigError("co-location promotes single blocks and requires shadowed_promotion=true");
  if (host_window == 0) throw ConfigError("host_window must be at least 1");
  if (engine.latency.compress_cycles_per_kb == 0 || engine.latency.decompress_cycles_per_kb == 0)
    throw ConfigError("compression latencies must be positive");
  if (clock.device_clock_hz <= 0) throw ConfigError("device_clock_ghz must be positive");
  if (dram.channels == 0 && !dram.unlimited) throw ConfigError("channels must be at least 1");
  if (write_prob < 0 || write_prob > 1) throw ConfigError("write_prob must lie in [0, 1]");
  if (engine.meta_cache.ways == 0 || engine.meta_cache.sets() == 0 ||
      engine.meta_cache.capacity_bytes % (kLineSize * engine.meta_cache.ways) != 0)
    throw ConfigError("metadata cache size must be a multiple of 64B x ways");
  (void)DeviceLayout::make(layout);  // region checks
}

std::vector<std::pair<std::string, std::string>> RunConfig::to_pairs() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, k] : registry()) out.emplace_back(name, k.get(*this));
  return out;
}

std::string RunConfig::get(const std::string& key) const { return find_key(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [name, _] : registry()) v.push_back(name);
    return v;
  }();
  return names;
}

}  // namespace ibex
