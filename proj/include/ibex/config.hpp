#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ibex/addr_space.hpp"
#include "ibex/compression_engine.hpp"
#include "ibex/timing_model.hpp"
#include "ibex/workload.hpp"

namespace ibex {

/// Every tunable of a simulation run. Defaults follow the reference device:
/// 96KB 16-way metadata cache, 256/64-cycle compression per KB, two
/// DDR5-5600 channels, 70ns CXL round trip, 512MB promoted region.
struct RunConfig {
  LayoutParams layout;
  EngineConfig engine;
  ClockConfig clock;
  DramConfig dram;
  LinkConfig link;
  unsigned host_window = 16;
  std::string backend = "lz";
  std::string trace = "synthetic";
  std::string trace_blob;
  SyntheticSpec synth;
  double write_prob = 0.0;
  std::uint64_t sample_interval = 100000;
  std::uint64_t audit_interval = 0;  // 0: no periodic audit
  std::string event_log;

  /// Applies one `key=value` setting. Throws ConfigError naming the key.
  void set(const std::string& key, const std::string& value);
  /// Applies `key=value` text (file contents): one setting per line, '#'
  /// comments, blank lines ignored.
  void apply_text(const std::string& text, const std::string& origin = "config");
  void apply_file(const std::string& path);
  /// Throws ConfigError on inconsistent combinations.
  void validate() const;

  /// Effective settings, in a fixed key order.
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();
};

/// Parses sizes such as 4096, 64K, 512MB, 128GiB.
std::uint64_t parse_size(const std::string& text);

}  // namespace ibex
