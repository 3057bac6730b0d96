#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ibex/block_compressor.hpp"
#include "ibex/types.hpp"

namespace ibex {

enum class Op : std::uint8_t { Read = 0, Write = 1 };

/// Optional per-record content hint.
enum class Annotation : std::uint8_t { None = 0, Zero = 1, Ratio = 2, Payload = 3 };

struct TraceRecord {
  Op op = Op::Read;
  Ospa ospa;
  Annotation kind = Annotation::None;
  float ratio = 0.0f;               // Ratio: page compression ratio
  std::uint64_t payload_offset = 0;  // Payload: byte offset of 64B in the blob
  std::uint16_t pid = 0;
};

/// Process ids fold into the OSPA as pid << kPidShift.
inline constexpr unsigned kPidShift = 34;

struct Trace {
  std::vector<TraceRecord> records;
  Bytes blob;  // payload sidecar

  /// 64B payload of a Payload record.
  Line payload(const TraceRecord& r) const;
  /// Appends `line` to the blob and returns its offset.
  std::uint64_t add_payload(const Line& line);
};

/// `R|W <hex> [Z|ratio=<f>|payload=<off>] [pid=<n>]`, '#' comments. The blob
/// defaults to `<path>.blob` when payload records are present.
Trace load_text_trace(const std::string& path, const std::string& blob_path = "");
Trace parse_text_trace(const std::string& text, Bytes blob = {});
void save_text_trace(const Trace& t, const std::string& path);

inline constexpr char kBinaryMagic[8] = {'I', 'B', 'X', 'T', 'R', 'C', '0', '1'};
inline constexpr std::uint32_t kBinaryVersion = 1;
inline constexpr std::uint32_t kBinaryRecordSize = 24;

Trace load_binary_trace(const std::string& path, const std::string& blob_path = "");
void save_binary_trace(const Trace& t, const std::string& path);

/// Picks the binary loader when the file starts with the binary magic.
Trace load_trace(const std::string& path, const std::string& blob_path = "");

struct RatioBucket {
  double ratio = 2.0;
  double weight = 1.0;
};

struct SyntheticSpec {
  std::uint64_t footprint_pages = 4096;
  std::uint64_t requests = 100000;
  double read_ratio = 0.8;      // fraction of reads
  double hot_fraction = 0.1;    // share of pages in the hot set
  double hot_probability = 0.9;  // share of requests hitting the hot set
  double zipf = 0.0;            // > 0 replaces the two-level model
  double zero_fraction = 0.2;
  std::vector<RatioBucket> ratios{{1.0, 0.1}, {2.0, 0.5}, {3.0, 0.3}, {4.0, 0.1}};
  bool payloads = false;  // writes carry generated 64B payloads
  std::uint64_t address_pages = 0;  // OSPN space to scatter pages over; 0: 4x footprint
  std::uint64_t seed = 1;
};

/// Deterministic in `spec`. Pages are scattered over a random page map; every
/// record of a page carries that page's content annotation. `backend` makes
/// payload content when spec.payloads is set.
Trace generate(const SyntheticSpec& spec, const CompressorBackend* backend = nullptr);

/// Flips each read to a write with probability `write_prob`.
void instrument_writes(Trace& trace, double write_prob, std::uint64_t seed);

/// Seed used to synthesize the initial content of `ospn`.
std::uint64_t page_content_seed(std::uint64_t ospn, std::uint64_t seed);

}  // namespace ibex
