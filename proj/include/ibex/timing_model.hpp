#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <queue>
#include <vector>

#include "ibex/types.hpp"

namespace ibex {

struct ClockConfig {
  double device_clock_hz = 2.0e9;

  Tick cycles(std::uint64_t n) const {
    return static_cast<Tick>(static_cast<double>(n) * 1.0e12 / device_clock_hz + 0.5);
  }
};

/// DDR5 channel service model. Each 64B access occupies its channel for one
/// burst; its data returns tRCD + tCL after service starts.
struct DramConfig {
  unsigned channels = 2;
  bool unlimited = false;  // latency only, no queueing
  double data_rate_mts = 5600.0;
  unsigned bus_bytes = 8;
  unsigned tCL = 40;
  unsigned tRCD = 40;
  unsigned tRP = 40;  // accepted, unused by the closed-form model

  Tick tck() const { return static_cast<Tick>(2.0e6 / data_rate_mts + 0.5); }
  Tick burst() const {
    return static_cast<Tick>(double(kLineSize) / bus_bytes * 1.0e6 / data_rate_mts + 0.5);
  }
  Tick access_latency() const {
    return static_cast<Tick>((tRCD + tCL) * 2.0e6 / data_rate_mts + 0.5);
  }
  /// Peak bytes per picosecond across all channels.
  double peak_bytes_per_ps() const { return channels * bus_bytes * data_rate_mts / 1.0e6; }
};

struct ChannelStats {
  std::array<std::uint64_t, kCategoryCount> by_category{};
  std::uint64_t accesses = 0;
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  Tick queue_delay = 0;
  Tick first_start = 0;
  Tick last_finish = 0;
};

class ChannelModel {
 public:
  explicit ChannelModel(const DramConfig& config = {});

  /// Reconfiguration is only allowed before the first access.
  void reconfigure(const DramConfig& config);

  /// Services one access issued at `now`; returns when its data is
  /// available (reads) or committed (writes).
  Tick submit(const MemoryAccess& access, Tick now);

  unsigned channel_of(Mpa mpa) const;
  const DramConfig& config() const { return config_; }
  const ChannelStats& stats() const { return stats_; }
  /// Time the busiest channel spent transferring data.
  Tick busy_time(unsigned channel) const { return busy_.at(channel); }

  /// Optional per-access CSV log.
  void set_log(std::ostream* log);

 private:
  DramConfig config_;
  std::vector<Tick> free_at_;
  std::vector<Tick> busy_;
  ChannelStats stats_;
  std::ostream* log_ = nullptr;
};

/// CXL link: fixed round trip split evenly across directions plus one 64B
/// flit of serialization per transfer in each direction.
struct LinkConfig {
  double round_trip_ns = 70.0;
  double bandwidth_gbps = 32.0;  // GB/s per direction

  Tick one_way() const { return static_cast<Tick>(round_trip_ns * 1000.0 / 2 + 0.5); }
  Tick flit() const { return static_cast<Tick>(double(kLineSize) / bandwidth_gbps * 1000.0 + 0.5); }
};

class LinkModel {
 public:
  explicit LinkModel(const LinkConfig& config = {}) : config_(config) {}

  void reconfigure(const LinkConfig& config);
  /// Host sends at `now`; returns arrival at the device.
  Tick to_device(Tick now);
  /// Device responds at `now`; returns arrival at the host.
  Tick to_host(Tick now);
  const LinkConfig& config() const { return config_; }

 private:
  Tick send(Tick now, Tick& free_at);

  LinkConfig config_;
  Tick down_free_ = 0;
  Tick up_free_ = 0;
  bool used_ = false;
};

enum class Priority : std::uint8_t { Foreground = 0, Background = 1 };

/// Global ordered event queue: time, then foreground before background, then
/// insertion order.
class EventQueue {
 public:
  using Callback = std::function<void()>;

  void schedule(Tick at, Priority prio, Callback fn);
  /// Runs events until the queue drains. Returns the number processed.
  std::uint64_t run();
  /// Runs a single event; false if the queue is empty.
  bool step();

  Tick now() const { return now_; }
  bool empty() const { return heap_.empty(); }
  std::size_t pending() const { return heap_.size(); }

 private:
  struct Event {
    Tick at;
    Priority prio;
    std::uint64_t seq;
    Callback fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.at != b.at) return a.at > b.at;
      if (a.prio != b.prio) return a.prio > b.prio;
      return a.seq > b.seq;
    }
  };

  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  Tick now_ = 0;
  std::uint64_t seq_ = 0;
};

}  // namespace ibex
