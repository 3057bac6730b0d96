#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ibex/compression_engine.hpp"
#include "ibex/config.hpp"
#include "ibex/telemetry.hpp"
#include "ibex/timing_model.hpp"
#include "ibex/workload.hpp"

namespace ibex {

struct AccessResult {
  Tick latency = 0;  // host issue to response arrival
  Line data{};
};

/// One simulated device driven by a host that keeps up to `host_window`
/// requests in flight. Single-threaded and deterministic.
class Simulator {
 public:
  explicit Simulator(const RunConfig& config);
  ~Simulator();

  /// Loads the trace named by the config (a path, or `synthetic`).
  void load_configured_trace();
  void set_trace(std::shared_ptr<const Trace> trace);
  void set_trace(Trace trace) { set_trace(std::make_shared<const Trace>(std::move(trace))); }
  const Trace* trace() const { return trace_.get(); }

  /// Replays the trace to completion.
  void run();
  /// Issues one request on an idle device and drains it. Pages touched for
  /// the first time start as zero pages.
  AccessResult access(Op op, Ospa ospa, const Line* payload = nullptr);

  std::string report_json() const;
  void write_outputs(const std::string& dir) const;
  /// One line per touched page: encoded metadata entry and its decoding.
  std::string dump_meta() const;

  const CompressionEngine& engine() const { return *engine_; }
  CompressionEngine& engine() { return *engine_; }
  const TrafficBreakdown& traffic() const { return traffic_; }
  const ChannelModel& channels() const { return channels_; }
  const LatencyStats& latency() const { return latency_; }
  const RatioSampler& ratios() const { return sampler_; }
  const RunConfig& config() const { return config_; }
  const CompressorBackend& backend() const { return *backend_; }
  Tick finish_time() const { return finish_; }
  std::uint64_t completed() const { return completed_; }
  /// Per-category totals equal the channel model's own counts.
  bool conserved() const;

  void set_victim_audit(std::function<void(const VictimAudit&)> hook);

 private:
  struct PlanRun;

  void preload_from(const Trace& trace);
  void issue(std::size_t index, Tick at);
  void start(std::size_t index, Tick issued);
  void complete(Tick issued);
  void execute(Plan plan, Tick t0, std::function<void(Tick)> on_respond, std::function<void(Tick)> on_done);
  void run_step(const std::shared_ptr<PlanRun>& run, int step);
  void demote_if_needed();
  void finish_run();

  RunConfig config_;
  DeviceLayout layout_;
  std::unique_ptr<CompressorBackend> backend_;
  std::unique_ptr<CompressionEngine> engine_;
  ChannelModel channels_;
  LinkModel link_;
  EventQueue queue_;
  TrafficBreakdown traffic_;
  LatencyStats latency_;
  RatioSampler sampler_;
  std::unique_ptr<std::ostream> event_log_;

  std::shared_ptr<const Trace> trace_;
  std::size_t next_ = 0;
  std::uint64_t completed_ = 0;
  std::uint64_t issued_ = 0;
  Tick finish_ = 0;
  bool ran_ = false;
};

/// Trace named by `config.trace` (a file, or `synthetic` for the synth.*
/// generator), with write instrumentation applied.
std::shared_ptr<const Trace> make_trace(const RunConfig& config);

/// Runs `base` once per value of `axis`, in parallel, on one shared trace.
/// Returns a JSON document with one report per value.
std::string run_sweep(const RunConfig& base, const std::string& axis, const std::vector<std::string>& values,
                      const std::string& out_dir = "");

/// The incremental ablation: base (page4k, naive metadata, no shadowing),
/// +S (shadowed promotion), +S+C (co-location), +S+C+M (compaction).
std::string run_ablation(const RunConfig& base, const std::string& out_dir = "");

}  // namespace ibex
