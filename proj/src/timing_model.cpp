#include "ibex/timing_model.hpp"

#include <algorithm>
#include <ostream>

namespace ibex {

ChannelModel::ChannelModel(const DramConfig& config) { reconfigure(config); }

void ChannelModel::reconfigure(const DramConfig& config) {
  if (stats_.accesses != 0) throw ContractViolation("channel model cannot be reconfigured mid-run");
  if (config.channels == 0) throw ConfigError("channels must be at least 1");
  if (config.data_rate_mts <= 0 || config.bus_bytes == 0) throw ConfigError("invalid DRAM rate");
  config_ = config;
  free_at_.assign(config.channels, 0);
  busy_.assign(config.channels, 0);
}

unsigned ChannelModel::channel_of(Mpa mpa) const {
  return static_cast<unsigned>((mpa.value / kLineSize) % config_.channels);
}

void ChannelModel::set_log(std::ostream* log) {
  log_ = log;
  if (log_) *log_ << "issue_ps,start_ps,done_ps,channel,mpa,op,category\n";
}

Tick ChannelModel::submit(const MemoryAccess& a, Tick now) {
  if (a.mpa.value % kLineSize != 0) throw ContractViolation("channel access must be 64B aligned");
  const unsigned ch = channel_of(a.mpa);
  const Tick burst = config_.burst();
  Tick start = now;
  if (!config_.unlimited) {
    start = std::max(now, free_at_[ch]);
    free_at_[ch] = start + burst;
  }
  busy_[ch] += burst;
  const Tick done = start + burst + config_.access_latency();

  if (stats_.accesses == 0) stats_.first_start = start;
  ++stats_.accesses;
  ++stats_.by_category[static_cast<std::size_t>(a.category)];
  ++(a.write ? stats_.writes : stats_.reads);
  stats_.queue_delay += start - now;
  stats_.last_finish = std::max(stats_.last_finish, start + burst);

  if (log_)
    *log_ << now << ',' << start << ',' << done << ',' << ch << ",0x" << std::hex << a.mpa.value << std::dec << ','
          << (a.write ? 'W' : 'R') << ',' << to_string(a.category) << '\n';
  return done;
}

void LinkModel::reconfigure(const LinkConfig& config) {
  if (used_) throw ContractViolation("link model cannot be reconfigured mid-run");
  if (config.round_trip_ns < 0 || config.bandwidth_gbps <= 0) throw ConfigError("invalid link parameters");
  config_ = config;
}

Tick LinkModel::send(Tick now, Tick& free_at) {
  used_ = true;
  const Tick start = std::max(now, free_at);
  free_at = start + config_.flit();
  return free_at + config_.one_way();
}

Tick LinkModel::to_device(Tick now) { return send(now, down_free_); }
Tick LinkModel::to_host(Tick now) { return send(now, up_free_); }

void EventQueue::schedule(Tick at, Priority prio, Callback fn) {
  if (at < now_) at = now_;
  heap_.push(Event{at, prio, seq_++, std::move(fn)});
}

bool EventQueue::step() {
  if (heap_.empty()) return false;
  Event ev = heap_.top();
  heap_.pop();
  now_ = ev.at;
  ev.fn();
  return true;
}

std::uint64_t EventQueue::run() {
  std::uint64_t n = 0;
  while (step()) ++n;
  return n;
}

}  // namespace ibex
