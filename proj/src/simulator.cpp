#include "ibex/simulator.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace ibex {

using json = nlohmann::ordered_json;

namespace {

double ns(Tick t) { return double(t) / 1000.0; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

bool trace_axis(const std::string& key) {
  return key.starts_with("synth.") || key == "trace" || key == "trace_blob" || key == "write_prob";
}

}  // namespace

struct Simulator::PlanRun {
  Plan plan;
  Tick t0 = 0;
  std::vector<std::vector<int>> children;
  std::size_t remaining = 0;
  Tick last = 0;
  bool responded = false;
  std::function<void(Tick)> on_respond;
  std::function<void(Tick)> on_done;
};

std::shared_ptr<const Trace> make_trace(const RunConfig& config) {
  Trace t;
  if (config.trace == "synthetic") {
    std::unique_ptr<CompressorBackend> backend = make_backend(config.backend);
    t = generate(config.synth, backend.get());
  } else {
    t = load_trace(config.trace, config.trace_blob);
  }
  if (config.write_prob > 0) instrument_writes(t, config.write_prob, config.synth.seed ^ 0x5752495445ull);
  return std::make_shared<const Trace>(std::move(t));
}

Simulator::Simulator(const RunConfig& config)
    : config_(config), sampler_(config.sample_interval) {
  config_.validate();
  layout_ = DeviceLayout::make(config_.layout);
  backend_ = make_backend(config_.backend);
  engine_ = std::make_unique<CompressionEngine>(config_.engine, layout_, *backend_);
  channels_.reconfigure(config_.dram);
  link_.reconfigure(config_.link);
  if (!config_.event_log.empty()) {
    auto f = std::make_unique<std::ofstream>(config_.event_log);
    if (!*f) throw ConfigError("cannot open event log " + config_.event_log);
    event_log_ = std::move(f);
    channels_.set_log(event_log_.get());
  }
}

Simulator::~Simulator() = default;

void Simulator::load_configured_trace() { set_trace(make_trace(config_)); }

void Simulator::set_trace(std::shared_ptr<const Trace> trace) {
  if (ran_) throw ContractViolation("trace replaced after the run");
  for (const auto& r : trace->records)
    if (r.ospa.ospn() >= layout_.page_count())
      throw TraceError("address 0x" + [&] {
        std::ostringstream os;
        os << std::hex << r.ospa.value;
        return os.str();
      }() + " beyond the advertised capacity");
  trace_ = std::move(trace);
}

void Simulator::set_victim_audit(std::function<void(const VictimAudit&)> hook) {
  engine_->tracker().set_audit(std::move(hook));
}

void Simulator::preload_from(const Trace& trace) {
  std::unordered_set<std::uint64_t> seen;
  std::vector<std::uint8_t> page(kPageSize);
  for (const auto& r : trace.records) {
    if (r.kind != Annotation::Zero && r.kind != Annotation::Ratio) continue;
    const std::uint64_t ospn = r.ospa.ospn();
    if (!seen.insert(ospn).second || r.kind == Annotation::Zero) continue;
    backend_->synthesize(page, r.ratio, page_content_seed(ospn, config_.engine.seed));
    engine_->preload(ospn, std::span<const std::uint8_t, kPageSize>(page.data(), kPageSize));
  }
}

// ---- plan execution ---------------------------------------------------------

void Simulator::execute(Plan plan, Tick t0, std::function<void(Tick)> on_respond,
                        std::function<void(Tick)> on_done) {
  auto run = std::make_shared<PlanRun>();
  run->plan = std::move(plan);
  run->t0 = run->last = t0;
  run->on_respond = std::move(on_respond);
  run->on_done = std::move(on_done);
  const auto n = run->plan.steps.size();
  run->children.resize(n);
  run->remaining = n;
  if (n == 0) {
    if (run->on_respond) run->on_respond(t0);
    if (run->on_done) run->on_done(t0);
    return;
  }
  for (std::size_t s = 0; s < n; ++s) {
    const PlanStep& step = run->plan.steps[s];
    if (step.after >= static_cast<int>(s)) throw InvariantViolation("plan step depends on a later step");
    if (step.after >= 0) {
      run->children[step.after].push_back(static_cast<int>(s));
      continue;
    }
    queue_.schedule(t0 + config_.clock.cycles(step.delay_cycles),
                    step.background ? Priority::Background : Priority::Foreground,
                    [this, run, s] { run_step(run, static_cast<int>(s)); });
  }
}

void Simulator::run_step(const std::shared_ptr<PlanRun>& run, int s) {
  const Tick now = queue_.now();
  PlanStep& step = run->plan.steps[s];
  Tick done = now;
  for (const auto& a : step.accesses) {
    traffic_.record(a);
    done = std::max(done, channels_.submit(a, now));
  }
  run->last = std::max(run->last, done);
  if (step.respond && !run->responded && run->on_respond) {
    run->responded = true;
    run->on_respond(done);
  }
  for (int c : run->children[s]) {
    const PlanStep& child = run->plan.steps[c];
    queue_.schedule(done + config_.clock.cycles(child.delay_cycles),
                    child.background ? Priority::Background : Priority::Foreground,
                    [this, run, c] { run_step(run, c); });
  }
  if (--run->remaining == 0) {
    if (!run->responded && run->on_respond) {
      run->responded = true;
      run->on_respond(run->last);
    }
    if (run->on_done) {
      const Tick last = run->last;
      queue_.schedule(last, Priority::Background, [run, last] { run->on_done(last); });
    }
  }
}

// Demotion decisions are taken right after each request's functional step so
// that traffic depends only on the request order, never on timing.
void Simulator::demote_if_needed() {
  while (engine_->demotion_needed() && engine_->has_promoted_pages()) {
    const std::uint64_t failed = engine_->stats().demotions_failed;
    Plan p = engine_->demote_one();
    execute(std::move(p), queue_.now(), nullptr, nullptr);
    if (engine_->stats().demotions_failed != failed) break;
  }
}

// ---- request flow -----------------------------------------------------------

void Simulator::issue(std::size_t index, Tick at) {
  ++issued_;
  const Tick arrive = link_.to_device(at);
  queue_.schedule(arrive, Priority::Foreground, [this, index, at] { start(index, at); });
}

void Simulator::start(std::size_t index, Tick issued) {
  const TraceRecord& r = trace_->records[index];
  Plan plan;
  if (r.op == Op::Read) {
    plan = engine_->read(r.ospa, nullptr);
  } else if (r.kind == Annotation::Payload) {
    const Line payload = trace_->payload(r);
    plan = engine_->write(r.ospa, &payload);
  } else {
    plan = engine_->write(r.ospa, nullptr);
  }
  execute(std::move(plan), queue_.now(),
          [this, issued](Tick done) {
            queue_.schedule(done, Priority::Foreground, [this, issued] {
              const Tick back = link_.to_host(queue_.now());
              queue_.schedule(back, Priority::Foreground, [this, issued] { complete(issued); });
            });
          },
          nullptr);
  demote_if_needed();
  if (config_.audit_interval && issued_ % config_.audit_interval == 0) engine_->audit();
}

void Simulator::complete(Tick issued) {
  latency_.add(queue_.now() - issued);
  ++completed_;
  if (sampler_.due(completed_)) sampler_.sample(completed_, engine_->allocated_bytes(), engine_->physical_bytes());
  if (next_ < trace_->records.size()) issue(next_++, queue_.now());
}

void Simulator::run() {
  if (ran_) throw ContractViolation("a simulator runs its trace once");
  if (!trace_) load_configured_trace();
  ran_ = true;
  preload_from(*trace_);
  const std::size_t n = trace_->records.size();
  const std::size_t window = std::min<std::size_t>(config_.host_window, n);
  for (next_ = 0; next_ < window;) issue(next_++, 0);
  queue_.run();
  finish_run();
}

void Simulator::finish_run() {
  execute(engine_->flush_metadata(), queue_.now(), nullptr, nullptr);
  queue_.run();
  finish_ = std::max(queue_.now(), channels_.stats().last_finish);
  if (sampler_.samples().empty()) sampler_.sample(completed_, engine_->allocated_bytes(), engine_->physical_bytes());
  if (config_.audit_interval) engine_->audit();
  if (event_log_) event_log_->flush();
}

AccessResult Simulator::access(Op op, Ospa ospa, const Line* payload) {
  if (ospa.ospn() >= layout_.page_count()) throw AddressFault("address beyond the advertised capacity");
  AccessResult res;
  const Tick issued = std::max(queue_.now(), channels_.stats().last_finish);
  const Tick arrive = link_.to_device(issued);
  queue_.schedule(arrive, Priority::Foreground, [&, issued] {
    Plan plan = op == Op::Read ? engine_->read(ospa, &res.data) : engine_->write(ospa, payload);
    execute(std::move(plan), queue_.now(),
            [&, issued](Tick done) {
              queue_.schedule(done, Priority::Foreground, [&, issued] {
                const Tick back = link_.to_host(queue_.now());
                res.latency = back - issued;
                latency_.add(res.latency);
                ++completed_;
              });
            },
            nullptr);
    demote_if_needed();
  });
  queue_.run();
  finish_ = std::max(queue_.now(), channels_.stats().last_finish);
  return res;
}

bool Simulator::conserved() const {
  const auto& ch = channels_.stats();
  if (traffic_.total() != ch.accesses) return false;
  for (std::size_t i = 0; i < kCategoryCount; ++i)
    if (traffic_.counts()[i] != ch.by_category[i]) return false;
  return ch.reads + ch.writes == ch.accesses;
}

// ---- reports ----------------------------------------------------------------

namespace {

json build_report(const Simulator& sim) {
  const auto& eng = sim.engine();
  const auto& st = eng.stats();
  const auto& tr = sim.traffic();
  const auto& ch = sim.channels().stats();
  json r;
  r["simulator"] = "ibexsim";
  json cfg = json::object();
  for (const auto& [k, v] : sim.config().to_pairs()) cfg[k] = v;
  r["config"] = cfg;

  r["requests"] = {{"completed", sim.completed()},
                   {"reads", st.reads},
                   {"writes", st.writes},
                   {"zero_served", st.zero_served}};

  json cats = json::object(), shares = json::object();
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    const auto c = static_cast<Category>(i);
    cats[std::string(to_string(c))] = tr.count(c);
    shares[std::string(to_string(c))] = tr.share(c);
  }
  r["traffic"] = {{"categories", cats},
                  {"shares", shares},
                  {"total", tr.total()},
                  {"data", tr.count(Category::ExternalData)},
                  {"control", tr.total() - tr.count(Category::ExternalData)},
                  {"metadata", tr.metadata()},
                  {"channel_accesses", ch.accesses},
                  {"channel_reads", ch.reads},
                  {"channel_writes", ch.writes},
                  {"conserved", sim.conserved()}};

  const auto& lat = sim.latency();
  r["latency_ns"] = {{"count", lat.count()},
                     {"mean", lat.mean() / 1000.0},
                     {"p50", ns(lat.percentile(50))},
                     {"p99", ns(lat.percentile(99))},
                     {"max", ns(lat.max())}};
  const Tick span = sim.finish_time();
  const double bytes = double(ch.accesses) * double(kLineSize);
  r["time"] = {{"finish_ns", ns(span)},
               {"channel_queue_delay_ns", ns(ch.queue_delay)},
               {"channel_bandwidth_gbps", span ? bytes / double(span) * 1000.0 : 0.0}};

  json chunk_hist = json::array(), block_hist = json::array();
  for (auto v : st.chunk_histogram) chunk_hist.push_back(v);
  for (auto v : st.block_sz_histogram) block_hist.push_back(v);
  const std::uint64_t phys = eng.physical_bytes();
  r["compression"] = {{"geomean_ratio", sim.ratios().geomean()},
                      {"samples", sim.ratios().samples().size()},
                      {"allocated_bytes", eng.allocated_bytes()},
                      {"physical_bytes", phys},
                      {"final_ratio", phys ? double(eng.allocated_bytes()) / double(phys) : 0.0},
                      {"chunk_count_histogram", chunk_hist},
                      {"block_size_code_histogram", block_hist}};

  const auto& mc = eng.metadata_cache().stats();
  r["metadata_cache"] = {{"lookups", mc.lookups},
                         {"hits", mc.hits},
                         {"misses", mc.misses},
                         {"hit_rate", mc.lookups ? double(mc.hits) / double(mc.lookups) : 0.0},
                         {"line_fills", mc.line_fills},
                         {"evictions", mc.evictions},
                         {"dirty_evictions", mc.dirty_evictions},
                         {"probes", mc.probes},
                         {"mean_insertion_age_at_eviction",
                          mc.evictions ? double(mc.insertion_age_sum) / double(mc.evictions) : 0.0},
                         {"max_insertion_age_at_eviction", mc.insertion_age_max}};

  const auto& at = eng.tracker();
  json scan = json::object();
  for (const auto& [lines, n] : at.scan_histogram()) scan[std::to_string(lines)] = n;
  r["demotion"] = {{"victims", at.victims()},
                   {"via_random", at.random_victims()},
                   {"via_random_fraction", at.victims() ? double(at.random_victims()) / double(at.victims()) : 0.0},
                   {"clean", st.demotions_clean},
                   {"dirty", st.demotions_dirty},
                   {"compressions", st.demotion_compressions},
                   {"failed", st.demotions_failed},
                   {"inline", st.inline_demotions},
                   {"lines_scanned_histogram", scan}};

  r["engine"] = {{"page_promotions", st.page_promotions},
                 {"block_promotions", st.block_promotions},
                 {"zero_fills", st.zero_fills},
                 {"dirtying_writes", st.dirtying_writes},
                 {"shadow_chunks_freed", st.shadow_chunks_freed},
                 {"incompressible_writes", st.incompressible_writes},
                 {"recompression_checks", st.recompression_checks},
                 {"recompression_rewrites", st.recompression_rewrites},
                 {"unpromoted_reads", st.unpromoted_reads},
                 {"capacity_events", st.capacity_events}};

  const auto& al = eng.allocator();
  json subs = json::array();
  for (std::uint32_t s = 0; s < al.sub_region_count(); ++s)
    subs.push_back({{"free", al.free_cchunks(s)}, {"allocated", al.allocated_cchunks(s)}});
  r["allocator"] = {{"free_pchunks", al.free_pchunks()},
                    {"allocated_pchunks", al.allocated_pchunks()},
                    {"allocated_cchunks", al.allocated_cchunks()},
                    {"exhaustion_events", al.exhaustion_events()},
                    {"sub_regions", subs}};
  return r;
}

}  // namespace

std::string Simulator::report_json() const { return build_report(*this).dump(2) + "\n"; }

void Simulator::write_outputs(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_text(fs::path(dir) / "report.json", report_json());

  std::ostringstream b;
  b << "category,count,share\n";
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    const auto c = static_cast<Category>(i);
    b << to_string(c) << ',' << traffic_.count(c) << ',' << std::setprecision(6) << traffic_.share(c) << '\n';
  }
  b << "total," << traffic_.total() << ",1\n";
  write_text(fs::path(dir) / "breakdown.csv", b.str());

  std::ostringstream r;
  r << "request,allocated_bytes,physical_bytes,ratio\n";
  for (const auto& s : sampler_.samples())
    r << s.request << ',' << s.allocated_bytes << ',' << s.physical_bytes << ',' << std::setprecision(8) << s.ratio
      << '\n';
  write_text(fs::path(dir) / "ratio.csv", r.str());
}

std::string Simulator::dump_meta() const {
  std::ostringstream os;
  os << "# format=" << to_string(layout_.metadata_format()) << " mode=" << to_string(config_.engine.mode) << '\n';
  if (config_.engine.uncompressed_baseline) return os.str();
  for (std::uint64_t ospn : engine_->touched_pages()) {
    const Bytes raw = engine_->encode_entry(ospn);
    os << "0x" << std::hex << ospn << std::dec << ' ';
    for (auto byte : raw) os << std::hex << std::setw(2) << std::setfill('0') << unsigned(byte);
    os << std::dec << std::setfill(' ') << ' ' << engine_->describe_entry(ospn) << '\n';
  }
  return os.str();
}

// ---- experiments ------------------------------------------------------------

std::string run_sweep(const RunConfig& base, const std::string& axis, const std::vector<std::string>& values,
                      const std::string& out_dir) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  (void)base.get(axis);  // rejects unknown axes up front
  std::shared_ptr<const Trace> shared;
  if (!trace_axis(axis)) shared = make_trace(base);

  std::vector<std::future<std::string>> runs;
  for (const auto& v : values) {
    runs.push_back(std::async(std::launch::async, [&base, &axis, v, shared, &out_dir] {
      RunConfig c = base;
      c.set(axis, v);
      if (!c.event_log.empty()) c.event_log += "." + v;
      Simulator sim(c);
      sim.set_trace(shared ? shared : make_trace(c));
      sim.run();
      if (!out_dir.empty()) sim.write_outputs((std::filesystem::path(out_dir) / (axis + "_" + v)).string());
      return sim.report_json();
    }));
  }
  json out;
  out["axis"] = axis;
  out["runs"] = json::array();
  for (std::size_t i = 0; i < values.size(); ++i)
    out["runs"].push_back({{"value", values[i]}, {"report", json::parse(runs[i].get())}});
  return out.dump(2) + "\n";
}

std::string run_ablation(const RunConfig& base, const std::string& out_dir) {
  struct Variant {
    const char* name;
    const char* mode;
    const char* format;
    bool shadowed;
  };
  static constexpr Variant variants[] = {
      {"base", "page4k", "naive", false},
      {"+S", "page4k", "naive", true},
      {"+S+C", "colocated1k", "colocated", true},
      {"+S+C+M", "colocated1k", "compact", true},
  };
  const std::shared_ptr<const Trace> trace = make_trace(base);
  std::vector<std::future<std::string>> runs;
  for (const auto& v : variants) {
    runs.push_back(std::async(std::launch::async, [&base, &trace, &out_dir, v] {
      RunConfig c = base;
      c.set("mode", v.mode);
      c.set("metadata_format", v.format);
      c.set("shadowed_promotion", v.shadowed ? "true" : "false");
      c.event_log.clear();
      Simulator sim(c);
      sim.set_trace(trace);
      sim.run();
      if (!out_dir.empty()) {
        std::string dir = v.name;
        std::replace(dir.begin(), dir.end(), '+', '_');
        if (dir.front() != '_') dir.insert(0, "_");
        sim.write_outputs((std::filesystem::path(out_dir) / ("ablate" + dir)).string());
      }
      return sim.report_json();
    }));
  }
  json out;
  out["variants"] = json::array();
  json totals = json::object(), meta = json::object();
  for (std::size_t i = 0; i < std::size(variants); ++i) {
    json rep = json::parse(runs[i].get());
    totals[variants[i].name] = rep["traffic"]["total"];
    meta[variants[i].name] = rep["traffic"]["metadata"];
    out["variants"].push_back({{"name", variants[i].name}, {"report", std::move(rep)}});
  }
  out["total_accesses"] = totals;
  out["metadata_accesses"] = meta;
  return out.dump(2) + "\n";
}

}  // namespace ibex
