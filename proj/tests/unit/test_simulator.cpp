#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ibex/simulator.hpp"
#include "json.hpp"

using namespace ibex;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

RunConfig small_run(const std::string& mode = "colocated1k", const std::string& format = "compact") {
  RunConfig c;
  c.set("mode", mode);
  c.set("metadata_format", format);
  c.set("promoted_size", "4MB");
  c.set("synth.footprint_pages", "3000");
  c.set("synth.requests", "20000");
  c.set("synth.read_ratio", "0.7");
  c.set("sample_interval", "5000");
  return c;
}

RunConfig single_access(const std::string& backend = "oracle") {
  RunConfig c = small_run("page4k", "naive");
  c.set("backend", backend);
  return c;
}

// link: one flit and half the round trip each way
Tick link_cost(const RunConfig& c) { return 2 * (c.link.one_way() + c.link.flit()); }
Tick dram_cost(const RunConfig& c) { return c.dram.burst() + c.dram.access_latency(); }

}  // namespace

TEST(Simulator, ZeroPageLatencies) {
  const RunConfig c = single_access();
  Simulator sim(c);
  const Tick hit = c.clock.cycles(c.engine.meta_cache.hit_latency_cycles);
  EXPECT_EQ(sim.access(Op::Read, Ospa{0x5000}).latency, link_cost(c) + hit + dram_cost(c));
  EXPECT_EQ(sim.access(Op::Read, Ospa{0x5040}).latency, link_cost(c) + hit);
}

TEST(Simulator, CompressedReadWaitsForFetchAndDecompress) {
  const RunConfig c = single_access();
  Simulator sim(c);
  std::array<std::uint8_t, kPageSize> page{};
  for (unsigned b = 0; b < kBlocksPerPage; ++b)
    SizeOracleBackend::make_filler(std::span<std::uint8_t, kBlockSize>(page.data() + b * kBlockSize, kBlockSize),
                                   500, b);
  sim.engine().preload(7, page);
  const Tick hit = c.clock.cycles(c.engine.meta_cache.hit_latency_cycles);
  // 32 line reads split over two channels queue 16 deep
  const Tick fetch = 16 * c.dram.burst() + c.dram.access_latency();
  const Tick decompress = c.clock.cycles(4 * c.engine.latency.decompress_cycles_per_kb);
  const AccessResult first = sim.access(Op::Read, Ospa{7 * kPageSize});
  EXPECT_EQ(first.latency, link_cost(c) + hit + dram_cost(c) + fetch + decompress);
  EXPECT_TRUE(std::equal(first.data.begin(), first.data.end(), page.begin()));

  const AccessResult second = sim.access(Op::Read, Ospa{7 * kPageSize + 64});
  EXPECT_EQ(second.latency, link_cost(c) + hit + dram_cost(c));
  EXPECT_TRUE(sim.conserved());
}

TEST(Simulator, WritesAreReadBack) {
  Simulator sim(single_access("lz"));
  Line l;
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = static_cast<std::uint8_t>(i * 3);
  sim.access(Op::Write, Ospa{0x9000 + 128}, &l);
  EXPECT_EQ(sim.access(Op::Read, Ospa{0x9000 + 128}).data, l);
  EXPECT_EQ(sim.access(Op::Read, Ospa{0x9000}).data, Line{});
  EXPECT_THROW(sim.access(Op::Read, Ospa{sim.engine().layout().page_count() * kPageSize}), AddressFault);
}

TEST(Simulator, SyntheticRunCompletesAndConserves) {
  Simulator sim(small_run());
  sim.run();
  EXPECT_EQ(sim.completed(), 20000u);
  EXPECT_TRUE(sim.conserved());
  EXPECT_EQ(sim.latency().count(), 20000u);
  EXPECT_EQ(sim.ratios().samples().size(), 4u);
  EXPECT_GT(sim.finish_time(), 0);
  EXPECT_THROW(sim.run(), ContractViolation);

  const json r = json::parse(sim.report_json());
  EXPECT_EQ(r["requests"]["completed"], 20000);
  EXPECT_EQ(r["traffic"]["total"], sim.traffic().total());
  EXPECT_TRUE(r["traffic"]["conserved"].get<bool>());
  EXPECT_EQ(r["traffic"]["categories"].size(), kCategoryCount);
  std::uint64_t sum = 0;
  for (const auto& [k, v] : r["traffic"]["categories"].items()) sum += v.get<std::uint64_t>();
  EXPECT_EQ(sum, sim.traffic().total());
}

TEST(Simulator, IdenticalRunsGiveIdenticalReports) {
  Simulator a(small_run()), b(small_run());
  a.run();
  b.run();
  EXPECT_EQ(a.report_json(), b.report_json());
  EXPECT_EQ(a.dump_meta(), b.dump_meta());
}

TEST(Simulator, DemotionKeepsThePromotedRegionInBounds) {
  RunConfig c = small_run();
  c.set("promoted_size", "2MB");  // 512 P-chunks for 3000 pages
  c.set("audit_interval", "1000");
  Simulator sim(c);
  sim.run();
  const auto& st = sim.engine().stats();
  EXPECT_GT(st.demotions_clean + st.demotions_dirty, 0u);
  EXPECT_LE(sim.engine().allocator().allocated_pchunks(), 512u);
  EXPECT_NO_THROW(sim.engine().audit());
}

TEST(Simulator, RejectsTraceBeyondCapacity) {
  Simulator sim(small_run());
  Trace t;
  TraceRecord r;
  r.ospa = Ospa{sim.engine().layout().page_count() * kPageSize};
  t.records.push_back(r);
  EXPECT_THROW(sim.set_trace(t), TraceError);
}

TEST(Simulator, OutputsAndMetadataDump) {
  Simulator sim(small_run());
  sim.run();
  const fs::path dir = fs::temp_directory_path() / ("ibex_sim_out_" + std::to_string(::getpid()));
  sim.write_outputs(dir.string());
  for (const char* f : {"report.json", "breakdown.csv", "ratio.csv"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  std::ifstream b(dir / "breakdown.csv");
  std::string line;
  int rows = 0;
  while (std::getline(b, line)) ++rows;
  EXPECT_EQ(rows, int(kCategoryCount) + 2);
  fs::remove_all(dir);

  std::istringstream dump(sim.dump_meta());
  std::getline(dump, line);
  EXPECT_EQ(line, "# format=compact mode=colocated1k");
  std::size_t entries = 0;
  while (std::getline(dump, line)) {
    ++entries;
    std::istringstream f(line);
    std::string ospn, hex;
    f >> ospn >> hex;
    EXPECT_EQ(hex.size(), 64u);  // 256-bit entry
  }
  EXPECT_EQ(entries, sim.engine().touched_pages().size());
}

TEST(Simulator, UncompressedBaselineTouchesOnlyData) {
  RunConfig c = small_run();
  c.set("baseline", "uncompressed");
  Simulator sim(c);
  sim.run();
  EXPECT_EQ(sim.traffic().total(), sim.traffic().count(Category::ExternalData));
  EXPECT_EQ(sim.traffic().total(), 20000u);
}

TEST(Simulator, LinkLatencySweepChangesOnlyTiming) {
  const json s = json::parse(run_sweep(small_run(), "link_latency", {"50", "150"}));
  ASSERT_EQ(s["runs"].size(), 2u);
  const json& lo = s["runs"][0]["report"];
  const json& hi = s["runs"][1]["report"];
  EXPECT_EQ(lo["traffic"]["categories"], hi["traffic"]["categories"]);
  EXPECT_LT(lo["latency_ns"]["mean"].get<double>(), hi["latency_ns"]["mean"].get<double>());
  EXPECT_THROW(run_sweep(small_run(), "no_such_axis", {"1"}), ConfigError);
}

TEST(Simulator, AblationHasFourVariants) {
  RunConfig c = small_run();
  c.set("synth.requests", "5000");
  const json a = json::parse(run_ablation(c));
  ASSERT_EQ(a["variants"].size(), 4u);
  EXPECT_EQ(a["variants"][0]["name"], "base");
  EXPECT_EQ(a["variants"][3]["name"], "+S+C+M");
  EXPECT_EQ(a["total_accesses"].size(), 4u);
}
