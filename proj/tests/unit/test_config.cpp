#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "ibex/config.hpp"

using namespace ibex;

TEST(Config, DefaultsDescribeTheReferenceDevice) {
  const RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.get("mode"), "colocated1k");
  EXPECT_EQ(c.get("metadata_format"), "compact");
  EXPECT_EQ(c.get("shadowed_promotion"), "true");
  EXPECT_EQ(c.host_window, 16u);
  EXPECT_EQ(c.engine.meta_cache.capacity_bytes, 96u * KiB);
  EXPECT_EQ(c.engine.meta_cache.ways, 16u);
  EXPECT_EQ(c.engine.latency.compress_cycles_per_kb, 256u);
  EXPECT_EQ(c.engine.latency.decompress_cycles_per_kb, 64u);
  EXPECT_EQ(c.layout.promoted_size, 512 * MiB);
  EXPECT_DOUBLE_EQ(c.link.round_trip_ns, 70.0);
  EXPECT_EQ(c.dram.channels, 2u);
}

TEST(Config, SizesAcceptUnits) {
  EXPECT_EQ(parse_size("4096"), 4096u);
  EXPECT_EQ(parse_size("64K"), 64 * KiB);
  EXPECT_EQ(parse_size("512MB"), 512 * MiB);
  EXPECT_EQ(parse_size(" 128GiB "), 128 * GiB);
  EXPECT_EQ(parse_size("1t"), TiB);
  EXPECT_THROW(parse_size("MB"), ConfigError);
  EXPECT_THROW(parse_size("12 parsecs"), ConfigError);
}

TEST(Config, SetAndGetRoundTripEveryKey) {
  RunConfig c;
  c.set("promoted_size", "64MB");
  c.set("channels", "unlimited");
  c.set("synth.ratios", "1:1,2.5:3");
  RunConfig d;
  for (const auto& [k, v] : c.to_pairs()) d.set(k, v);
  EXPECT_EQ(d.to_pairs(), c.to_pairs());
  EXPECT_EQ(d.layout.promoted_size, 64 * MiB);
  EXPECT_TRUE(d.dram.unlimited);
  ASSERT_EQ(d.synth.ratios.size(), 2u);
  EXPECT_DOUBLE_EQ(d.synth.ratios[1].ratio, 2.5);
  EXPECT_EQ(c.to_pairs().size(), RunConfig::keys().size());
}

TEST(Config, AliasesMapOntoCanonicalKeys) {
  RunConfig c;
  c.set("link_latency", "100");
  EXPECT_DOUBLE_EQ(c.link.round_trip_ns, 100.0);
  c.set("colocate", "false");
  c.set("compaction", "false");
  EXPECT_EQ(c.get("mode"), "page4k");
  EXPECT_EQ(c.get("metadata_format"), "naive");
  c.set("colocate", "true");
  EXPECT_EQ(c.get("metadata_format"), "colocated");
  c.set("compaction", "on");
  EXPECT_EQ(c.get("metadata_format"), "compact");
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ErrorsNameTheKey) {
  RunConfig c;
  try {
    c.set("channels", "two");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("channels"), std::string::npos);
  }
  EXPECT_THROW(c.set("no_such_key", "1"), ConfigError);
  EXPECT_THROW(c.set("mode", "page8k"), ConfigError);
  EXPECT_THROW(c.set("shadowed_promotion", "maybe"), ConfigError);
}

TEST(Config, ValidateRejectsInconsistentCombinations) {
  RunConfig c;
  c.set("mode", "page4k");
  EXPECT_THROW(c.validate(), ConfigError);  // compact needs co-location
  c.set("metadata_format", "naive");
  EXPECT_NO_THROW(c.validate());
  c.set("shadowed_promotion", "false");
  EXPECT_NO_THROW(c.validate());

  RunConfig d;
  d.set("shadowed_promotion", "false");
  EXPECT_THROW(d.validate(), ConfigError);
  RunConfig e;
  e.set("metadata_format", "naive");
  EXPECT_THROW(e.validate(), ConfigError);
  RunConfig f;
  f.write_prob = 2;
  EXPECT_THROW(f.validate(), ConfigError);
}

TEST(Config, FileSyntaxAndLineNumbers) {
  RunConfig c;
  c.apply_text("# comment\n\n mode = page4k \nmetadata_format=naive # trailing\n");
  EXPECT_EQ(c.get("mode"), "page4k");
  try {
    c.apply_text("seed=3\nbogus line\n", "x.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("x.cfg:2"), std::string::npos) << e.what();
  }

  const auto path = std::filesystem::temp_directory_path() / "ibex_config_test.cfg";
  std::ofstream(path) << "promoted_size = 1GB\n";
  RunConfig g;
  g.apply_file(path.string());
  EXPECT_EQ(g.layout.promoted_size, GiB);
  std::filesystem::remove(path);
  EXPECT_THROW(g.apply_file(path.string()), ConfigError);
}
