#include <gtest/gtest.h>

#include <sstream>

#include "ibex/timing_model.hpp"

using namespace ibex;

namespace {

MemoryAccess line(std::uint64_t index, bool write = false) {
  return {Mpa{index * kLineSize}, write, Category::ExternalData};
}

}  // namespace

TEST(DramConfig, Ddr5_5600Timings) {
  const DramConfig c;
  // 1 / 2800MHz clock; one 64B burst is 8 beats at 5600MT/s
  EXPECT_EQ(c.tck(), 357);
  EXPECT_EQ(c.burst(), 1429);
  EXPECT_EQ(c.access_latency(), 28571);
  EXPECT_NEAR(c.peak_bytes_per_ps() * 1e3, 89.6, 1e-9);  // GB/s
}

TEST(ChannelModel, IdleAccessLatency) {
  ChannelModel m;
  const DramConfig& c = m.config();
  EXPECT_EQ(m.submit(line(0), 1000), 1000 + c.access_latency() + c.burst());
  EXPECT_EQ(m.stats().queue_delay, 0);
}

TEST(ChannelModel, LinesInterleaveAcrossChannels) {
  ChannelModel m;
  Tick last = 0;
  for (std::uint64_t i = 0; i < 32; ++i) last = std::max(last, m.submit(line(i), 0));
  EXPECT_EQ(m.busy_time(0), 16 * m.config().burst());
  EXPECT_EQ(m.busy_time(1), 16 * m.config().burst());
  EXPECT_EQ(last, 16 * m.config().burst() + m.config().access_latency());
  EXPECT_EQ(m.stats().queue_delay, 2 * m.config().burst() * (15 * 16 / 2));
}

TEST(ChannelModel, UnlimitedModeHasNoQueueing) {
  DramConfig c;
  c.unlimited = true;
  ChannelModel m(c);
  for (std::uint64_t i = 0; i < 100; ++i) EXPECT_EQ(m.submit(line(i * 2), 5), 5 + c.burst() + c.access_latency());
  EXPECT_EQ(m.stats().queue_delay, 0);
}

TEST(ChannelModel, CountsByCategoryAndDirection) {
  ChannelModel m;
  m.submit({Mpa{0}, true, Category::MetadataWrite}, 0);
  m.submit({Mpa{64}, false, Category::MetadataRead}, 0);
  m.submit({Mpa{128}, false, Category::MetadataRead}, 0);
  EXPECT_EQ(m.stats().by_category[static_cast<std::size_t>(Category::MetadataRead)], 2u);
  EXPECT_EQ(m.stats().writes, 1u);
  EXPECT_EQ(m.stats().reads, 2u);
}

TEST(ChannelModel, RejectsMisalignedAndLateReconfigure) {
  ChannelModel m;
  EXPECT_THROW(m.submit({Mpa{8}, false, Category::ExternalData}, 0), ContractViolation);
  DramConfig bad;
  bad.channels = 0;
  EXPECT_THROW(m.reconfigure(bad), ConfigError);
  m.submit(line(0), 0);
  EXPECT_THROW(m.reconfigure(DramConfig{}), ContractViolation);
}

TEST(ChannelModel, LogsOneRowPerAccess) {
  std::ostringstream log;
  ChannelModel m;
  m.set_log(&log);
  m.submit(line(3, true), 0);
  const std::string s = log.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 2);
  EXPECT_NE(s.find(",0xc0,W,"), std::string::npos);
}

TEST(LinkModel, RoundTripIsSeventyNanoseconds) {
  LinkModel l;
  const Tick arrive = l.to_device(0);
  const Tick back = l.to_host(arrive);
  EXPECT_EQ(back - 2 * l.config().flit(), 70000);
}

TEST(LinkModel, SerializesBackToBackFlits) {
  LinkModel l;
  const Tick a = l.to_device(0);
  const Tick b = l.to_device(0);
  EXPECT_EQ(b - a, l.config().flit());
  EXPECT_EQ(l.config().flit(), 2000);  // 64B at 32GB/s
}

TEST(EventQueue, OrdersByTimeThenPriorityThenInsertion) {
  EventQueue q;
  std::vector<int> order;
  q.schedule(10, Priority::Background, [&] { order.push_back(3); });
  q.schedule(10, Priority::Foreground, [&] { order.push_back(1); });
  q.schedule(10, Priority::Foreground, [&] { order.push_back(2); });
  q.schedule(5, Priority::Background, [&] {
    order.push_back(0);
    q.schedule(1, Priority::Foreground, [&] { order.push_back(-1); });  // clamps to now
  });
  EXPECT_EQ(q.run(), 5u);
  EXPECT_EQ(order, (std::vector<int>{0, -1, 1, 2, 3}));
  EXPECT_EQ(q.now(), 10);
}

TEST(ClockConfig, CyclesToPicoseconds) {
  const ClockConfig c;
  EXPECT_EQ(c.cycles(64), 32000);
  EXPECT_EQ(c.cycles(256), 128000);
}
