#include "cavmon/netsim.hpp"

#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace {

using cavmon::ChannelArrival;
using cavmon::ChannelModel;
using cavmon::TelemetryFrame;
using cavmon::TelemetryLog;

TelemetryFrame full_frame(double t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-4.0, 1.0), lane(0.0, 2.5), range(1.0, 80.0);
  TelemetryFrame f;
  f.timestamp = t;
  f.long_accel = u(rng);
  f.left_lane_position = lane(rng);
  f.right_lane_position = lane(rng);
  f.left_lane_quality = 3;
  f.right_lane_quality = 3;
  f.target_range = range(rng);
  f.target_range_rate = 5.0 * u(rng);
  f.target_status = 1;
  return f;
}

TelemetryLog random_log(std::mt19937_64& rng, double rate_hz, double seconds) {
  TelemetryLog log;
  log.vehicle_width = 2.0;
  const auto n = static_cast<std::size_t>(rate_hz * seconds);
  for (std::size_t i = 0; i < n; ++i) log.frames.push_back(full_frame(static_cast<double>(i) / rate_hz, rng));
  return log;
}

TEST(Encode, MessageSizes) {
  std::mt19937_64 rng(1);
  std::vector<TelemetryFrame> frames;
  for (int i = 0; i < 10; ++i) frames.push_back(full_frame(0.1 * i, rng));
  const auto one = cavmon::encode(std::span(frames).first(1), 7, 1, 0.0);
  const auto ten = cavmon::encode(frames, 7, 2, 1.0);
  EXPECT_EQ(one.encoded_size(), 64u);
  EXPECT_EQ(ten.encoded_size(), 424u);
  EXPECT_EQ(cavmon::to_bytes(one).size(), 64u);
  EXPECT_EQ(cavmon::to_bytes(ten).size(), 424u);
}

TEST(Encode, HeaderLayout) {
  std::mt19937_64 rng(2);
  std::vector<TelemetryFrame> frames = {full_frame(0.0, rng)};
  const auto bytes = cavmon::to_bytes(cavmon::encode(frames, 0x0102030405ULL, 0x11, 2.5));
  EXPECT_EQ(bytes[0], 0x43);
  EXPECT_EQ(bytes[1], 0x01);
  EXPECT_EQ(bytes[2], 0x05);
  EXPECT_EQ(bytes[6], 0x01);
  EXPECT_EQ(bytes[7], 0x00);
  EXPECT_EQ(bytes[8], 0x11);
}

TEST(Encode, RejectsEmptyBatchAndWideVehicleId) {
  std::vector<TelemetryFrame> none;
  EXPECT_THROW(cavmon::encode(none, 1, 1, 0.0), cavmon::InvalidArgument);
  std::mt19937_64 rng(3);
  std::vector<TelemetryFrame> one = {full_frame(0.0, rng)};
  EXPECT_THROW(cavmon::encode(one, cavmon::kMaxVehicleId + 1, 1, 0.0), cavmon::InvalidArgument);
}

TEST(Decode, RoundTrip) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> count(1, 40);
  std::bernoulli_distribution drop(0.3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TelemetryFrame> frames;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      auto f = full_frame(0.02 * i, rng);
      if (drop(rng)) f.long_accel.reset();
      if (drop(rng)) f.left_lane_position.reset();
      if (drop(rng)) f.target_range.reset();
      frames.push_back(f);
    }
    const auto m = cavmon::encode(frames, rng() & cavmon::kMaxVehicleId, rng(), 0.02 * n);
    const auto bytes = cavmon::to_bytes(m);
    EXPECT_EQ(bytes.size(), m.encoded_size());
    EXPECT_EQ(cavmon::decode(bytes), m);
  }
}

TEST(Decode, RadarRatioIsBitExactWithDirectInverseTtc) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const auto f = full_frame(0.0, rng);
    const auto r = cavmon::to_wire_record(f);
    EXPECT_EQ(-(1.0 * *r.range_rate_ratio), cavmon::inverse_ttc(*f.target_range_rate, *f.target_range));
  }
}

TEST(Decode, RejectsMalformedMessages) {
  std::mt19937_64 rng(6);
  std::vector<TelemetryFrame> frames = {full_frame(0.0, rng), full_frame(0.1, rng)};
  const auto good = cavmon::to_bytes(cavmon::encode(frames, 1, 1, 0.1));

  auto truncated = good;
  truncated.resize(good.size() - 1);
  EXPECT_THROW(cavmon::decode(truncated), cavmon::DecodeError);
  EXPECT_THROW(cavmon::decode(std::span(good).first(24)), cavmon::DecodeError);

  auto magic = good;
  magic[0] = 0x00;
  EXPECT_THROW(cavmon::decode(magic), cavmon::DecodeError);

  auto version = good;
  version[1] = 0x02;
  EXPECT_THROW(cavmon::decode(version), cavmon::DecodeError);

  auto order = good;  // swap the two record timestamps
  std::swap_ranges(order.begin() + 24, order.begin() + 32, order.begin() + 64);
  EXPECT_THROW(cavmon::decode(order), cavmon::DecodeError);

  auto inf = good;  // +inf in long_accel of the first record
  const std::uint8_t pinf[8] = {0, 0, 0, 0, 0, 0, 0xf0, 0x7f};
  std::copy(pinf, pinf + 8, inf.begin() + 32);
  EXPECT_THROW(cavmon::decode(inf), cavmon::DecodeError);
}

TEST(SequenceTracker, FlagsRegressions) {
  cavmon::SequenceTracker tracker;
  cavmon::V2xMessage m;
  m.vehicle_id = 1;
  for (std::uint64_t s : {1, 2, 4}) {
    m.sequence = s;
    EXPECT_FALSE(tracker.observe(m));
  }
  m.sequence = 3;
  EXPECT_TRUE(tracker.observe(m));
  m.vehicle_id = 2;
  m.sequence = 1;
  EXPECT_FALSE(tracker.observe(m));
  EXPECT_EQ(tracker.reorder_count(), 1u);
}

TEST(Channel, SimultaneousArrivalsQueueInOrder) {
  const auto wave = ChannelModel::wave();
  const std::vector<ChannelArrival> arrivals(3, {0.0, 424});
  const auto out = cavmon::run_channel(arrivals, wave);
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_TRUE(out[i].departed);
    EXPECT_NEAR(out[i].delivered_at, oracles::fifo_burst_latency(i + 1, 424, 27e6, 0.01), 1e-9);
  }
}

TEST(Channel, QueueLimitDropsTheOverflow) {
  ChannelModel ch{8000.0, 1, 0.0};
  const std::vector<ChannelArrival> arrivals(2, {0.0, 1000});
  const auto out = cavmon::run_channel(arrivals, ch);
  EXPECT_TRUE(out[0].departed);
  EXPECT_FALSE(out[1].accepted);
}

TEST(Channel, DepartureFreesItsSlotBeforeASimultaneousArrival) {
  ChannelModel ch{8000.0, 1, 0.0};
  const std::vector<ChannelArrival> arrivals = {{0.0, 1000}, {1.0, 1000}};  // first leaves at exactly 1.0
  const auto out = cavmon::run_channel(arrivals, ch);
  EXPECT_TRUE(out[1].accepted);
  EXPECT_EQ(out[1].tx_start, 1.0);
}

TEST(Channel, UnlimitedCapacityCostsOnlyPropagation) {
  const auto ch = ChannelModel::unlimited();
  const std::vector<ChannelArrival> arrivals = {{0.0, 64}, {0.0, 4000}, {0.5, 100000}};
  for (const auto& o : cavmon::run_channel(arrivals, ch)) {
    EXPECT_TRUE(o.departed);
    EXPECT_EQ(o.tx_end, o.tx_start);
    EXPECT_EQ(o.delivered_at, o.tx_start + 0.01);
  }
}

TEST(Channel, PresetsAndValidation) {
  EXPECT_EQ(ChannelModel::preset("lte").capacity_bps, 23.6e6);
  EXPECT_EQ(ChannelModel::preset("wave").capacity_bps, 27e6);
  EXPECT_TRUE(std::isinf(ChannelModel::preset("unlimited").capacity_bps));
  EXPECT_THROW(ChannelModel::preset("5g"), cavmon::InvalidArgument);
  EXPECT_THROW((ChannelModel{0.0, 1, 0.0}.validate()), cavmon::InvalidArgument);
  EXPECT_THROW((ChannelModel{1.0, 0, 0.0}.validate()), cavmon::InvalidArgument);
}

TEST(Simulate, UnconstrainedLinkReproducesDirectSeries) {
  std::mt19937_64 rng(7);
  const auto log = random_log(rng, 50.0, 20.0);
  const cavmon::SamplingSpec sampling{0.2, 0.0};
  const auto report = cavmon::simulate(log, sampling, 1.0, ChannelModel::unlimited());
  EXPECT_EQ(report.dropped, 0u);
  EXPECT_EQ(report.in_queue, 0u);
  EXPECT_EQ(report.reorders, 0u);
  EXPECT_EQ(report.delivered, report.generated);

  const auto sampled_log = TelemetryLog{cavmon::decimate_frames(log, sampling), log.vehicle_width, "", 0.0};
  for (auto kind : cavmon::kAllIndicators) {
    const auto direct = cavmon::compute_indicator(kind, sampled_log);
    EXPECT_TRUE(cavmon::end_to_end_check(report, direct)) << cavmon::short_name(kind);
  }
}

TEST(Simulate, BatchingAndLatencies) {
  std::mt19937_64 rng(8);
  const auto log = random_log(rng, 10.0, 10.0);  // 0.0 .. 9.9
  const auto report = cavmon::simulate(log, {0.1, 0.0}, 1.0, ChannelModel::wave());
  // frames at 0.0 and (0, 1] go to tick 1; the last tick is 10.
  ASSERT_EQ(report.generated, 10u);
  EXPECT_EQ(report.messages[0].record_count, 11u);
  EXPECT_EQ(report.messages[1].record_count, 10u);
  EXPECT_EQ(report.messages[9].record_count, 9u);
  for (const auto& m : report.messages) {
    ASSERT_TRUE(m.latency);
    EXPECT_NEAR(*m.latency, m.encoded_size * 8.0 / 27e6 + 0.01, 1e-9);
  }
  ASSERT_EQ(report.frame_latencies.size(), log.frames.size());
  for (double l : report.frame_latencies) {
    EXPECT_GE(l, 0.01);
    EXPECT_LE(l, 1.0 + 0.01 + 1e-3);
  }
}

TEST(Simulate, ConservationAndLatencyFloor) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> cap(2e3, 2e5);
  std::uniform_int_distribution<int> qlim(1, 8), batch(1, 5);
  for (int run = 0; run < 50; ++run) {
    const auto log = random_log(rng, 20.0, 15.0);
    const ChannelModel ch{cap(rng), static_cast<std::size_t>(qlim(rng)), 0.005};
    cavmon::SimulationOptions opts;
    opts.drain = run % 2 == 0;
    const auto report = cavmon::simulate(log, {0.1, 0.0}, 0.2 * batch(rng), ch, opts);
    EXPECT_EQ(report.generated, report.delivered + report.dropped + report.in_queue);
    if (opts.drain) {
      EXPECT_EQ(report.in_queue, 0u);
    }
    for (const auto& m : report.messages) {
      if (!m.latency) continue;
      EXPECT_GE(*m.latency, ch.transmission_time(m.encoded_size) + ch.propagation_delay - 1e-12);
    }
    for (auto kind : cavmon::kAllIndicators) {
      const auto sampled_log = TelemetryLog{cavmon::decimate_frames(log, {0.1, 0.0}), log.vehicle_width, "", 0.0};
      EXPECT_TRUE(cavmon::end_to_end_check(report, cavmon::compute_indicator(kind, sampled_log)));
    }
  }
}

TEST(Simulate, Deterministic) {
  std::mt19937_64 rng(10);
  const auto log = random_log(rng, 50.0, 30.0);
  const ChannelModel ch{5e4, 4, 0.01};
  const auto a = cavmon::simulate(log, {0.1, 0.05}, 0.5, ch);
  const auto b = cavmon::simulate(log, {0.1, 0.05}, 0.5, ch);
  EXPECT_EQ(cavmon::to_json(a).dump(), cavmon::to_json(b).dump());
  EXPECT_EQ(a.frame_latencies, b.frame_latencies);
}

TEST(Simulate, TamperedPayloadFailsTheCheck) {
  std::mt19937_64 rng(11);
  const auto log = random_log(rng, 20.0, 10.0);
  cavmon::SimulationOptions opts;
  opts.tamper = [](std::uint64_t seq, std::vector<std::uint8_t>& bytes) {
    if (seq == 3) bytes[24 + 8] ^= 0x01;  // flip a low mantissa bit of long_accel
  };
  const auto report = cavmon::simulate(log, {0.05, 0.0}, 1.0, ChannelModel::wave(), opts);
  const auto direct = cavmon::compute_sd(log);
  EXPECT_FALSE(cavmon::end_to_end_check(report, direct));
  EXPECT_TRUE(cavmon::end_to_end_check(report, cavmon::compute_lpv(log)));
}

TEST(Simulate, ThroughputCappedByCapacity) {
  std::mt19937_64 rng(12);
  const auto log = random_log(rng, 50.0, 60.0);
  // 224-byte messages every 0.1 s offer about twice what the link carries.
  const ChannelModel tight{1e4, 4, 0.01};
  cavmon::SimulationOptions opts;
  opts.drain = false;
  const auto report = cavmon::simulate(log, {0.02, 0.0}, 0.1, tight, opts);
  EXPECT_GT(report.dropped, 0u);
  EXPECT_LE(report.throughput * 8.0, tight.capacity_bps * (1.0 + 1e-9));

  const auto loose = cavmon::simulate(log, {0.02, 0.0}, 0.1, ChannelModel::wave());
  EXPECT_EQ(loose.dropped, 0u);
  EXPECT_GT(loose.throughput, report.throughput);
}

TEST(Simulate, RejectsBadConfiguration) {
  std::mt19937_64 rng(13);
  const auto log = random_log(rng, 10.0, 2.0);
  EXPECT_THROW(cavmon::simulate(log, {0.5, 0.0}, 0.2, ChannelModel::wave()), cavmon::InvalidArgument);
  EXPECT_THROW(cavmon::simulate(log, {0.1, 0.0}, 0.0, ChannelModel::wave()), cavmon::InvalidArgument);
  EXPECT_THROW(cavmon::simulate(TelemetryLog{}, {0.1, 0.0}, 1.0, ChannelModel::wave()), cavmon::InvalidArgument);
}

}  // namespace
