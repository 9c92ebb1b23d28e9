#pragma once

// Discrete-event model of the vehicle -> roadside -> management-center path:
// the on-board unit decimates and batches frames into V2X messages, a
// bandwidth-limited FIFO uplink with a bounded drop-tail queue carries them,
// and the center decodes each message into a per-vehicle topic store and
// recomputes the indicator series from what actually arrived.
//
// Wire layout (little-endian, see docs/wire_format.md):
//
//   offset  size  field
//   0       1     magic 'C' (0x43)
//   1       1     format version (0x01)
//   2       6     vehicle id (48-bit unsigned)
//   8       8     sequence (u64)
//   16      8     generation time, s (f64)
//   24      40*n  records: timestamp, long_accel, left_lane_position,
//                 right_lane_position, range_rate_ratio (5 x f64)
//
// Absent record fields are the canonical quiet NaN. The record count is
// implied by the message length.

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cavmon/error.hpp"
#include "cavmon/indicators.hpp"
#include "cavmon/sampling.hpp"
#include "cavmon/telemetry.hpp"

namespace cavmon {

inline constexpr std::uint8_t kWireMagic = 0x43;
inline constexpr std::uint8_t kWireVersion = 0x01;
inline constexpr std::size_t kHeaderBytes = 24;
inline constexpr std::size_t kRecordBytes = 40;
inline constexpr std::uint64_t kMaxVehicleId = (std::uint64_t{1} << 48) - 1;

// The indicator-relevant slice of a frame. The radar pair is reduced on board
// to range_rate / range, which is all the inverse time-to-collision needs.
struct WireRecord {
  double timestamp = 0.0;
  std::optional<double> long_accel;
  std::optional<double> left_lane_position;
  std::optional<double> right_lane_position;
  std::optional<double> range_rate_ratio;  // 1/s

  friend bool operator==(const WireRecord&, const WireRecord&) = default;
};

inline WireRecord to_wire_record(const TelemetryFrame& f) {
  WireRecord r;
  r.timestamp = f.timestamp;
  r.long_accel = f.long_accel;
  r.left_lane_position = f.left_lane_position;
  r.right_lane_position = f.right_lane_position;
  if (f.target_range && *f.target_range > 0.0 && f.target_range_rate)
    r.range_rate_ratio = *f.target_range_rate / *f.target_range;
  return r;
}

struct V2xMessage {
  std::uint64_t vehicle_id = 0;
  std::uint64_t sequence = 0;
  double generated_at = 0.0;  // s, simulation clock
  std::vector<WireRecord> payload;

  std::size_t encoded_size() const { return kHeaderBytes + kRecordBytes * payload.size(); }
  friend bool operator==(const V2xMessage&, const V2xMessage&) = default;
};

inline V2xMessage encode(std::span<const TelemetryFrame> frames, std::uint64_t vehicle_id, std::uint64_t sequence,
                         double clock) {
  if (frames.empty()) throw InvalidArgument("cannot encode an empty batch");
  if (vehicle_id > kMaxVehicleId) throw InvalidArgument("vehicle id exceeds 48 bits");
  V2xMessage m{vehicle_id, sequence, clock, {}};
  m.payload.reserve(frames.size());
  for (const auto& f : frames) m.payload.push_back(to_wire_record(f));
  return m;
}

namespace detail {

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes = 8) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t at, int bytes = 8) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{in[at + static_cast<std::size_t>(i)]} << (8 * i);
  return v;
}

inline void put_f64(std::vector<std::uint8_t>& out, std::optional<double> v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v ? *v : std::numeric_limits<double>::quiet_NaN()));
}

inline double get_f64(std::span<const std::uint8_t> in, std::size_t at) {
  return std::bit_cast<double>(get_u64(in, at));
}

inline std::optional<double> get_field(std::span<const std::uint8_t> in, std::size_t at) {
  const double v = get_f64(in, at);
  if (std::isnan(v)) return std::nullopt;
  if (!std::isfinite(v)) throw DecodeError("non-finite record field");
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> to_bytes(const V2xMessage& m) {
  if (m.vehicle_id > kMaxVehicleId) throw InvalidArgument("vehicle id exceeds 48 bits");
  std::vector<std::uint8_t> out;
  out.reserve(m.encoded_size());
  out.push_back(kWireMagic);
  out.push_back(kWireVersion);
  detail::put_u64(out, m.vehicle_id, 6);
  detail::put_u64(out, m.sequence);
  detail::put_f64(out, m.generated_at);
  for (const auto& r : m.payload) {
    detail::put_f64(out, r.timestamp);
    detail::put_f64(out, r.long_accel);
    detail::put_f64(out, r.left_lane_position);
    detail::put_f64(out, r.right_lane_position);
    detail::put_f64(out, r.range_rate_ratio);
  }
  return out;
}

inline V2xMessage decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes + kRecordBytes) throw DecodeError("message truncated");
  if ((bytes.size() - kHeaderBytes) % kRecordBytes != 0) throw DecodeError("message length is not a whole record count");
  if (bytes[0] != kWireMagic) throw DecodeError("bad magic byte");
  if (bytes[1] != kWireVersion) throw DecodeError("unsupported wire format version");

  V2xMessage m;
  m.vehicle_id = detail::get_u64(bytes, 2, 6);
  m.sequence = detail::get_u64(bytes, 8);
  m.generated_at = detail::get_f64(bytes, 16);
  if (!std::isfinite(m.generated_at)) throw DecodeError("non-finite generation time");

  const std::size_t n = (bytes.size() - kHeaderBytes) / kRecordBytes;
  m.payload.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t at = kHeaderBytes + i * kRecordBytes;
    WireRecord r;
    r.timestamp = detail::get_f64(bytes, at);
    if (!std::isfinite(r.timestamp)) throw DecodeError("non-finite record timestamp");
    if (!m.payload.empty() && r.timestamp < m.payload.back().timestamp)
      throw DecodeError("record timestamps out of order");
    r.long_accel = detail::get_field(bytes, at + 8);
    r.left_lane_position = detail::get_field(bytes, at + 16);
    r.right_lane_position = detail::get_field(bytes, at + 24);
    r.range_rate_ratio = detail::get_field(bytes, at + 32);
    m.payload.push_back(r);
  }
  return m;
}

// Per-vehicle sequence bookkeeping on the receiving side. A message whose
// sequence does not exceed the last one seen is still accepted but flagged.
class SequenceTracker {
 public:
  // Returns true when the message arrived out of order.
  bool observe(const V2xMessage& m) {
    const auto it = last_.find(m.vehicle_id);
    const bool regressed = it != last_.end() && m.sequence <= it->second;
    if (regressed)
      ++reorders_;
    else
      last_[m.vehicle_id] = m.sequence;
    return regressed;
  }
  std::size_t reorder_count() const { return reorders_; }

 private:
  std::map<std::uint64_t, std::uint64_t> last_;
  std::size_t reorders_ = 0;
};

struct ChannelModel {
  double capacity_bps = 27e6;  // bits/s; +inf for an unconstrained link
  std::size_t queue_limit = 64;  // messages in the system, including the one in service
  double propagation_delay = 0.01;  // s

  void validate() const {
    if (!(capacity_bps > 0.0)) throw InvalidArgument("channel capacity must be positive");
    if (queue_limit < 1) throw InvalidArgument("queue limit must be at least 1");
    if (!(propagation_delay >= 0.0) || !std::isfinite(propagation_delay))
      throw InvalidArgument("propagation delay must be non-negative");
  }

  double transmission_time(std::size_t bytes) const {
    return std::isinf(capacity_bps) ? 0.0 : static_cast<double>(bytes) * 8.0 / capacity_bps;
  }

  static ChannelModel lte() { return {23.6e6, 64, 0.01}; }   // average LTE rate
  static ChannelModel wave() { return {27e6, 64, 0.01}; }    // peak WAVE rate
  static ChannelModel unlimited() { return {std::numeric_limits<double>::infinity(), 64, 0.01}; }

  static ChannelModel preset(const std::string& name) {
    if (name == "lte") return lte();
    if (name == "wave") return wave();
    if (name == "unlimited") return unlimited();
    throw InvalidArgument("unknown channel preset '" + name + "' (expected lte, wave or unlimited)");
  }
};

struct ChannelArrival {
  double time = 0.0;
  std::size_t bytes = 0;
};

struct ChannelOutcome {
  bool accepted = false;
  bool departed = false;  // finished transmitting before the horizon
  double tx_start = 0.0;
  double tx_end = 0.0;
  double delivered_at = 0.0;  // tx_end + propagation
};

// Single-server FIFO with drop-tail admission. A departure at the same instant
// as an arrival frees its slot first. Events after `horizon` are not
// processed; messages still in the system then have departed == false.
inline std::vector<ChannelOutcome> run_channel(std::span<const ChannelArrival> arrivals, const ChannelModel& channel,
                                               double horizon = std::numeric_limits<double>::infinity()) {
  channel.validate();
  enum Kind { Departure = 0, Arrival = 1 };
  struct Event {
    double time;
    int kind;
    std::size_t index;
    bool operator>(const Event& o) const {
      if (time != o.time) return time > o.time;
      if (kind != o.kind) return kind > o.kind;
      return index > o.index;
    }
  };

  std::vector<ChannelOutcome> out(arrivals.size());
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  for (std::size_t i = 0; i < arrivals.size(); ++i) events.push({arrivals[i].time, Arrival, i});

  std::queue<std::size_t> waiting;
  std::size_t in_system = 0;
  bool busy = false;

  auto start = [&](std::size_t i, double now) {
    busy = true;
    out[i].tx_start = now;
    out[i].tx_end = now + channel.transmission_time(arrivals[i].bytes);
    out[i].delivered_at = out[i].tx_end + channel.propagation_delay;
    events.push({out[i].tx_end, Departure, i});
  };

  while (!events.empty()) {
    const Event ev = events.top();
    if (ev.time > horizon) break;
    events.pop();
    if (ev.kind == Arrival) {
      if (in_system >= channel.queue_limit) continue;  // drop-tail
      out[ev.index].accepted = true;
      ++in_system;
      if (!busy)
        start(ev.index, ev.time);
      else
        waiting.push(ev.index);
    } else {
      out[ev.index].departed = true;
      --in_system;
      busy = false;
      if (!waiting.empty()) {
        const auto next = waiting.front();
        waiting.pop();
        start(next, ev.time);
      }
    }
  }
  return out;
}

struct MessageRecord {
  std::uint64_t sequence = 0;
  double generated_at = 0.0;
  std::size_t encoded_size = 0;
  std::size_t record_count = 0;
  bool dropped = false;
  bool delivered = false;
  std::optional<double> delivered_at;
  std::optional<double> latency;  // delivered_at - generated_at
};

struct PipelineReport {
  std::vector<MessageRecord> messages;
  std::vector<double> frame_latencies;  // per delivered frame: decode time - frame timestamp
  std::size_t sampled_frames = 0;
  std::size_t generated = 0;
  std::size_t delivered = 0;
  std::size_t dropped = 0;
  std::size_t in_queue = 0;  // still in the uplink at the end of the run
  std::size_t reorders = 0;
  std::size_t delivered_bytes = 0;
  std::size_t delivered_record_bytes = 0;
  double duration = 0.0;             // s, span of the input log
  double throughput = 0.0;           // delivered bytes / duration
  double record_throughput = 0.0;    // delivered record bytes / duration
  std::map<IndicatorKind, IndicatorSeries> tmc_series;
  std::set<double> delivered_timestamps;
};

struct SimulationOptions {
  std::uint64_t vehicle_id = 1;
  // Run the uplink until empty. When false the run stops at the last batch
  // tick and undelivered messages are reported as in_queue.
  bool drain = true;
  IndicatorOptions indicators;
  // Test hook: may modify a message's bytes after the uplink, before decode.
  std::function<void(std::uint64_t sequence, std::vector<std::uint8_t>& bytes)> tamper;
};

namespace detail {

inline std::map<IndicatorKind, IndicatorSeries> recompute_series(const std::vector<WireRecord>& store,
                                                                 double vehicle_width,
                                                                 const IndicatorOptions& opts) {
  std::map<IndicatorKind, IndicatorSeries> out;
  for (auto kind : kAllIndicators) {
    IndicatorSeries s;
    s.kind = kind;
    s.threshold = opts.threshold_for(kind);
    out[kind] = s;
  }
  for (const auto& r : store) {
    if (r.long_accel) out[IndicatorKind::SevereDeceleration].points.push_back({r.timestamp, *r.long_accel});
    if (r.left_lane_position && r.right_lane_position)
      out[IndicatorKind::LateralPositionVariation].points.push_back(
          {r.timestamp, lateral_margin(*r.left_lane_position, *r.right_lane_position, vehicle_width)});
    if (r.range_rate_ratio)
      out[IndicatorKind::InverseTimeToCollision].points.push_back(
          {r.timestamp, -(opts.range_rate_sign * *r.range_rate_ratio)});
  }
  return out;
}

}  // namespace detail

inline PipelineReport simulate(const TelemetryLog& log, const SamplingSpec& sampling, double batch_interval,
                               const ChannelModel& channel, const SimulationOptions& opts = {}) {
  sampling.validate();
  channel.validate();
  if (!(batch_interval > 0.0) || !std::isfinite(batch_interval))
    throw InvalidArgument("batch interval must be positive");
  if (batch_interval < sampling.interval - kTimeTolerance)
    throw InvalidArgument("batch interval must not be shorter than the sampling interval");
  if (log.frames.empty()) throw InvalidArgument("cannot simulate an empty log");

  PipelineReport report;
  const double t0 = log.frames.front().timestamp;
  report.duration = log.frames.back().timestamp - t0;

  const auto sampled = decimate_frames(log, sampling);
  report.sampled_frames = sampled.size();

  // OBU: group sampled frames by the batch tick that first covers them.
  std::vector<V2xMessage> messages;
  std::uint64_t sequence = 0;
  std::size_t i = 0;
  while (i < sampled.size()) {
    const double rel = (sampled[i].timestamp - t0) / batch_interval;
    const auto tick = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(rel - kTimeTolerance)));
    const double tick_time = t0 + static_cast<double>(tick) * batch_interval;
    std::size_t j = i;
    while (j < sampled.size() && sampled[j].timestamp <= tick_time + kTimeTolerance) ++j;
    messages.push_back(encode(std::span(sampled).subspan(i, j - i), opts.vehicle_id, ++sequence, tick_time));
    i = j;
  }
  report.generated = messages.size();

  std::vector<ChannelArrival> arrivals;
  arrivals.reserve(messages.size());
  for (const auto& m : messages) arrivals.push_back({m.generated_at, m.encoded_size()});
  const double horizon =
      opts.drain || messages.empty() ? std::numeric_limits<double>::infinity() : messages.back().generated_at;
  const auto outcomes = run_channel(arrivals, channel, horizon);

  // TMC: decode in delivery order into the topic store.
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < messages.size(); ++k)
    if (outcomes[k].departed) order.push_back(k);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return outcomes[a].delivered_at < outcomes[b].delivered_at; });

  std::map<std::uint64_t, std::vector<WireRecord>> topics;
  SequenceTracker tracker;
  for (auto k : order) {
    auto bytes = to_bytes(messages[k]);
    if (opts.tamper) opts.tamper(messages[k].sequence, bytes);
    const auto decoded = decode(bytes);
    tracker.observe(decoded);
    auto& topic = topics[decoded.vehicle_id];
    for (const auto& r : decoded.payload) {
      topic.push_back(r);
      report.delivered_timestamps.insert(r.timestamp);
      report.frame_latencies.push_back(outcomes[k].delivered_at - r.timestamp);
    }
    report.delivered_bytes += bytes.size();
    report.delivered_record_bytes += kRecordBytes * decoded.payload.size();
  }
  report.reorders = tracker.reorder_count();

  for (std::size_t k = 0; k < messages.size(); ++k) {
    MessageRecord rec;
    rec.sequence = messages[k].sequence;
    rec.generated_at = messages[k].generated_at;
    rec.encoded_size = messages[k].encoded_size();
    rec.record_count = messages[k].payload.size();
    rec.dropped = !outcomes[k].accepted;
    rec.delivered = outcomes[k].departed;
    if (rec.delivered) {
      rec.delivered_at = outcomes[k].delivered_at;
      rec.latency = outcomes[k].delivered_at - messages[k].generated_at;
      ++report.delivered;
    } else if (rec.dropped) {
      ++report.dropped;
    } else {
      ++report.in_queue;
    }
    report.messages.push_back(rec);
  }

  if (report.duration > 0.0) {
    report.throughput = static_cast<double>(report.delivered_bytes) / report.duration;
    report.record_throughput = static_cast<double>(report.delivered_record_bytes) / report.duration;
  }

  std::vector<WireRecord> store;
  if (auto it = topics.find(opts.vehicle_id); it != topics.end()) store = it->second;
  report.tmc_series = detail::recompute_series(store, log.vehicle_width, opts.indicators);
  return report;
}

// True when the center-side series equals `direct` exactly. Frames lost in
// transit are removed from `direct` before comparing.
inline bool end_to_end_check(const PipelineReport& report, const IndicatorSeries& direct) {
  const auto it = report.tmc_series.find(direct.kind);
  if (it == report.tmc_series.end()) return false;
  const auto& tmc = it->second.points;
  std::vector<SeriesPoint> expected;
  const bool lossless = report.dropped == 0 && report.in_queue == 0;
  for (const auto& p : direct.points)
    if (lossless || report.delivered_timestamps.count(p.timestamp)) expected.push_back(p);
  return expected == tmc;
}

inline nlohmann::json to_json(const PipelineReport& r) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : r.messages) {
    msgs.push_back({{"sequence", m.sequence},
                    {"generated_at", m.generated_at},
                    {"encoded_size", m.encoded_size},
                    {"record_count", m.record_count},
                    {"dropped", m.dropped},
                    {"delivered", m.delivered},
                    {"delivered_at", m.delivered_at ? nlohmann::json(*m.delivered_at) : nlohmann::json(nullptr)},
                    {"latency", m.latency ? nlohmann::json(*m.latency) : nlohmann::json(nullptr)}});
  }
  return {{"sampled_frames", r.sampled_frames},
          {"generated", r.generated},
          {"delivered", r.delivered},
          {"dropped", r.dropped},
          {"in_queue", r.in_queue},
          {"reorders", r.reorders},
          {"delivered_bytes", r.delivered_bytes},
          {"delivered_record_bytes", r.delivered_record_bytes},
          {"duration", r.duration},
          {"throughput_bytes_per_s", r.throughput},
          {"record_throughput_bytes_per_s", r.record_throughput},
          {"messages", msgs}};
}

}  // namespace cavmon
