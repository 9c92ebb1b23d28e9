#pragma once

// Ingestion, validation and quality filtering of CAV sensor logs.
//
// A log is a delimiter-separated text file with one header row and one frame
// per row. Empty cells are absent fields. Default column names follow the
// field identifiers used by the test vehicle's logger (timestamp, longAccel,
// leftLanePosition, ...); every name can be remapped.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cavmon/detail/text.hpp"
#include "cavmon/error.hpp"

namespace cavmon {

struct TelemetryFrame {
  double timestamp = 0.0;  // s

  // chassis
  std::optional<double> long_accel;  // m/s^2

  // vision
  std::optional<double> left_lane_position;  // m, vehicle center to left marking
  std::optional<int> left_lane_quality;
  std::optional<double> right_lane_position;  // m, vehicle center to right marking
  std::optional<int> right_lane_quality;

  // radar
  std::optional<double> target_range;        // m
  std::optional<double> target_range_rate;   // m/s, d(range)/dt
  std::optional<double> target_range_accel;  // m/s^2
  std::optional<int> target_status;

  bool has_chassis() const { return long_accel.has_value(); }
  bool has_vision() const {
    return left_lane_position || left_lane_quality || right_lane_position || right_lane_quality;
  }
  bool has_radar() const {
    return target_range || target_range_rate || target_range_accel || target_status;
  }

  friend bool operator==(const TelemetryFrame&, const TelemetryFrame&) = default;
};

inline constexpr double kDefaultVehicleWidth = 2.038;  // m, test vehicle

struct TelemetryLog {
  std::vector<TelemetryFrame> frames;
  double vehicle_width = kDefaultVehicleWidth;
  std::string source;
  double nominal_rate_hz = 0.0;  // 0 when fewer than two frames
};

// Column name for each frame field.
struct ColumnMap {
  std::string timestamp = "timestamp";
  std::string long_accel = "longAccel";
  std::string left_lane_position = "leftLanePosition";
  std::string left_lane_quality = "leftLaneQuality";
  std::string right_lane_position = "rightLanePosition";
  std::string right_lane_quality = "rightLaneQuality";
  std::string target_range = "targetRange";
  std::string target_range_rate = "targetRangeRate";
  std::string target_range_accel = "targetRangeAccel";
  std::string target_status = "targetStatus";

  // Overrides from a field-name -> column-name map. Keys are the default
  // column names above ("longAccel", ...). Unknown keys are an error.
  static ColumnMap with_overrides(const std::map<std::string, std::string>& overrides) {
    ColumnMap m;
    for (const auto& [field, column] : overrides) {
      bool found = false;
      m.for_each([&](const char* key, std::string& name) {
        if (field == key) {
          name = column;
          found = true;
        }
      });
      if (!found) throw InvalidArgument("unknown telemetry field '" + field + "'");
    }
    return m;
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("timestamp", timestamp);
    fn("longAccel", long_accel);
    fn("leftLanePosition", left_lane_position);
    fn("leftLaneQuality", left_lane_quality);
    fn("rightLanePosition", right_lane_position);
    fn("rightLaneQuality", right_lane_quality);
    fn("targetRange", target_range);
    fn("targetRangeRate", target_range_rate);
    fn("targetRangeAccel", target_range_accel);
    fn("targetStatus", target_status);
  }
};

struct LoadOptions {
  ColumnMap columns;
  char delimiter = ',';
  double vehicle_width = kDefaultVehicleWidth;
};

struct LoadResult {
  TelemetryLog log;
  std::size_t dropped_rows = 0;    // malformed or invariant-violating rows
  std::size_t duplicate_rows = 0;  // collapsed onto a later row with the same timestamp
};

double nominal_rate(const TelemetryLog& log);

namespace detail {

inline std::optional<double> median_gap(const std::vector<double>& timestamps) {
  if (timestamps.size() < 2) return std::nullopt;
  std::vector<double> gaps;
  gaps.reserve(timestamps.size() - 1);
  for (std::size_t i = 1; i < timestamps.size(); ++i) gaps.push_back(timestamps[i] - timestamps[i - 1]);
  const std::size_t mid = gaps.size() / 2;
  std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(mid), gaps.end());
  double med = gaps[mid];
  if (gaps.size() % 2 == 0) {
    const double lower = *std::max_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(mid));
    med = 0.5 * (med + lower);
  }
  return med;
}

// Sorts by timestamp (stable, so file order breaks ties) and keeps the last
// row of each run of equal timestamps. Returns the number of rows collapsed.
inline std::size_t sort_and_dedup(std::vector<TelemetryFrame>& frames) {
  std::stable_sort(frames.begin(), frames.end(),
                   [](const TelemetryFrame& a, const TelemetryFrame& b) { return a.timestamp < b.timestamp; });
  std::vector<TelemetryFrame> out;
  out.reserve(frames.size());
  for (auto& f : frames) {
    if (!out.empty() && out.back().timestamp == f.timestamp)
      out.back() = std::move(f);
    else
      out.push_back(std::move(f));
  }
  const std::size_t collapsed = frames.size() - out.size();
  frames = std::move(out);
  return collapsed;
}

}  // namespace detail

inline LoadResult parse_log(std::istream& in, const LoadOptions& opts = {}, std::string source = {}) {
  if (!(opts.vehicle_width > 0.0) || !std::isfinite(opts.vehicle_width))
    throw InvalidArgument("vehicle width must be positive");

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty telemetry file: missing header row");
  const auto header = detail::split_row(line, opts.delimiter);

  auto column_of = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };

  const auto& cm = opts.columns;
  const auto ts_col = column_of(cm.timestamp);
  if (!ts_col) throw ParseError("missing timestamp column '" + cm.timestamp + "'");
  const auto accel_col = column_of(cm.long_accel);
  const auto llp_col = column_of(cm.left_lane_position);
  const auto llq_col = column_of(cm.left_lane_quality);
  const auto rlp_col = column_of(cm.right_lane_position);
  const auto rlq_col = column_of(cm.right_lane_quality);
  const auto tr_col = column_of(cm.target_range);
  const auto trr_col = column_of(cm.target_range_rate);
  const auto tra_col = column_of(cm.target_range_accel);
  const auto ts_status_col = column_of(cm.target_status);

  LoadResult result;
  std::vector<TelemetryFrame> frames;

  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_row(line, opts.delimiter);
    bool ok = true;

    auto cell = [&](const std::optional<std::size_t>& col) -> std::string_view {
      if (!col || *col >= cells.size()) return {};
      return cells[*col];
    };
    auto real = [&](const std::optional<std::size_t>& col) -> std::optional<double> {
      const auto text = cell(col);
      if (text.empty()) return std::nullopt;
      auto v = detail::parse_double(text);
      if (!v) ok = false;
      return v;
    };
    auto integer = [&](const std::optional<std::size_t>& col) -> std::optional<int> {
      const auto text = cell(col);
      if (text.empty()) return std::nullopt;
      auto v = detail::parse_int(text);
      if (!v) ok = false;
      return v;
    };

    TelemetryFrame f;
    const auto ts = real(ts_col);
    f.long_accel = real(accel_col);
    f.left_lane_position = real(llp_col);
    f.left_lane_quality = integer(llq_col);
    f.right_lane_position = real(rlp_col);
    f.right_lane_quality = integer(rlq_col);
    f.target_range = real(tr_col);
    f.target_range_rate = real(trr_col);
    f.target_range_accel = real(tra_col);
    f.target_status = integer(ts_status_col);

    if (!ok || !ts || *ts < 0.0) ok = false;
    if (f.left_lane_position && *f.left_lane_position < 0.0) ok = false;
    if (f.right_lane_position && *f.right_lane_position < 0.0) ok = false;
    if (f.target_range && *f.target_range < 0.0) ok = false;
    if (!f.has_chassis() && !f.has_vision() && !f.has_radar()) ok = false;
    if (!ok) {
      ++result.dropped_rows;
      continue;
    }
    f.timestamp = *ts;
    frames.push_back(std::move(f));
  }

  result.duplicate_rows = detail::sort_and_dedup(frames);
  result.log.frames = std::move(frames);
  result.log.vehicle_width = opts.vehicle_width;
  result.log.source = std::move(source);
  if (result.log.frames.size() >= 2) result.log.nominal_rate_hz = nominal_rate(result.log);
  return result;
}

inline LoadResult load_log(const std::string& path, const LoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open telemetry file '" + path + "'");
  return parse_log(in, opts, path);
}

// Writes the log in the same delimited format parse_log reads. Doubles use
// the shortest representation that round-trips exactly.
inline void write_log(std::ostream& out, const TelemetryLog& log, const LoadOptions& opts = {}) {
  const char d = opts.delimiter;
  const auto& c = opts.columns;
  out << c.timestamp << d << c.long_accel << d << c.left_lane_position << d << c.left_lane_quality << d
      << c.right_lane_position << d << c.right_lane_quality << d << c.target_range << d << c.target_range_rate
      << d << c.target_range_accel << d << c.target_status << '\n';
  auto put = [&](const auto& v) {
    if (!v) return;
    if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, double>)
      out << detail::format_double(*v);
    else
      out << *v;
  };
  for (const auto& f : log.frames) {
    out << detail::format_double(f.timestamp) << d;
    put(f.long_accel);
    out << d;
    put(f.left_lane_position);
    out << d;
    put(f.left_lane_quality);
    out << d;
    put(f.right_lane_position);
    out << d;
    put(f.right_lane_quality);
    out << d;
    put(f.target_range);
    out << d;
    put(f.target_range_rate);
    out << d;
    put(f.target_range_accel);
    out << d;
    put(f.target_status);
    out << '\n';
  }
}

inline nlohmann::json to_json(const TelemetryFrame& f) {
  nlohmann::json j;
  j["timestamp"] = f.timestamp;
  auto opt = [&](const char* key, const auto& v) {
    if (v) j[key] = *v;
  };
  opt("longAccel", f.long_accel);
  opt("leftLanePosition", f.left_lane_position);
  opt("leftLaneQuality", f.left_lane_quality);
  opt("rightLanePosition", f.right_lane_position);
  opt("rightLaneQuality", f.right_lane_quality);
  opt("targetRange", f.target_range);
  opt("targetRangeRate", f.target_range_rate);
  opt("targetRangeAccel", f.target_range_accel);
  opt("targetStatus", f.target_status);
  return j;
}

// One JSON object per line, absent fields omitted.
inline void write_log_jsonl(std::ostream& out, const TelemetryLog& log) {
  for (const auto& f : log.frames) out << to_json(f).dump() << '\n';
}

struct QualityPolicy {
  int min_lane_quality = 2;
  // Accepted target_status codes; nullopt means "any non-zero code".
  std::optional<std::set<int>> valid_target_status;

  bool status_ok(int status) const {
    return valid_target_status ? valid_target_status->count(status) > 0 : status != 0;
  }
};

// Clears lane fields whose quality grade is below the minimum and radar
// fields whose target status is not accepted. Frames are never removed and
// chassis fields are never touched. A missing grade or status is not
// evidence of noise, so those fields are kept.
inline TelemetryLog filter_quality(const TelemetryLog& log, const QualityPolicy& policy = {}) {
  TelemetryLog out = log;
  for (auto& f : out.frames) {
    if (f.left_lane_quality && *f.left_lane_quality < policy.min_lane_quality) {
      f.left_lane_position.reset();
      f.left_lane_quality.reset();
    }
    if (f.right_lane_quality && *f.right_lane_quality < policy.min_lane_quality) {
      f.right_lane_position.reset();
      f.right_lane_quality.reset();
    }
    if (f.target_status && !policy.status_ok(*f.target_status)) {
      f.target_range.reset();
      f.target_range_rate.reset();
      f.target_range_accel.reset();
      f.target_status.reset();
    }
  }
  return out;
}

// 1 / median inter-frame gap.
inline double nominal_rate(const TelemetryLog& log) {
  if (log.frames.size() < 2) throw InvalidArgument("nominal rate needs at least two frames");
  std::vector<double> ts;
  ts.reserve(log.frames.size());
  for (const auto& f : log.frames) ts.push_back(f.timestamp);
  std::sort(ts.begin(), ts.end());
  const double gap = *detail::median_gap(ts);
  if (!(gap > 0.0)) throw InvalidArgument("nominal rate undefined: median frame gap is zero");
  return 1.0 / gap;
}

}  // namespace cavmon
