#pragma once

// Safety performance indicator series computed from telemetry:
//
//   SD    longitudinal acceleration; critical when accel <= -2.94 m/s^2
//   LPV   min(|y_left - w/2|, |y_right - w/2|); critical when the margin is
//         at or below the configured threshold (smaller is worse)
//   ITTC  closing speed / gap; critical when >= 1.76 1/s

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cavmon/detail/text.hpp"
#include "cavmon/error.hpp"
#include "cavmon/telemetry.hpp"

namespace cavmon {

enum class IndicatorKind { SevereDeceleration, LateralPositionVariation, InverseTimeToCollision };

inline constexpr IndicatorKind kAllIndicators[] = {IndicatorKind::SevereDeceleration,
                                                   IndicatorKind::LateralPositionVariation,
                                                   IndicatorKind::InverseTimeToCollision};

inline constexpr double kSevereDecelerationThreshold = -2.94;  // m/s^2
inline constexpr double kIttcThreshold = 1.76;                 // 1/s
inline constexpr double kLpvThreshold = 0.2;                   // m

// Which direction of the value axis is dangerous.
enum class Orientation { LowerIsCritical, HigherIsCritical };

constexpr Orientation orientation_of(IndicatorKind kind) {
  return kind == IndicatorKind::InverseTimeToCollision ? Orientation::HigherIsCritical
                                                       : Orientation::LowerIsCritical;
}

constexpr std::string_view short_name(IndicatorKind kind) {
  switch (kind) {
    case IndicatorKind::SevereDeceleration: return "SD";
    case IndicatorKind::LateralPositionVariation: return "LPV";
    case IndicatorKind::InverseTimeToCollision: return "ITTC";
  }
  return "?";
}

inline IndicatorKind parse_indicator(std::string_view name) {
  for (auto kind : kAllIndicators) {
    const auto s = short_name(kind);
    if (name.size() == s.size() &&
        std::equal(name.begin(), name.end(), s.begin(), [](char a, char b) { return std::toupper(a) == b; }))
      return kind;
  }
  throw InvalidArgument("unknown indicator '" + std::string(name) + "' (expected SD, LPV or ITTC)");
}

constexpr double default_threshold(IndicatorKind kind) {
  switch (kind) {
    case IndicatorKind::SevereDeceleration: return kSevereDecelerationThreshold;
    case IndicatorKind::LateralPositionVariation: return kLpvThreshold;
    case IndicatorKind::InverseTimeToCollision: return kIttcThreshold;
  }
  return 0.0;
}

// Inclusive on the threshold in both orientations.
constexpr bool is_critical(Orientation o, double value, double threshold) {
  return o == Orientation::LowerIsCritical ? value <= threshold : value >= threshold;
}

// True when a is strictly more dangerous than b.
constexpr bool more_critical(Orientation o, double a, double b) {
  return o == Orientation::LowerIsCritical ? a < b : a > b;
}

struct SeriesPoint {
  double timestamp = 0.0;
  double value = 0.0;
  friend bool operator==(const SeriesPoint&, const SeriesPoint&) = default;
};

struct IndicatorSeries {
  IndicatorKind kind = IndicatorKind::SevereDeceleration;
  std::vector<SeriesPoint> points;
  double threshold = kSevereDecelerationThreshold;
  std::size_t skipped_frames = 0;  // frames that could not contribute a value

  Orientation orientation() const { return orientation_of(kind); }
  bool critical(double value) const { return is_critical(orientation(), value, threshold); }
  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }

  std::vector<double> values() const {
    std::vector<double> v;
    v.reserve(points.size());
    for (const auto& p : points) v.push_back(p.value);
    return v;
  }
  std::vector<double> timestamps() const {
    std::vector<double> v;
    v.reserve(points.size());
    for (const auto& p : points) v.push_back(p.timestamp);
    return v;
  }
};

struct IndicatorOptions {
  std::optional<double> sd_threshold;
  std::optional<double> lpv_threshold;
  std::optional<double> ittc_threshold;
  // +1: target_range_rate is d(range)/dt, so a closing gap is negative.
  // -1: the logger reports closing speed as positive.
  int range_rate_sign = +1;

  double threshold_for(IndicatorKind kind) const {
    switch (kind) {
      case IndicatorKind::SevereDeceleration: return sd_threshold.value_or(kSevereDecelerationThreshold);
      case IndicatorKind::LateralPositionVariation: return lpv_threshold.value_or(kLpvThreshold);
      case IndicatorKind::InverseTimeToCollision: return ittc_threshold.value_or(kIttcThreshold);
    }
    return 0.0;
  }
};

// Eq-level helpers, shared with the TMC side of the pipeline simulator.
inline double lateral_margin(double left_lane_position, double right_lane_position, double vehicle_width) {
  const double half = vehicle_width / 2.0;
  return std::min(std::fabs(left_lane_position - half), std::fabs(right_lane_position - half));
}

inline double inverse_ttc(double range_rate, double range, int range_rate_sign = +1) {
  return -(range_rate_sign * range_rate) / range;
}

inline IndicatorSeries compute_sd(const TelemetryLog& log, const IndicatorOptions& opts = {}) {
  IndicatorSeries s;
  s.kind = IndicatorKind::SevereDeceleration;
  s.threshold = opts.threshold_for(s.kind);
  for (const auto& f : log.frames) {
    if (f.long_accel)
      s.points.push_back({f.timestamp, *f.long_accel});
    else
      ++s.skipped_frames;
  }
  if (s.points.empty()) throw InvalidArgument("no longitudinal acceleration data in log");
  return s;
}

// Frames missing either lane position are skipped.
inline IndicatorSeries compute_lpv(const TelemetryLog& log, const IndicatorOptions& opts = {}) {
  if (!(log.vehicle_width > 0.0) || !std::isfinite(log.vehicle_width))
    throw InvalidArgument("vehicle width must be positive");
  IndicatorSeries s;
  s.kind = IndicatorKind::LateralPositionVariation;
  s.threshold = opts.threshold_for(s.kind);
  for (const auto& f : log.frames) {
    if (f.left_lane_position && f.right_lane_position)
      s.points.push_back({f.timestamp, lateral_margin(*f.left_lane_position, *f.right_lane_position, log.vehicle_width)});
    else
      ++s.skipped_frames;
  }
  return s;
}

// Frames with no target or a zero range are skipped and counted.
inline IndicatorSeries compute_ittc(const TelemetryLog& log, const IndicatorOptions& opts = {}) {
  IndicatorSeries s;
  s.kind = IndicatorKind::InverseTimeToCollision;
  s.threshold = opts.threshold_for(s.kind);
  for (const auto& f : log.frames) {
    if (f.target_range && *f.target_range > 0.0 && f.target_range_rate)
      s.points.push_back({f.timestamp, inverse_ttc(*f.target_range_rate, *f.target_range, opts.range_rate_sign)});
    else
      ++s.skipped_frames;
  }
  return s;
}

inline IndicatorSeries compute_indicator(IndicatorKind kind, const TelemetryLog& log,
                                         const IndicatorOptions& opts = {}) {
  switch (kind) {
    case IndicatorKind::SevereDeceleration: return compute_sd(log, opts);
    case IndicatorKind::LateralPositionVariation: return compute_lpv(log, opts);
    case IndicatorKind::InverseTimeToCollision: return compute_ittc(log, opts);
  }
  throw InvalidArgument("unknown indicator kind");
}

// timestamp,value,critical
inline void write_series(std::ostream& out, const IndicatorSeries& s, char delim = ',') {
  out << "timestamp" << delim << "value" << delim << "critical\n";
  for (const auto& p : s.points)
    out << detail::format_double(p.timestamp) << delim << detail::format_double(p.value) << delim
        << (s.critical(p.value) ? 1 : 0) << '\n';
}

}  // namespace cavmon
