#pragma once

// Critical-event detection and raw-vs-sampled event matching.
//
// An event is a maximal run of consecutive points satisfying the indicator's
// criticality predicate. Matching decides, per raw event, whether the sampled
// stream still shows a critical value inside the event, and measures how far
// the sampled extremum is from the raw peak in time (delay) and value (error).

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "cavmon/indicators.hpp"
#include "cavmon/sampling.hpp"

namespace cavmon {

struct CriticalEvent {
  double start = 0.0;
  double end = 0.0;
  double peak_time = 0.0;
  double peak_value = 0.0;
  double duration() const { return end - start; }
  friend bool operator==(const CriticalEvent&, const CriticalEvent&) = default;
};

enum class MatchOutcome { Detected, Missed };

struct EventMatch {
  CriticalEvent raw_event;
  MatchOutcome outcome = MatchOutcome::Missed;
  double error = 0.0;  // |raw peak - sampled extremum|, >= 0
  // Unset when no sampled point falls in the padded window.
  std::optional<double> delay;  // sampled peak time - raw peak time
  std::optional<double> sampled_peak_time;
  std::optional<double> sampled_peak_value;

  bool detected() const { return outcome == MatchOutcome::Detected; }
};

inline std::vector<CriticalEvent> detect_events(const IndicatorSeries& series) {
  std::vector<CriticalEvent> events;
  const auto o = series.orientation();
  bool in_run = false;
  CriticalEvent cur;
  for (const auto& p : series.points) {
    if (series.critical(p.value)) {
      if (!in_run) {
        cur = CriticalEvent{p.timestamp, p.timestamp, p.timestamp, p.value};
        in_run = true;
      } else {
        cur.end = p.timestamp;
        if (more_critical(o, p.value, cur.peak_value)) {
          cur.peak_value = p.value;
          cur.peak_time = p.timestamp;
        }
      }
    } else if (in_run) {
      events.push_back(cur);
      in_run = false;
    }
  }
  if (in_run) events.push_back(cur);
  return events;
}

// Value the monitor is assumed to see when nothing was sampled near an event:
// the neutral 0 for SD and ITTC, the threshold itself for LPV.
inline double missing_sample_baseline(const IndicatorSeries& series) {
  return series.kind == IndicatorKind::LateralPositionVariation ? series.threshold : 0.0;
}

// Each sampled point is attributed to at most one raw event: the event whose
// [start, end] contains it, otherwise the event with the nearest peak among
// those whose padded window [start - pad, end + pad] contains it.
inline std::vector<EventMatch> match_events(const IndicatorSeries& raw, const IndicatorSeries& sampled,
                                            double window_pad) {
  if (!(window_pad >= 0.0)) throw InvalidArgument("window pad must be non-negative");
  const auto events = detect_events(raw);
  const auto o = raw.orientation();
  constexpr double eps = kTimeTolerance;

  std::vector<std::vector<std::size_t>> attributed(events.size());
  std::size_t first = 0;
  for (std::size_t i = 0; i < sampled.points.size(); ++i) {
    const double t = sampled.points[i].timestamp;
    while (first < events.size() && events[first].end + window_pad + eps < t) ++first;
    std::optional<std::size_t> best;
    for (std::size_t e = first; e < events.size() && events[e].start - window_pad - eps <= t; ++e) {
      const auto& ev = events[e];
      if (t + eps >= ev.start && t <= ev.end + eps) {
        best = e;
        break;
      }
      if (t + eps < ev.start - window_pad || t > ev.end + window_pad + eps) continue;
      if (!best || std::fabs(t - ev.peak_time) < std::fabs(t - events[*best].peak_time)) best = e;
    }
    if (best) attributed[*best].push_back(i);
  }

  std::vector<EventMatch> matches;
  matches.reserve(events.size());
  for (std::size_t e = 0; e < events.size(); ++e) {
    const auto& ev = events[e];
    EventMatch m;
    m.raw_event = ev;
    const SeriesPoint* extremum = nullptr;
    bool detected = false;
    for (auto i : attributed[e]) {
      const auto& p = sampled.points[i];
      if (p.timestamp + eps >= ev.start && p.timestamp <= ev.end + eps && sampled.critical(p.value)) detected = true;
      if (!extremum || more_critical(o, p.value, extremum->value)) extremum = &p;
    }
    m.outcome = detected ? MatchOutcome::Detected : MatchOutcome::Missed;
    if (extremum) {
      m.sampled_peak_time = extremum->timestamp;
      m.sampled_peak_value = extremum->value;
      m.delay = extremum->timestamp - ev.peak_time;
      m.error = std::fabs(ev.peak_value - extremum->value);
    } else {
      m.error = std::fabs(ev.peak_value - missing_sample_baseline(raw));
    }
    matches.push_back(m);
  }
  return matches;
}

// Fraction of raw events still detected; 1.0 when there were none.
inline double success_ratio(const std::vector<EventMatch>& matches) {
  if (matches.empty()) return 1.0;
  const auto detected = std::count_if(matches.begin(), matches.end(), [](const EventMatch& m) { return m.detected(); });
  return static_cast<double>(detected) / static_cast<double>(matches.size());
}

inline nlohmann::json to_json(const CriticalEvent& e) {
  return {{"start", e.start},
          {"end", e.end},
          {"duration", e.duration()},
          {"peak_time", e.peak_time},
          {"peak_value", e.peak_value}};
}

inline nlohmann::json to_json(const EventMatch& m) {
  nlohmann::json j = {{"raw_event", to_json(m.raw_event)},
                      {"outcome", m.detected() ? "detected" : "missed"},
                      {"error", m.error}};
  j["delay"] = m.delay ? nlohmann::json(*m.delay) : nlohmann::json(nullptr);
  j["sampled_peak_time"] = m.sampled_peak_time ? nlohmann::json(*m.sampled_peak_time) : nlohmann::json(nullptr);
  j["sampled_peak_value"] = m.sampled_peak_value ? nlohmann::json(*m.sampled_peak_value) : nlohmann::json(nullptr);
  return j;
}

}  // namespace cavmon
