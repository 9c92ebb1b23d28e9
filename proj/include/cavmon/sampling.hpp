#pragma once

// Decimation of a timestamped series to a sampling interval with an explicit
// phase. Selection is causal: each grid time picks the last raw point at or
// before it. Nothing is interpolated or aggregated, so every output point is
// a verbatim input point.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "cavmon/error.hpp"
#include "cavmon/indicators.hpp"
#include "cavmon/telemetry.hpp"

namespace cavmon {

enum class SamplingMode { TimeBased, IndexBased };

struct SamplingSpec {
  double interval = 0.1;  // s
  double phase = 0.0;     // s, in [0, interval)
  SamplingMode mode = SamplingMode::TimeBased;

  void validate() const {
    if (!(interval > 0.0) || !std::isfinite(interval)) throw InvalidArgument("sampling interval must be positive");
    if (!(phase >= 0.0) || !(phase < interval)) throw InvalidArgument("sampling phase must lie in [0, interval)");
  }
};

// Slack used when comparing timestamps against grid times, so that a grid
// time computed as t0 + n*k still lands on a raw sample that is nominally
// equal to it.
inline constexpr double kTimeTolerance = 1e-9;

struct Selection {
  std::vector<std::size_t> indices;
  // Interval below the minimum raw gap: the input is returned unchanged.
  bool interval_below_gap = false;
};

// Indices of the points a decimation keeps. Timestamps must be strictly
// increasing.
inline Selection select_indices(std::span<const double> ts, const SamplingSpec& spec) {
  spec.validate();
  if (ts.empty()) throw InvalidArgument("cannot decimate an empty series");

  Selection sel;
  if (ts.size() == 1) {
    sel.indices.push_back(0);
    return sel;
  }

  double min_gap = ts[1] - ts[0];
  for (std::size_t i = 2; i < ts.size(); ++i) min_gap = std::min(min_gap, ts[i] - ts[i - 1]);
  if (spec.interval < min_gap - kTimeTolerance) {
    sel.interval_below_gap = true;
    sel.indices.resize(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) sel.indices[i] = i;
    return sel;
  }

  if (spec.mode == SamplingMode::IndexBased) {
    std::vector<double> tv(ts.begin(), ts.end());
    const double gap = *detail::median_gap(tv);
    const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spec.interval / gap)));
    const auto start = static_cast<std::size_t>(std::max(0.0, std::ceil(spec.phase / gap - kTimeTolerance)));
    for (std::size_t i = start; i < ts.size(); i += step) sel.indices.push_back(i);
    return sel;
  }

  const double t0 = ts.front();
  const double last = ts.back();
  std::size_t j = 0;
  bool emitted_any = false;
  std::size_t last_emitted = 0;
  for (std::size_t n = 0;; ++n) {
    const double grid = t0 + spec.phase + static_cast<double>(n) * spec.interval;
    if (grid > last + kTimeTolerance) break;
    while (j + 1 < ts.size() && ts[j + 1] <= grid + kTimeTolerance) ++j;
    if (!emitted_any || last_emitted != j) {
      sel.indices.push_back(j);
      last_emitted = j;
      emitted_any = true;
    }
  }
  return sel;
}

struct Decimated {
  IndicatorSeries series;
  bool interval_below_gap = false;
};

inline Decimated decimate(const IndicatorSeries& series, const SamplingSpec& spec) {
  const auto ts = series.timestamps();
  auto sel = select_indices(ts, spec);
  Decimated out;
  out.interval_below_gap = sel.interval_below_gap;
  out.series.kind = series.kind;
  out.series.threshold = series.threshold;
  out.series.points.reserve(sel.indices.size());
  for (auto i : sel.indices) out.series.points.push_back(series.points[i]);
  return out;
}

// Same selection rule applied to whole telemetry frames (the OBU's view).
inline std::vector<TelemetryFrame> decimate_frames(const TelemetryLog& log, const SamplingSpec& spec) {
  std::vector<double> ts;
  ts.reserve(log.frames.size());
  for (const auto& f : log.frames) ts.push_back(f.timestamp);
  const auto sel = select_indices(ts, spec);
  std::vector<TelemetryFrame> out;
  out.reserve(sel.indices.size());
  for (auto i : sel.indices) out.push_back(log.frames[i]);
  return out;
}

inline double kept_fraction(std::size_t raw_count, std::size_t sampled_count) {
  if (raw_count == 0) throw InvalidArgument("kept fraction undefined for an empty raw series");
  if (sampled_count > raw_count) throw InvalidArgument("sampled count exceeds raw count");
  return static_cast<double>(sampled_count) / static_cast<double>(raw_count);
}

}  // namespace cavmon
