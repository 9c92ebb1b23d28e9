#pragma once

// Communication-efficiency vs. reliability trade-off for a sampling interval k:
//
//   objective(k) = w_com * compression_ratio(k) + w_rel * success_ratio(k)
//
// evaluated over a discrete grid of candidate intervals.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cavmon/error.hpp"
#include "cavmon/events.hpp"
#include "cavmon/indicators.hpp"
#include "cavmon/sampling.hpp"
#include "cavmon/stats.hpp"

namespace cavmon {

struct Weights {
  double communication = 0.5;
  double reliability = 0.5;

  void validate() const {
    auto in_unit = [](double w) { return w >= 0.0 && w <= 1.0; };
    if (!in_unit(communication) || !in_unit(reliability) || std::fabs(communication + reliability - 1.0) > 1e-9)
      throw InvalidArgument("weights must lie in [0, 1] and sum to 1");
  }

  double combine(double compression, double success) const {
    return communication * compression + reliability * success;
  }
};

inline const std::vector<double> kDefaultIntervalGrid = {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0};

inline constexpr double kDefaultDelayBinWidth = 0.05;  // s
inline constexpr double kDefaultErrorBinWidth = 0.1;   // indicator units

struct SamplingOutcome {
  IndicatorKind indicator = IndicatorKind::SevereDeceleration;
  double interval = 0.0;
  double success_ratio = 1.0;
  double compression_ratio = 0.0;
  double weighted_sum = 0.0;
  std::size_t raw_count = 0;
  std::size_t sampled_count = 0;
  std::size_t event_count = 0;
  std::size_t detected_count = 0;
  // Unset when the corresponding outcome class has no samples.
  std::optional<DistributionSummary> delay_summary;
  std::optional<DistributionSummary> error_summary;
  std::optional<DistributionSummary> missed_delay_summary;
  std::optional<DistributionSummary> missed_error_summary;
};

inline double compression_ratio(std::size_t raw_count, std::size_t sampled_count) {
  return 1.0 - kept_fraction(raw_count, sampled_count);
}

struct EvaluateOptions {
  Weights weights;
  // Sampling phase as a fraction of the interval, in [0, 1).
  double phase_fraction = 0.0;
  SamplingMode mode = SamplingMode::TimeBased;
  double delay_bin_width = kDefaultDelayBinWidth;
  double error_bin_width = kDefaultErrorBinWidth;
  // Matching window pad; defaults to the interval itself.
  std::optional<double> window_pad;
};

namespace detail {

inline std::optional<DistributionSummary> summarize_if_any(const std::vector<double>& v, double bin_width) {
  if (v.empty()) return std::nullopt;
  return summarize(v, bin_width);
}

}  // namespace detail

inline SamplingOutcome evaluate(const IndicatorSeries& raw, double interval, const EvaluateOptions& opts = {}) {
  opts.weights.validate();
  if (!(interval > 0.0)) throw InvalidArgument("sampling interval must be positive");
  if (!(opts.phase_fraction >= 0.0 && opts.phase_fraction < 1.0))
    throw InvalidArgument("phase fraction must lie in [0, 1)");

  const SamplingSpec spec{interval, opts.phase_fraction * interval, opts.mode};
  const auto sampled = decimate(raw, spec).series;
  const auto matches = match_events(raw, sampled, opts.window_pad.value_or(interval));

  SamplingOutcome out;
  out.indicator = raw.kind;
  out.interval = interval;
  out.raw_count = raw.size();
  out.sampled_count = sampled.size();
  out.event_count = matches.size();
  out.success_ratio = success_ratio(matches);
  out.compression_ratio = compression_ratio(raw.size(), sampled.size());
  out.weighted_sum = opts.weights.combine(out.compression_ratio, out.success_ratio);

  std::vector<double> delays, errors, missed_delays, missed_errors;
  for (const auto& m : matches) {
    if (m.detected()) {
      ++out.detected_count;
      if (m.delay) delays.push_back(*m.delay);
      errors.push_back(m.error);
    } else {
      if (m.delay) missed_delays.push_back(*m.delay);
      missed_errors.push_back(m.error);
    }
  }
  out.delay_summary = detail::summarize_if_any(delays, opts.delay_bin_width);
  out.error_summary = detail::summarize_if_any(errors, opts.error_bin_width);
  out.missed_delay_summary = detail::summarize_if_any(missed_delays, opts.delay_bin_width);
  out.missed_error_summary = detail::summarize_if_any(missed_errors, opts.error_bin_width);
  return out;
}

inline std::vector<SamplingOutcome> sweep(const IndicatorSeries& raw, const std::vector<double>& intervals,
                                          const EvaluateOptions& opts = {}) {
  if (intervals.empty()) throw InvalidArgument("interval grid is empty");
  std::vector<SamplingOutcome> out;
  out.reserve(intervals.size());
  for (double k : intervals) out.push_back(evaluate(raw, k, opts));
  return out;
}

// Sums closer than this are treated as tied.
inline constexpr double kObjectiveTieTolerance = 1e-12;

namespace detail {

// Argmax over (interval, score) pairs, ties toward the smallest interval.
inline double argmax_interval(std::vector<std::pair<double, double>> scored) {
  std::sort(scored.begin(), scored.end());
  std::size_t best = 0;
  for (std::size_t i = 1; i < scored.size(); ++i)
    if (scored[i].second > scored[best].second + kObjectiveTieTolerance) best = i;
  return scored[best].first;
}

}  // namespace detail

inline double recommend(const std::vector<SamplingOutcome>& outcomes) {
  if (outcomes.empty()) throw InvalidArgument("no outcomes to recommend from");
  std::vector<std::pair<double, double>> scored;
  for (const auto& o : outcomes) scored.emplace_back(o.interval, o.weighted_sum);
  return detail::argmax_interval(std::move(scored));
}

// Mean objective across indicators per interval, recomputed under `weights`.
// Every indicator must have been swept over the same grid.
inline std::vector<std::pair<double, double>> uniform_objective(
    const std::map<IndicatorKind, std::vector<SamplingOutcome>>& per_indicator, const Weights& weights) {
  weights.validate();
  if (per_indicator.empty()) throw InvalidArgument("no indicator sweeps given");

  auto grid_of = [](const std::vector<SamplingOutcome>& v) {
    std::vector<double> g;
    for (const auto& o : v) g.push_back(o.interval);
    std::sort(g.begin(), g.end());
    return g;
  };
  const auto grid = grid_of(per_indicator.begin()->second);
  if (grid.empty()) throw InvalidArgument("empty sweep");
  if (std::adjacent_find(grid.begin(), grid.end()) != grid.end())
    throw InvalidArgument("duplicate interval in sweep grid");
  for (const auto& [kind, v] : per_indicator)
    if (grid_of(v) != grid) throw InvalidArgument("indicator sweeps use different interval grids");

  std::vector<std::pair<double, double>> table;
  for (double k : grid) {
    double sum = 0.0;
    for (const auto& [kind, v] : per_indicator) {
      const auto it = std::find_if(v.begin(), v.end(), [k](const SamplingOutcome& o) { return o.interval == k; });
      sum += weights.combine(it->compression_ratio, it->success_ratio);
    }
    table.emplace_back(k, sum / static_cast<double>(per_indicator.size()));
  }
  return table;
}

inline double recommend_uniform(const std::map<IndicatorKind, std::vector<SamplingOutcome>>& per_indicator,
                                const Weights& weights = {}) {
  return detail::argmax_interval(uniform_objective(per_indicator, weights));
}

inline nlohmann::json to_json(const SamplingOutcome& o) {
  auto opt = [](const std::optional<DistributionSummary>& s) { return s ? to_json(*s) : nlohmann::json(nullptr); };
  return {{"indicator", std::string(short_name(o.indicator))},
          {"interval", o.interval},
          {"success_ratio", o.success_ratio},
          {"compression_ratio", o.compression_ratio},
          {"weighted_sum", o.weighted_sum},
          {"raw_count", o.raw_count},
          {"sampled_count", o.sampled_count},
          {"event_count", o.event_count},
          {"detected_count", o.detected_count},
          {"detected_delay", opt(o.delay_summary)},
          {"detected_error", opt(o.error_summary)},
          {"missed_delay", opt(o.missed_delay_summary)},
          {"missed_error", opt(o.missed_error_summary)}};
}

}  // namespace cavmon
