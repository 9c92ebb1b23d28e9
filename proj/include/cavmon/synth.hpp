#pragma once

// Deterministic synthetic telemetry with planted critical events.
//
// Each indicator channel is a slow, bounded baseline wander plus raised-cosine
// disturbances of a configured duration and peak. The wander is smooth and
// far from the thresholds, so each disturbance that reaches its threshold
// produces exactly one raw critical event.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "cavmon/error.hpp"
#include "cavmon/indicators.hpp"
#include "cavmon/telemetry.hpp"

namespace cavmon {

struct EventPlan {
  std::size_t count = 0;
  double duration = 1.0;   // s, full support of the disturbance
  double amplitude = 0.0;  // indicator value at the disturbance peak
  double amplitude_jitter = 0.0;  // uniform +/- spread applied per event
};

struct SynthConfig {
  double rate_hz = 50.0;
  double duration_s = 600.0;
  std::uint64_t seed = 1;
  double vehicle_width = kDefaultVehicleWidth;
  double lane_width = 3.5;

  EventPlan sd{20, 2.1, -3.4, 0.0};
  EventPlan lpv{10, 19.99, 0.0, 0.0};
  EventPlan ittc{20, 0.1, 2.5, 0.0};

  // Peak excursion of the baseline wander per channel.
  double sd_wander = 0.2;     // m/s^2
  double lpv_wander = 0.05;   // m
  double ittc_wander = 0.05;  // 1/s
  double ittc_baseline = 0.05;
  double nominal_range = 30.0;  // m
};

struct PlantedEvent {
  IndicatorKind kind = IndicatorKind::SevereDeceleration;
  double center = 0.0;
  double duration = 0.0;
  double amplitude = 0.0;
};

struct SynthResult {
  TelemetryLog log;
  std::vector<PlantedEvent> planted;
};

namespace detail {

// Sum of three sinusoids with random low frequencies; |wander(t)| <= 1.
class Wander {
 public:
  explicit Wander(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> freq(0.005, 0.05), phase(0.0, 2.0 * std::numbers::pi);
    for (auto& c : comps_) {
      c.freq = freq(rng);
      c.phase = phase(rng);
    }
  }
  double operator()(double t) const {
    double v = 0.0;
    for (const auto& c : comps_) v += c.weight * std::sin(2.0 * std::numbers::pi * c.freq * t + c.phase);
    return v;
  }

 private:
  struct Comp {
    double weight = 0.0, freq = 0.0, phase = 0.0;
  };
  Comp comps_[3] = {{0.5}, {0.3}, {0.2}};
};

inline double raised_cosine(double t, double center, double width) {
  const double x = (t - center) / width;
  if (std::fabs(x) > 0.5) return 0.0;
  return 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * x));
}

inline std::vector<PlantedEvent> place_events(IndicatorKind kind, const EventPlan& plan, double total,
                                              std::mt19937_64& rng) {
  std::vector<PlantedEvent> out;
  if (plan.count == 0) return out;
  if (!(plan.duration > 0.0)) throw InvalidArgument("event duration must be positive");
  constexpr double margin = 0.5;  // s of quiet signal between neighbouring slots
  const double slot = total / static_cast<double>(plan.count);
  if (slot < plan.duration + 2.0 * margin)
    throw InvalidArgument("too many events of this duration for the log length");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < plan.count; ++i) {
    const double lo = static_cast<double>(i) * slot + margin + plan.duration / 2.0;
    const double hi = static_cast<double>(i + 1) * slot - margin - plan.duration / 2.0;
    const double center = lo + unit(rng) * (hi - lo);
    const double amp = plan.amplitude + plan.amplitude_jitter * (2.0 * unit(rng) - 1.0);
    out.push_back({kind, center, plan.duration, amp});
  }
  return out;
}

}  // namespace detail

inline SynthResult synthesize(const SynthConfig& cfg) {
  if (!(cfg.rate_hz > 0.0) || !std::isfinite(cfg.rate_hz)) throw InvalidArgument("rate must be positive");
  if (!(cfg.duration_s > 0.0) || !std::isfinite(cfg.duration_s)) throw InvalidArgument("duration must be positive");
  if (!(cfg.vehicle_width > 0.0) || !(cfg.lane_width > cfg.vehicle_width))
    throw InvalidArgument("lane must be wider than the vehicle");

  std::mt19937_64 rng(cfg.seed);
  const detail::Wander sd_wander(rng), lpv_wander(rng), ittc_wander(rng), range_wander(rng);

  SynthResult res;
  auto sd = detail::place_events(IndicatorKind::SevereDeceleration, cfg.sd, cfg.duration_s, rng);
  auto lpv = detail::place_events(IndicatorKind::LateralPositionVariation, cfg.lpv, cfg.duration_s, rng);
  auto ittc = detail::place_events(IndicatorKind::InverseTimeToCollision, cfg.ittc, cfg.duration_s, rng);

  const double half_lane = cfg.lane_width / 2.0;
  const double centered_margin = half_lane - cfg.vehicle_width / 2.0;

  const auto n = static_cast<std::size_t>(std::floor(cfg.duration_s * cfg.rate_hz)) + 1;
  res.log.frames.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / cfg.rate_hz;
    TelemetryFrame f;
    f.timestamp = t;

    double accel = cfg.sd_wander * sd_wander(t);
    for (const auto& e : sd) accel += e.amplitude * detail::raised_cosine(t, e.center, e.duration);
    f.long_accel = accel;

    // Lateral offset toward one side; events alternate sides.
    double offset = cfg.lpv_wander * lpv_wander(t);
    for (std::size_t k = 0; k < lpv.size(); ++k) {
      const double reach = centered_margin - lpv[k].amplitude;
      offset += (k % 2 == 0 ? 1.0 : -1.0) * reach * detail::raised_cosine(t, lpv[k].center, lpv[k].duration);
    }
    f.left_lane_position = std::max(0.0, half_lane + offset);
    f.right_lane_position = std::max(0.0, half_lane - offset);
    f.left_lane_quality = 3;
    f.right_lane_quality = 3;

    double ittc_value = cfg.ittc_baseline + cfg.ittc_wander * ittc_wander(t);
    for (const auto& e : ittc) ittc_value += (e.amplitude - cfg.ittc_baseline) * detail::raised_cosine(t, e.center, e.duration);
    const double range = cfg.nominal_range * (1.0 + 0.1 * range_wander(t));
    f.target_range = range;
    f.target_range_rate = -ittc_value * range;
    f.target_range_accel = 0.0;
    f.target_status = 1;

    res.log.frames.push_back(f);
  }
  res.log.vehicle_width = cfg.vehicle_width;
  res.log.source = "synthetic";
  if (res.log.frames.size() >= 2) res.log.nominal_rate_hz = nominal_rate(res.log);

  res.planted.insert(res.planted.end(), sd.begin(), sd.end());
  res.planted.insert(res.planted.end(), lpv.begin(), lpv.end());
  res.planted.insert(res.planted.end(), ittc.begin(), ittc.end());
  return res;
}

inline nlohmann::json to_json(const PlantedEvent& e) {
  return {{"indicator", std::string(short_name(e.kind))},
          {"center", e.center},
          {"duration", e.duration},
          {"amplitude", e.amplitude}};
}

}  // namespace cavmon
