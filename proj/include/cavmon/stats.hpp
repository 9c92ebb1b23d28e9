#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "cavmon/error.hpp"
#include "cavmon/indicators.hpp"
#include "cavmon/sampling.hpp"

namespace cavmon {

// Empirical CDF: F(x) = #{v <= x} / n.
class Ecdf {
 public:
  explicit Ecdf(std::span<const double> sample) : sorted_(sample.begin(), sample.end()) {
    if (sorted_.empty()) throw InvalidArgument("ECDF of an empty sample");
    std::sort(sorted_.begin(), sorted_.end());
  }

  double operator()(double x) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
  }

  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

// sup |F_a - F_b| over the merged support; both inputs sorted ascending.
// The gap is tracked as the integer |i*m - j*n| and divided once, so the
// result is the correctly rounded value of the exact rational statistic.
inline double ks_statistic_sorted(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("KS statistic needs two non-empty samples");
  const std::uint64_t n = a.size(), m = b.size();
  std::size_t i = 0, j = 0;
  std::uint64_t best = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    const std::uint64_t lhs = i * m, rhs = j * n;
    best = std::max(best, lhs > rhs ? lhs - rhs : rhs - lhs);
  }
  // Past the end of one sample the gap only shrinks toward zero.
  return static_cast<double>(best) / (static_cast<double>(n) * static_cast<double>(m));
}

inline double ks_statistic(std::span<const double> a, std::span<const double> b) {
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  return ks_statistic_sorted(sa, sb);
}

struct KsResult {
  double statistic = 0.0;
  double critical_value = 0.0;
  bool pass = false;
};

// Asymptotic two-sample coefficient c(alpha) = sqrt(-ln(alpha / 2) / 2);
// c(0.05) = 1.358.
inline double ks_coefficient(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("significance level must lie in (0, 1)");
  return std::sqrt(-0.5 * std::log(alpha / 2.0));
}

inline double ks_critical_value(double alpha, std::size_t n, std::size_t m) {
  const double dn = static_cast<double>(n), dm = static_cast<double>(m);
  return ks_coefficient(alpha) * std::sqrt((dn + dm) / (dn * dm));
}

inline KsResult ks_test_sorted(std::span<const double> a, std::span<const double> b, double alpha = 0.05) {
  KsResult r;
  r.critical_value = ks_critical_value(alpha, a.size(), b.size());
  r.statistic = ks_statistic_sorted(a, b);
  r.pass = r.statistic <= r.critical_value;
  return r;
}

inline KsResult ks_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05) {
  ks_coefficient(alpha);
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  return ks_test_sorted(sa, sb, alpha);
}

// Phase in [0, interval) for one trial. Each trial gets its own generator
// seeded from (seed, trial), so trials are independent of evaluation order.
inline double trial_phase(std::uint64_t seed, std::uint64_t trial, double interval) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  std::mt19937_64 rng(seq);
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  const double phase = u * interval;
  return phase < interval ? phase : 0.0;
}

// Fraction of randomized-phase decimations whose sampled values pass a
// two-sample KS test against the raw values.
inline double ks_passing_rate(const IndicatorSeries& raw, double interval, std::size_t trials, double alpha,
                              std::uint64_t seed, SamplingMode mode = SamplingMode::TimeBased) {
  if (trials == 0) throw InvalidArgument("passing rate needs at least one trial");
  if (!(interval > 0.0)) throw InvalidArgument("sampling interval must be positive");
  if (raw.empty()) throw InvalidArgument("passing rate of an empty series");
  ks_coefficient(alpha);

  auto raw_sorted = raw.values();
  std::sort(raw_sorted.begin(), raw_sorted.end());

  std::size_t passes = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const SamplingSpec spec{interval, trial_phase(seed, t, interval), mode};
    auto sampled = decimate(raw, spec).series.values();
    if (sampled.empty()) continue;
    std::sort(sampled.begin(), sampled.end());
    if (ks_test_sorted(raw_sorted, sampled, alpha).pass) ++passes;
  }
  return static_cast<double>(passes) / static_cast<double>(trials);
}

struct DistributionSummary {
  double mode = 0.0;  // midpoint of the densest histogram bin
  double std_dev = 0.0;
  double bin_width = 0.0;
  std::size_t count = 0;
};

// Fixed-width histogram anchored at the sample minimum; the lowest bin wins
// ties. A sample with zero spread has its single value as the mode.
// std_dev is the population standard deviation.
inline DistributionSummary summarize(std::span<const double> values, double bin_width) {
  if (values.empty()) throw InvalidArgument("cannot summarize an empty sample");
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw InvalidArgument("bin width must be positive");

  DistributionSummary s;
  s.bin_width = bin_width;
  s.count = values.size();

  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi == lo) {
    s.mode = lo;
  } else {
    const auto nbins = static_cast<std::size_t>(std::floor((hi - lo) / bin_width)) + 1;
    std::vector<std::size_t> counts(nbins, 0);
    for (double v : values) {
      auto b = static_cast<std::size_t>(std::floor((v - lo) / bin_width));
      ++counts[std::min(b, nbins - 1)];
    }
    const auto best = std::max_element(counts.begin(), counts.end()) - counts.begin();
    s.mode = lo + (static_cast<double>(best) + 0.5) * bin_width;
  }

  // Welford
  double mean = 0.0, m2 = 0.0;
  std::size_t k = 0;
  for (double v : values) {
    ++k;
    const double delta = v - mean;
    mean += delta / static_cast<double>(k);
    m2 += delta * (v - mean);
  }
  s.std_dev = std::sqrt(std::max(0.0, m2) / static_cast<double>(k));
  return s;
}

inline nlohmann::json to_json(const DistributionSummary& s) {
  return {{"mode", s.mode}, {"std_dev", s.std_dev}, {"bin_width", s.bin_width}, {"count", s.count}};
}

inline nlohmann::json to_json(const KsResult& r) {
  return {{"statistic", r.statistic}, {"critical_value", r.critical_value}, {"pass", r.pass}};
}

}  // namespace cavmon
