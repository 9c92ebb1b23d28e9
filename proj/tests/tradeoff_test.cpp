#include "cavmon/tradeoff.hpp"

#include <random>

#include <gtest/gtest.h>

namespace {

using cavmon::IndicatorKind;
using cavmon::IndicatorSeries;
using cavmon::SamplingOutcome;
using cavmon::Weights;

IndicatorSeries sd_series(double rate_hz, double seconds, double dip_center, double dip_width) {
  IndicatorSeries s;
  s.kind = IndicatorKind::SevereDeceleration;
  s.threshold = cavmon::kSevereDecelerationThreshold;
  const auto n = static_cast<std::size_t>(seconds * rate_hz);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate_hz;
    const double v = std::fabs(t - dip_center) <= dip_width / 2 ? -4.0 : 0.0;
    s.points.push_back({t, v});
  }
  return s;
}

SamplingOutcome outcome(double interval, double compression, double success, Weights w = {}) {
  SamplingOutcome o;
  o.interval = interval;
  o.compression_ratio = compression;
  o.success_ratio = success;
  o.weighted_sum = w.combine(compression, success);
  return o;
}

TEST(CompressionRatio, DecimatedCounts) {
  EXPECT_NEAR(cavmon::compression_ratio(1000, 100), 0.9, 1e-15);
  EXPECT_EQ(cavmon::compression_ratio(500, 500), 0.0);
  EXPECT_THROW(cavmon::compression_ratio(0, 0), cavmon::InvalidArgument);
}

TEST(CompressionRatio, FromDecimation) {
  // 50 Hz at 0.2 s and 20 Hz at 0.5 s both keep one point in ten.
  for (const auto& [rate, k] : {std::pair{50.0, 0.2}, std::pair{20.0, 0.5}}) {
    const auto raw = sd_series(rate, 60.0, 30.0, 1.0);
    const auto o = cavmon::evaluate(raw, k);
    EXPECT_NEAR(o.compression_ratio, 0.9, 1.0 / static_cast<double>(raw.size()));
  }
}

TEST(Weights, Validation) {
  EXPECT_NO_THROW((Weights{0.3, 0.7}.validate()));
  EXPECT_THROW((Weights{0.6, 0.6}.validate()), cavmon::InvalidArgument);
  EXPECT_THROW((Weights{-0.1, 1.1}.validate()), cavmon::InvalidArgument);
}

TEST(Evaluate, IdentityIntervalDetectsEverythingAndCompressesNothing) {
  const auto raw = sd_series(20.0, 30.0, 10.0, 0.3);
  const auto o = cavmon::evaluate(raw, 0.05);
  EXPECT_EQ(o.event_count, 1u);
  EXPECT_EQ(o.success_ratio, 1.0);
  EXPECT_EQ(o.compression_ratio, 0.0);
  EXPECT_EQ(o.weighted_sum, 0.5);
  ASSERT_TRUE(o.delay_summary);
  EXPECT_EQ(o.delay_summary->mode, 0.0);
  EXPECT_FALSE(o.missed_error_summary);
}

TEST(Evaluate, WeightedSumFollowsWeights) {
  const auto raw = sd_series(20.0, 30.0, 10.0, 0.3);
  cavmon::EvaluateOptions opts;
  opts.weights = {1.0, 0.0};
  const auto o = cavmon::evaluate(raw, 1.0, opts);
  EXPECT_EQ(o.weighted_sum, o.compression_ratio);
  opts.weights = {0.0, 1.0};
  EXPECT_EQ(cavmon::evaluate(raw, 1.0, opts).weighted_sum, o.success_ratio);
}

TEST(Evaluate, WeightedSumIsBetweenItsParts) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto raw = sd_series(50.0, 60.0, 20.0, 0.4);
  for (int trial = 0; trial < 50; ++trial) {
    cavmon::EvaluateOptions opts;
    const double w = u(rng);
    opts.weights = {w, 1.0 - w};
    const auto o = cavmon::evaluate(raw, 0.1 + 3.0 * u(rng), opts);
    EXPECT_GE(o.weighted_sum, std::min(o.compression_ratio, o.success_ratio) - 1e-12);
    EXPECT_LE(o.weighted_sum, std::max(o.compression_ratio, o.success_ratio) + 1e-12);
  }
}

TEST(Evaluate, RejectsBadOptions) {
  const auto raw = sd_series(20.0, 5.0, 2.0, 0.3);
  cavmon::EvaluateOptions opts;
  opts.phase_fraction = 1.0;
  EXPECT_THROW(cavmon::evaluate(raw, 0.5, opts), cavmon::InvalidArgument);
  EXPECT_THROW(cavmon::evaluate(raw, -1.0), cavmon::InvalidArgument);
  EXPECT_THROW(cavmon::sweep(raw, {}), cavmon::InvalidArgument);
}

TEST(Recommend, PicksTheBestSum) {
  const std::vector<SamplingOutcome> v = {outcome(0.1, 0.5, 1.0), outcome(0.2, 0.75, 1.0), outcome(1.0, 0.95, 0.5)};
  EXPECT_EQ(cavmon::recommend(v), 0.2);
}

TEST(Recommend, TiesGoToTheSmallestInterval) {
  const std::vector<SamplingOutcome> v = {outcome(2.0, 0.8, 0.6), outcome(0.5, 0.6, 0.8), outcome(1.0, 0.7, 0.7)};
  EXPECT_EQ(cavmon::recommend(v), 0.5);
}

TEST(Recommend, IndependentOfInputOrder) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SamplingOutcome> v;
    for (double k : cavmon::kDefaultIntervalGrid) v.push_back(outcome(k, u(rng), trial % 2 ? 0.5 : u(rng)));
    const double expected = cavmon::recommend(v);
    for (int s = 0; s < 5; ++s) {
      std::shuffle(v.begin(), v.end(), rng);
      EXPECT_EQ(cavmon::recommend(v), expected);
    }
  }
  EXPECT_THROW(cavmon::recommend({}), cavmon::InvalidArgument);
}

TEST(Recommend, CommunicationOnlyPicksTheLargestInterval) {
  const auto raw = sd_series(50.0, 120.0, 40.0, 0.3);
  cavmon::EvaluateOptions opts;
  opts.weights = {1.0, 0.0};
  EXPECT_EQ(cavmon::recommend(cavmon::sweep(raw, cavmon::kDefaultIntervalGrid, opts)), 10.0);
}

TEST(Recommend, ReliabilityOnlyPicksTheSmallestFullyDetectingInterval) {
  const auto raw = sd_series(50.0, 120.0, 40.0, 0.3);
  cavmon::EvaluateOptions opts;
  opts.weights = {0.0, 1.0};
  EXPECT_EQ(cavmon::recommend(cavmon::sweep(raw, cavmon::kDefaultIntervalGrid, opts)), 0.1);
}

TEST(Recommend, EventsLongerThanEveryIntervalFavourTheLargest) {
  const auto raw = sd_series(50.0, 200.0, 100.0, 30.0);
  const auto outcomes = cavmon::sweep(raw, cavmon::kDefaultIntervalGrid);
  for (const auto& o : outcomes) EXPECT_EQ(o.success_ratio, 1.0);
  EXPECT_EQ(cavmon::recommend(outcomes), 10.0);
}

std::map<IndicatorKind, std::vector<SamplingOutcome>> table(std::initializer_list<double> grid,
                                                            std::vector<std::pair<double, double>> cs,
                                                            IndicatorKind kind) {
  std::vector<SamplingOutcome> v;
  std::size_t i = 0;
  for (double k : grid) v.push_back(outcome(k, cs[i].first, cs[i].second)), ++i;
  return {{kind, v}};
}

TEST(RecommendUniform, AveragesAcrossIndicators) {
  auto per = table({0.1, 1.0}, {{0.5, 1.0}, {0.95, 0.2}}, IndicatorKind::SevereDeceleration);
  per.merge(table({0.1, 1.0}, {{0.5, 1.0}, {0.95, 1.0}}, IndicatorKind::LateralPositionVariation));
  // means: 0.1 -> 0.75, 1.0 -> (0.575 + 0.975) / 2 = 0.775
  const auto obj = cavmon::uniform_objective(per, {});
  ASSERT_EQ(obj.size(), 2u);
  EXPECT_NEAR(obj[0].second, 0.75, 1e-12);
  EXPECT_NEAR(obj[1].second, 0.775, 1e-12);
  EXPECT_EQ(cavmon::recommend_uniform(per), 1.0);
  EXPECT_EQ(cavmon::recommend_uniform(per, {0.0, 1.0}), 0.1);
}

TEST(RecommendUniform, SingleIndicatorMatchesRecommend) {
  const auto raw = sd_series(50.0, 120.0, 40.0, 0.3);
  const auto outcomes = cavmon::sweep(raw, cavmon::kDefaultIntervalGrid);
  EXPECT_EQ(cavmon::recommend_uniform({{IndicatorKind::SevereDeceleration, outcomes}}), cavmon::recommend(outcomes));
}

TEST(RecommendUniform, IdenticalTablesMatchRecommend) {
  const auto raw = sd_series(50.0, 120.0, 40.0, 0.3);
  const auto outcomes = cavmon::sweep(raw, cavmon::kDefaultIntervalGrid);
  std::map<IndicatorKind, std::vector<SamplingOutcome>> per;
  for (auto kind : cavmon::kAllIndicators) per[kind] = outcomes;
  EXPECT_EQ(cavmon::recommend_uniform(per), cavmon::recommend(outcomes));
}

TEST(RecommendUniform, MismatchedGridsAreRejected) {
  auto per = table({0.1, 1.0}, {{0.5, 1.0}, {0.9, 1.0}}, IndicatorKind::SevereDeceleration);
  per.merge(table({0.1, 2.0}, {{0.5, 1.0}, {0.9, 1.0}}, IndicatorKind::InverseTimeToCollision));
  EXPECT_THROW(cavmon::recommend_uniform(per), cavmon::InvalidArgument);
  EXPECT_THROW(cavmon::recommend_uniform({}), cavmon::InvalidArgument);
}

TEST(SamplingOutcome, JsonExport) {
  const auto raw = sd_series(20.0, 30.0, 10.0, 0.3);
  const auto j = cavmon::to_json(cavmon::evaluate(raw, 0.05));
  EXPECT_EQ(j["indicator"], "SD");
  EXPECT_EQ(j["success_ratio"], 1.0);
  EXPECT_TRUE(j["missed_error"].is_null());
  EXPECT_EQ(j["detected_delay"]["mode"], 0.0);
}

}  // namespace
