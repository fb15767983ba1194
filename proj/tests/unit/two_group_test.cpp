#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "medsim/analytics/two_group.hpp"

using namespace medsim::analytics;

TEST(WelchT, OsceSummaryStatistics) {
  const SummaryStats pre{82.8, 7.6, 100}, post{88.8, 8.5, 100};
  const auto t = welch_t(pre, post);
  // se = sqrt(0.5776 + 0.7225); df by Satterthwaite, hand-evaluated.
  const double se = std::sqrt(0.5776 + 0.7225);
  EXPECT_NEAR(t.statistic, -6.0 / se, 1e-12);
  EXPECT_NEAR(t.statistic, -5.2621, 1e-4);
  const double df = std::pow(1.3001, 2) / ((0.5776 * 0.5776 + 0.7225 * 0.7225) / 99.0);
  ASSERT_TRUE(t.df.has_value());
  EXPECT_NEAR(*t.df, df, 1e-9);
  EXPECT_NEAR(*t.df, 195.57, 0.01);
  EXPECT_LT(t.p_value, 0.001);
  EXPECT_GT(t.p_value, 0.0);
  const auto d = cohens_d(pre, post);
  EXPECT_NEAR(d.d, 6.0 / std::sqrt((57.76 + 72.25) / 2.0), 1e-12);
  EXPECT_NEAR(d.d, 0.745, 0.001);
}

TEST(WelchT, IdenticalGroups) {
  const SummaryStats a{50.0, 10.0, 30};
  const auto t = welch_t(a, a);
  EXPECT_EQ(t.statistic, 0.0);
  EXPECT_NEAR(t.p_value, 1.0, 1e-15);
  EXPECT_EQ(cohens_d(a, a).d, 0.0);
}

TEST(WelchT, DegenerateZeroVariance) {
  const auto same = welch_t({5.0, 0.0, 4}, {5.0, 0.0, 4});
  EXPECT_EQ(same.p_value, 1.0);
  EXPECT_EQ(same.note, "zero_variance");
  const auto differ = welch_t({5.0, 0.0, 4}, {6.0, 0.0, 4});
  EXPECT_EQ(differ.p_value, 0.0);
  EXPECT_EQ(differ.note, "zero_variance");
  EXPECT_TRUE(std::isinf(differ.statistic));
}

TEST(WelchT, Preconditions) {
  EXPECT_THROW(welch_t({1, 1, 1}, {1, 1, 5}), medsim::Error);
  EXPECT_THROW(welch_t({1, -1, 3}, {1, 1, 5}), medsim::Error);
}

TEST(WelchT, SymmetryProperty) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mean(0, 100), sd(0.1, 20);
  std::uniform_int_distribution<std::size_t> n(2, 200);
  for (int i = 0; i < 500; ++i) {
    SummaryStats a{mean(rng), sd(rng), n(rng)}, b{mean(rng), sd(rng), n(rng)};
    const auto ab = welch_t(a, b), ba = welch_t(b, a);
    EXPECT_NEAR(ab.p_value, ba.p_value, 1e-12);
    EXPECT_NEAR(ab.statistic, -ba.statistic, 1e-12);
    EXPECT_GE(ab.p_value, 0.0);
    EXPECT_LE(ab.p_value, 1.0);
    const auto d_ab = cohens_d(a, b).d, d_ba = cohens_d(b, a).d;
    EXPECT_NEAR(d_ab, -d_ba, 1e-12);
    EXPECT_EQ(std::signbit(d_ab), std::signbit(b.mean - a.mean));
  }
}

TEST(WelchT, RawDataSummaries) {
  const std::vector<double> xs{1, 2, 3, 4, 5};
  const auto s = summarize(xs);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_NEAR(s.sd, std::sqrt(2.5), 1e-15);
  EXPECT_EQ(s.n, 5u);
}
