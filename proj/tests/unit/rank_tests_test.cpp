#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "medsim/analytics/rank_tests.hpp"
#include "support/rank_oracle.hpp"

using namespace medsim::analytics;
using Groups = std::vector<std::vector<double>>;

TEST(KruskalWallis, SeparatedGroups) {
  const Groups g{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  const auto r = kruskal_wallis(g);
  // 12/(9*10) * (6^2 + 15^2 + 24^2)/3 - 3*10 = 7.2
  EXPECT_NEAR(r.statistic, 7.2, 1e-12);
  EXPECT_NEAR(r.statistic, medsim::testing::brute_kruskal_h(g), 1e-12);
  EXPECT_EQ(*r.df, 2.0);
  EXPECT_NEAR(r.p_value, std::exp(-3.6), 1e-12);  // chi-square(2) tail
}

TEST(KruskalWallis, TieCorrectionByHand) {
  // Ranks: A = {1, 3, 3}, B = {3, 5.5, 5.5}; uncorrected H = 7/3,
  // tie factor 1 - (24 + 6)/210 = 6/7, corrected H = 49/18.
  const Groups g{{1, 2, 2}, {2, 3, 3}};
  EXPECT_NEAR(kruskal_wallis(g).statistic, 49.0 / 18.0, 1e-12);
}

TEST(KruskalWallis, IdenticalGroupsAndValues) {
  const Groups same{{1, 2, 3}, {1, 2, 3}, {1, 2, 3}};
  EXPECT_NEAR(kruskal_wallis(same).statistic, 0.0, 1e-12);
  const Groups constant{{4, 4}, {4, 4, 4}};
  const auto r = kruskal_wallis(constant);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
}

TEST(KruskalWallis, Preconditions) {
  EXPECT_THROW(kruskal_wallis(Groups{{1, 2, 3}}), medsim::Error);
  EXPECT_THROW(kruskal_wallis(Groups{{1}, {}}), medsim::Error);
  EXPECT_THROW(kruskal_wallis(Groups{{1}, {2}}), medsim::Error);
}

TEST(KruskalWallis, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> v(0, 6), size(1, 6);
  for (int trial = 0; trial < 300; ++trial) {
    Groups g(3);
    for (auto& grp : g) {
      const int n = size(rng);
      for (int i = 0; i < n; ++i) grp.push_back(v(rng));
    }
    Groups t = g;
    for (auto& grp : t)
      for (auto& x : grp) x = std::exp(0.3 * x) + 5.0;
    EXPECT_NEAR(kruskal_wallis(g).statistic, kruskal_wallis(t).statistic, 1e-9);
  }
}

TEST(Dunn, TwoGroupZSquaredEqualsH) {
  const Groups g{{1, 2, 2, 7}, {2, 3, 3, 9, 10}};
  const auto h = kruskal_wallis(g).statistic;
  const auto d = dunn_posthoc(g);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NEAR(d[0].test.statistic * d[0].test.statistic, h, 1e-12);
  EXPECT_NEAR(d[0].test.p_value, kruskal_wallis(g).p_value, 1e-12);
}

TEST(Dunn, IdenticalGroupsGiveUnitP) {
  const Groups g{{1, 2, 3}, {1, 2, 3}, {1, 2, 3}};
  for (auto adj : {PAdjust::none, PAdjust::bonferroni, PAdjust::holm})
    for (const auto& pr : dunn_posthoc(g, adj)) {
      EXPECT_NEAR(pr.test.p_value, 1.0, 1e-12);
      EXPECT_NEAR(pr.p_adjusted, 1.0, 1e-12);
    }
}

TEST(Dunn, AdjustmentsAreMonotone) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    Groups g(4);
    for (std::size_t k = 0; k < g.size(); ++k)
      for (int i = 0; i < 8; ++i) g[k].push_back(noise(rng) + 0.4 * static_cast<double>(k));
    const auto none = dunn_posthoc(g, PAdjust::none);
    const auto holm = dunn_posthoc(g, PAdjust::holm);
    const auto bonf = dunn_posthoc(g, PAdjust::bonferroni);
    for (std::size_t i = 0; i < none.size(); ++i) {
      EXPECT_GE(holm[i].p_adjusted, none[i].p_adjusted);
      EXPECT_GE(bonf[i].p_adjusted, holm[i].p_adjusted - 1e-15);
      EXPECT_LE(bonf[i].p_adjusted, 1.0);
    }
  }
}

TEST(Dunn, HolmByHand) {
  const auto adj = adjust_p_values({0.01, 0.04, 0.03}, PAdjust::holm);
  EXPECT_NEAR(adj[0], 0.03, 1e-15);
  EXPECT_NEAR(adj[2], 0.06, 1e-15);
  EXPECT_NEAR(adj[1], 0.06, 1e-15);  // step-down maximum carries forward
}

TEST(KruskalWallis, RandomSmallInstancesMatchBruteForce) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> k_dist(2, 4), value(0, 5);
  for (int trial = 0; trial < 2000; ++trial) {
    const int k = k_dist(rng);
    std::uniform_int_distribution<int> total_dist(std::max(3, k), 10);
    const int total = total_dist(rng);
    Groups g(k);
    for (int i = 0; i < k; ++i) g[i].push_back(value(rng));
    std::uniform_int_distribution<int> pick(0, k - 1);
    for (int i = k; i < total; ++i) g[pick(rng)].push_back(value(rng));
    EXPECT_NEAR(kruskal_wallis(g).statistic, medsim::testing::brute_kruskal_h(g), 1e-9);
  }
}
