#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lidd/divergence.hpp"
#include "oracles.hpp"

using namespace lidd;

namespace {

std::vector<ClusterSensorMap> clusters(const std::vector<SimilarityMap>& maps) {
  std::vector<ClusterSensorMap> out;
  for (std::size_t k = 0; k < maps.size(); ++k) out.push_back({static_cast<int>(k), 1, maps[k]});
  return out;
}

}  // namespace

TEST(PairDivergence, IdenticalMapsAllZero) {
  std::mt19937_64 rng(1);
  const auto m = testutil::random_map(6, rng);
  const auto r = divergence_report(clusters({m, m, m}), 0.15);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(r.pair_scores(a, b, i), 0.0);
  for (const auto v : r.aggregate.values()) EXPECT_EQ(v, 0.0);
  for (const auto f : r.flags.values()) EXPECT_EQ(f, 0);
}

TEST(PairDivergence, TwoSensorExample) {
  const auto psi = pairwise_divergence(clusters(
      {testutil::map_from({{1, 0.5}, {0.5, 1}}), testutil::map_from({{1, -0.5}, {-0.5, 1}})}));
  EXPECT_DOUBLE_EQ(psi(0, 1, 0), 0.5);
  EXPECT_DOUBLE_EQ(psi(0, 1, 1), 0.5);
}

TEST(PairDivergence, PerturbedSensorDominates) {
  // Four sensors; the second map differs only in row/column 2.
  const auto a = testutil::map_from({{1, 0.6, 0.5, 0.4}, {0.6, 1, 0.3, 0.2}, {0.5, 0.3, 1, 0.7}, {0.4, 0.2, 0.7, 1}});
  auto b = a;
  for (std::size_t j = 0; j < 4; ++j)
    if (j != 2) b.scores(2, j) = b.scores(j, 2) = -a.scores(2, j);
  const auto psi = pairwise_divergence(clusters({a, b}));
  EXPECT_NEAR(psi(0, 1, 2), std::sqrt(4 * (0.25 + 0.09 + 0.49)) / 4.0, 1e-15);
  EXPECT_NEAR(psi(0, 1, 0), 2 * 0.5 / 4.0, 1e-15);
  EXPECT_NEAR(psi(0, 1, 1), 2 * 0.3 / 4.0, 1e-15);
  EXPECT_NEAR(psi(0, 1, 3), 2 * 0.7 / 4.0, 1e-15);
  for (const std::size_t i : {0, 1, 3}) EXPECT_LT(psi(0, 1, i), psi(0, 1, 2));
}

TEST(PairDivergence, SymmetricNonNegativeZeroSelf) {
  std::mt19937_64 rng(2);
  std::vector<SimilarityMap> maps;
  for (int k = 0; k < 5; ++k) maps.push_back(testutil::random_map(7, rng));
  const auto psi = pairwise_divergence(clusters(maps));
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = 0; b < 5; ++b)
      for (std::size_t i = 0; i < 7; ++i) {
        EXPECT_EQ(psi(a, b, i), psi(b, a, i));
        EXPECT_GE(psi(a, b, i), 0.0);
        if (a == b) { EXPECT_EQ(psi(a, b, i), 0.0); }
      }
}

TEST(PairDivergence, ScalesLinearly) {
  std::mt19937_64 rng(3);
  const auto base = testutil::random_map(6, rng);
  std::vector<SimilarityMap> maps{base, testutil::random_map(6, rng), testutil::random_map(6, rng)};
  const auto psi = pairwise_divergence(clusters(maps));
  const auto agg = aggregate_divergence(psi);
  for (const double c : {0.5, 0.3}) {
    auto scaled = maps;
    for (auto& m : scaled)
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) m.scores(i, j) = base.scores(i, j) + c * (m.scores(i, j) - base.scores(i, j));
    const auto ps = pairwise_divergence(clusters(scaled));
    const auto as = aggregate_divergence(ps);
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t b = 0; b < 3; ++b) EXPECT_NEAR(ps(a, b, i), c * psi(a, b, i), 1e-14);
        EXPECT_NEAR(as(a, i), c * agg(a, i), 1e-14);
      }
  }
}

TEST(PairDivergence, SensorMismatchIsContractViolation) {
  const auto a = testutil::map_from({{1, 0.5}, {0.5, 1}}, {"x", "y"});
  const auto b = testutil::map_from({{1, 0.5}, {0.5, 1}}, {"y", "x"});
  EXPECT_THROW(pairwise_divergence(clusters({a, b})), ContractViolation);
}

TEST(Aggregate, TwoClustersEqualPairScore) {
  std::mt19937_64 rng(4);
  const auto psi = pairwise_divergence(clusters({testutil::random_map(5, rng), testutil::random_map(5, rng)}));
  const auto agg = aggregate_divergence(psi);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(agg(0, i), psi(0, 1, i));
    EXPECT_EQ(agg(1, i), psi(1, 0, i));
  }
}

TEST(Aggregate, SumOverClusters) {
  PairScores psi(3, 1);
  psi(0, 1, 0) = psi(1, 0, 0) = 0.1;
  psi(0, 2, 0) = psi(2, 0, 0) = 0.3;
  EXPECT_NEAR(aggregate_divergence(psi)(0, 0), 0.4, 1e-15);
}

TEST(Flags, StrictThreshold) {
  Matrix<double> agg(1, 2, 0.0);
  agg(0, 0) = 0.16;
  agg(0, 1) = 0.15;
  const auto f = flag_root_causes(agg, 0.15);
  EXPECT_EQ(f(0, 0), 1);
  EXPECT_EQ(f(0, 1), 0);
  EXPECT_THROW(flag_root_causes(agg, -1.0), ContractViolation);
}

TEST(Flags, MonotoneInThreshold) {
  std::mt19937_64 rng(5);
  std::vector<SimilarityMap> maps;
  for (int k = 0; k < 4; ++k) maps.push_back(testutil::random_map(8, rng));
  const auto agg = aggregate_divergence(pairwise_divergence(clusters(maps)));
  auto prev = flag_root_causes(agg, 0.0);
  for (double t = 0.05; t < 2.0; t += 0.05) {
    const auto f = flag_root_causes(agg, t);
    for (std::size_t k = 0; k < f.values().size(); ++k)
      if (f.values()[k]) { EXPECT_TRUE(prev.values()[k]); }
    prev = f;
  }
}

TEST(Report, SingleClusterIsAllZero) {
  std::mt19937_64 rng(6);
  const auto r = divergence_report(clusters({testutil::random_map(3, rng)}), 0.15);
  EXPECT_EQ(r.cluster_labels, std::vector<int>{0});
  for (const auto v : r.aggregate.values()) EXPECT_EQ(v, 0.0);
}
