#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "oracle.hpp"
#include "valmod/distance.hpp"
#include "valmod/synth.hpp"

using namespace valmod;

TEST(ZnormDistance, MatchesCorrelationForm) {
  const auto x = oracle::gaussian(64, 1), y = oracle::gaussian(64, 2);
  const double q = oracle::pearson(x, y);
  EXPECT_NEAR(znorm_distance(x, y), std::sqrt(2.0 * 64 * (1.0 - q)), 1e-10);
  EXPECT_EQ(znorm_distance(x, x), 0.0);
}

TEST(ZnormDistance, ScaleAndShiftInvariant) {
  const auto x = oracle::random_walk(40, 5);
  std::vector<double> y(x);
  for (auto &v : y)
    v = 3.5 * v - 12.0;
  EXPECT_NEAR(znorm_distance(x, y), 0.0, 1e-7);
}

TEST(ZnormDistance, Errors) {
  const std::vector<double> a{1, 2, 3}, b{1, 2};
  EXPECT_THROW(znorm_distance(a, b), ParameterError);
  EXPECT_THROW(znorm_distance(std::vector<double>{1}, std::vector<double>{2}),
               ParameterError);
}

TEST(DistanceProfile, MatchesOracle) {
  const auto x = oracle::random_walk(300, 7);
  const SeriesRecord s(x);
  const std::size_t len = 20;
  const auto stats = rolling_stats(s, len);
  for (std::size_t q : {0u, 57u, 140u, 280u}) {
    const auto dp = distance_profile(s, stats, {q, len}, 10);
    const auto ref = oracle::profile(x, q, len, 10);
    ASSERT_EQ(dp.distances.size(), ref.size());
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (std::isinf(ref[j]))
        EXPECT_TRUE(std::isinf(dp.distances[j])) << j;
      else
        EXPECT_NEAR(dp.distances[j], ref[j], 1e-8) << j;
    }
  }
}

TEST(DistanceProfile, ProfilerSweepAgreesWithSingleShots) {
  const auto x = oracle::random_walk(400, 8);
  const SeriesRecord s(x);
  DistanceProfiler prof(s, 24);
  for (std::size_t q = 0; q < prof.count(); q += 37) {
    const auto dp = prof.profile(q);
    const auto ref = oracle::profile(x, q, 24, 12);
    for (std::size_t j = 0; j < ref.size(); ++j)
      if (std::isfinite(ref[j]))
        EXPECT_NEAR(dp.distances[j], ref[j], 1e-8);
  }
  EXPECT_THROW(prof.profile(prof.count()), ParameterError);
  EXPECT_THROW(DistanceProfiler(s, 1), ParameterError);
}

TEST(DistanceProfile, RejectsMismatchedStats) {
  const SeriesRecord s(oracle::random_walk(100, 2));
  const auto stats = rolling_stats(s, 10);
  EXPECT_THROW(distance_profile(s, stats, {0, 12}, 6), ParameterError);
  EXPECT_THROW(distance_profile(s, stats, {95, 10}, 6), ParameterError);
  EXPECT_THROW(distance_profile(s, stats, {0, 10}, 0), ParameterError);
}

TEST(MatrixProfile, MatchesOracle) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto x = oracle::random_walk(200 + 40 * seed, seed);
    const std::size_t len = 6 + 3 * seed;
    const auto mp = matrix_profile(SeriesRecord(x), len);
    const auto ref = oracle::matrix_profile(x, len, oracle::default_radius(len));
    ASSERT_EQ(mp.size(), ref.mp.size());
    for (std::size_t i = 0; i < mp.size(); ++i) {
      EXPECT_EQ(mp.ip[i], ref.ip[i]) << "seed " << seed << " i " << i;
      EXPECT_NEAR(mp.mp[i], ref.mp[i], 1e-8);
    }
  }
}

TEST(MatrixProfile, ExclusionOverride) {
  const auto x = oracle::random_walk(256, 11);
  DistanceOptions o;
  o.exclusion.radius = 3;
  const auto mp = matrix_profile(SeriesRecord(x), 16, o);
  const auto ref = oracle::matrix_profile(x, 16, 3);
  EXPECT_EQ(mp.exclusion, 3u);
  for (std::size_t i = 0; i < mp.size(); ++i) {
    EXPECT_EQ(mp.ip[i], ref.ip[i]);
    EXPECT_NEAR(mp.mp[i], ref.mp[i], 1e-8);
  }
}

TEST(MatrixProfile, ConstantWindowsExcluded) {
  auto x = oracle::random_walk(240, 12);
  for (std::size_t t = 100; t < 130; ++t)
    x[t] = 2.0;
  const auto mp = matrix_profile(SeriesRecord(x), 10);
  const auto ref = oracle::matrix_profile(x, 10, 5);
  for (std::size_t i = 0; i < mp.size(); ++i) {
    EXPECT_EQ(mp.ip[i], ref.ip[i]) << i;
    if (ref.ip[i] < 0)
      EXPECT_TRUE(std::isinf(mp.mp[i]));
    else
      EXPECT_NEAR(mp.mp[i], ref.mp[i], 1e-8);
  }
}

TEST(MatrixProfile, ConstantWindowsIncludedWhenAsked) {
  std::vector<double> x = oracle::random_walk(120, 13);
  for (std::size_t t = 10; t < 20; ++t)
    x[t] = 1.0;
  for (std::size_t t = 60; t < 70; ++t)
    x[t] = -4.0;
  DistanceOptions o;
  o.exclude_degenerate = false;
  const auto mp = matrix_profile(SeriesRecord(x), 8, o);
  // Two constant windows count as identical.
  EXPECT_EQ(mp.mp[10], 0.0);
  EXPECT_GE(mp.ip[10], 60);
  EXPECT_LE(mp.ip[10], 62);
}

TEST(MatrixProfile, PlantedIdentity) {
  SynthSpec spec;
  spec.length = 2048;
  spec.plant_length = 64;
  spec.seed = 21;
  const auto syn = synthesize(spec);
  const auto mp = matrix_profile(syn.series, 64);
  const auto a = syn.offsets[0], b = syn.offsets[1];
  EXPECT_LT(mp.mp[a], 1e-9);
  EXPECT_LT(mp.mp[b], 1e-9);
  EXPECT_EQ(mp.ip[a], static_cast<std::int64_t>(b));
  const auto top = topk_pairs(mp, 1);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].left, a);
  EXPECT_EQ(top[0].right, b);
}

TEST(MatrixProfile, LengthLimits) {
  const SeriesRecord s(oracle::random_walk(100, 1));
  EXPECT_THROW(matrix_profile(s, 51), ParameterError);
  EXPECT_THROW(matrix_profile(s, 1), ParameterError);
  EXPECT_NO_THROW(matrix_profile(s, 50));
  DistanceOptions o;
  o.exclusion.radius = 0;
  EXPECT_THROW(matrix_profile(s, 10, o), ParameterError);
}

TEST(MatrixProfile, WorkerCountDoesNotChangeBits) {
  const SeriesRecord s(oracle::random_walk(5000, 31));
  DistanceOptions one, four;
  one.workers = 1;
  four.workers = 4;
  const auto a = matrix_profile(s, 40, one);
  const auto b = matrix_profile(s, 40, four);
  EXPECT_EQ(a.ip, b.ip);
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_EQ(std::memcmp(&a.mp[i], &b.mp[i], sizeof(double)), 0);
}

TEST(TopK, DeduplicatesAndOrders) {
  const auto x = oracle::random_walk(400, 41);
  const auto mp = matrix_profile(SeriesRecord(x), 16);
  const auto top = topk_pairs(mp, 5);
  const auto ref = oracle::topk(oracle::matrix_profile(x, 16, 8), 16, 5);
  ASSERT_EQ(top.size(), ref.size());
  for (std::size_t t = 0; t < top.size(); ++t) {
    EXPECT_EQ(top[t].left, ref[t].left);
    EXPECT_EQ(top[t].right, ref[t].right);
    EXPECT_NEAR(top[t].distance, ref[t].distance, 1e-8);
    EXPECT_LT(top[t].left, top[t].right);
  }
  EXPECT_THROW(topk_pairs(mp, 0), ParameterError);
}
