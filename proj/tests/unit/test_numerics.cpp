#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "imchaos/grid.hpp"
#include "imchaos/quadrature.hpp"
#include "imchaos/rng.hpp"
#include "imchaos/stats.hpp"

using namespace imchaos;

// Known-answer vectors from the Random123 distribution.
TEST(Philox, KnownAnswerZero) {
  const auto out = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
  const auto out = Philox4x32::generate({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(NormalStream, SequentialMatchesRandomAccess) {
  NormalStream a(42, 3);
  const NormalStream b(42, 3);
  for (std::uint64_t i = 0; i < 17; ++i) EXPECT_EQ(a(), b.at(i));
  EXPECT_EQ(a.position(), 17u);
}

TEST(NormalStream, StreamsDiffer) {
  NormalStream a(1, 0), b(1, 1), c(2, 0);
  const double x = a();
  EXPECT_NE(x, b());
  EXPECT_NE(x, c());
}

TEST(NormalStream, LooksStandardNormal) {
  NormalStream rng(11, 0);
  std::vector<double> v(200000);
  for (auto& x : v) x = rng();
  const auto m = stats::shape_moments(v);
  EXPECT_NEAR(m.mean, 0.0, 0.01);
  EXPECT_NEAR(m.variance, 1.0, 0.01);
  EXPECT_LE(std::abs(m.skewness), 0.03);
  EXPECT_LE(std::abs(m.excess_kurtosis), 0.05);
}

TEST(Stats, PairwiseSumIsExactOnIntegers) {
  std::vector<double> v(10000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  EXPECT_EQ(stats::pairwise_sum(v), 49995000.0);
}

TEST(Stats, WilsonAtExtremes) {
  const auto none = stats::wilson(0, 100);
  EXPECT_EQ(none.lo, 0.0);
  EXPECT_GT(none.hi, 0.0);
  const auto all = stats::wilson(100, 100);
  EXPECT_EQ(all.hi, 1.0);
  EXPECT_LT(all.lo, 1.0);
  const auto half = stats::wilson(50, 100);
  EXPECT_LT(half.lo, 0.5);
  EXPECT_GT(half.hi, 0.5);
  EXPECT_THROW(stats::wilson(0, 0), Error);
}

TEST(Stats, KsSeparatesShiftedSamples) {
  NormalStream rng(5, 0);
  std::vector<double> a(5000), b(5000), c(5000);
  for (auto& x : a) x = rng();
  for (auto& x : b) x = rng();
  for (auto& x : c) x = rng() + 0.5;
  EXPECT_GT(stats::ks_two_sample(a, b).p_value, 0.001);
  EXPECT_LT(stats::ks_two_sample(a, c).p_value, 1e-6);
}

TEST(Stats, Median) {
  EXPECT_EQ(stats::median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(stats::median({4.0, 1.0, 2.0, 3.0}), 2.5);
}

TEST(Quadrature, AdaptiveSimpsonPolynomial) {
  EXPECT_NEAR(quad::adaptive_simpson([](double x) { return x * x * x; }, 0.0, 2.0), 4.0, 1e-12);
}

TEST(Quadrature, GaussKronrodEndpointSingularity) {
  const auto r = quad::gauss_kronrod([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, 1e-12, 1e-12);
  EXPECT_NEAR(r.value, 2.0, 1e-9);
}

TEST(Quadrature, CumulativeTrapezoid) {
  std::vector<double> v(101);
  const double h = 0.01;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 2.0 * i * h;
  const auto c = quad::cumulative(v, h);
  EXPECT_NEAR(c.back(), 1.0, 1e-12);
  EXPECT_EQ(c.front(), 0.0);
}

TEST(Grid, SimpsonWeightsIntegrateCubics) {
  for (std::size_t n : {5u, 6u, 33u, 64u}) {
    const auto g = Grid::interval(n, -1.0, 2.0);
    const auto w = g.simpson_weights();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = g.point(i)[0];
      s += w[i] * x * x * x;
    }
    EXPECT_NEAR(s, (16.0 - 1.0) / 4.0, 1e-12) << n;
  }
}

TEST(Grid, CircleTrapezoidIsExactForTrigPolynomials) {
  const auto g = Grid::circle(64);
  const auto w = g.simpson_weights();
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += w[i] * std::pow(std::cos(g.point(i)[0]), 2);
  EXPECT_NEAR(s, std::numbers::pi, 1e-13);
}

TEST(Grid, FlattenRoundTrip) {
  const auto g = Grid::box({3, 4, 5}, {0, 0, 0}, {1, 1, 1});
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.flatten(g.unflatten(i)), i);
  EXPECT_THROW(Grid::box({1}, {0}, {1}), Error);
}
