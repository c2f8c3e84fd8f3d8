#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "imchaos/error.hpp"

namespace imchaos::stats {

/// Fixed-order pairwise summation. The split points depend only on the length,
/// so the result is independent of how the values were produced.
template <class T>
T pairwise_sum(std::span<const T> v) {
  constexpr std::size_t kLeaf = 64;
  if (v.size() <= kLeaf) {
    T s{};
    for (const auto& x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

template <class T>
T pairwise_sum(const std::vector<T>& v) {
  return pairwise_sum(std::span<const T>(v));
}

struct MeanSe {
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance
  double se = 0.0;        // standard error of the mean
};

inline MeanSe mean_se(std::span<const double> v) {
  require(!v.empty(), Errc::EmptyEnsemble, "mean of empty sample");
  const double n = static_cast<double>(v.size());
  const double mean = pairwise_sum(v) / n;
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = (v[i] - mean) * (v[i] - mean);
  const double var = v.size() > 1 ? pairwise_sum(std::span<const double>(dev)) / (n - 1.0) : 0.0;
  return {mean, var, std::sqrt(var / n)};
}

inline MeanSe mean_se(const std::vector<double>& v) { return mean_se(std::span<const double>(v)); }

struct Moments4 {
  double mean, variance, skewness, excess_kurtosis;
};

inline Moments4 shape_moments(std::span<const double> v) {
  require(v.size() > 3, Errc::EmptyEnsemble, "need at least 4 values");
  const double n = static_cast<double>(v.size());
  const double mean = pairwise_sum(v) / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = x - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  return {mean, m2, m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

inline constexpr double kZ95 = 1.959963984540054;

/// Wilson score interval for a binomial proportion.
inline Interval wilson(std::uint64_t hits, std::uint64_t trials, double z = kZ95) {
  require(trials > 0, Errc::EmptyEnsemble, "Wilson interval with zero trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  // The bounds are exactly 0 and 1 at the extremes; avoid rounding residue there.
  return {hits == 0 ? 0.0 : std::max(0.0, centre - half), hits == trials ? 1.0 : std::min(1.0, centre + half)};
}

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} e^{-2k^2 lambda^2}.
inline double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the Stephens small-sample correction.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), Errc::EmptyEnsemble, "KS test on empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

inline double median(std::vector<double> v) {
  require(!v.empty(), Errc::EmptyEnsemble, "median of empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace imchaos::stats
