#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "imchaos/error.hpp"

namespace imchaos {

/// J_n(x) for 0 <= n <= 8, |x| <= 50: power series up to |x| = 12, beyond that
/// the integral (1/pi) int_0^pi cos(n t - x sin t) dt by the 256-interval
/// trapezoid rule (spectrally accurate, the integrand being even and periodic).
inline double bessel_j(int n, double x) {
  if (n < 0 || n > 8) throw Error(Errc::OrderOutOfRange, "Bessel order must lie in 0..8");
  if (!(std::abs(x) <= 50.0)) throw Error(Errc::ArgumentOutOfRange, "Bessel argument must satisfy |x| <= 50");
  if (std::abs(x) <= 12.0) {
    const double half = 0.5 * x;
    double term = 1.0;
    for (int k = 1; k <= n; ++k) term *= half / k;
    double sum = term;
    const double q = -half * half;
    for (int m = 1; m < 200; ++m) {
      term *= q / (static_cast<double>(m) * static_cast<double>(m + n));
      sum += term;
      if (std::abs(term) <= 1e-16 * std::abs(sum)) break;
    }
    return sum;
  }
  constexpr int kIntervals = 256;
  const double h = std::numbers::pi / kIntervals;
  double sum = 0.5 * (std::cos(0.0) + std::cos(n * std::numbers::pi));
  for (int k = 1; k < kIntervals; ++k) {
    const double t = k * h;
    sum += std::cos(n * t - x * std::sin(t));
  }
  return sum * h / std::numbers::pi;
}

/// Smallest positive zero of J_0, by bisection on [2, 3].
inline double bessel_j0_root() {
  double lo = 2.0, hi = 3.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = bessel_j(0, mid);
    if (std::abs(v) <= 1e-16 || hi - lo <= 4e-16) return mid;
    if (v > 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline constexpr int kCircleMapNodes = 1024;

/// F(s1,s2) = int_0^{2pi} e^{i(s1 sin t + s2 cos 2t)} dt.
inline std::complex<double> circle_map_F(double s1, double s2) {
  const double h = 2.0 * std::numbers::pi / kCircleMapNodes;
  std::complex<double> acc{};
  for (int k = 0; k < kCircleMapNodes; ++k) {
    const double t = k * h;
    acc += std::polar(1.0, s1 * std::sin(t) + s2 * std::cos(2.0 * t));
  }
  return acc * h;
}

/// Real 2x2 matrix [Re d1F, Re d2F; Im d1F, Im d2F].
struct Jacobian2 {
  std::array<std::array<double, 2>, 2> m{};

  double det() const { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }
  std::complex<double> column(int j) const { return {m[0][static_cast<std::size_t>(j)], m[1][static_cast<std::size_t>(j)]}; }

  static Jacobian2 from_columns(std::complex<double> d1, std::complex<double> d2) {
    return {{{{d1.real(), d2.real()}, {d1.imag(), d2.imag()}}}};
  }
};

/// d1F = i int sin t e^{i(...)} dt, d2F = i int cos 2t e^{i(...)} dt.
inline Jacobian2 circle_map_jacobian(double s1, double s2) {
  const double h = 2.0 * std::numbers::pi / kCircleMapNodes;
  std::complex<double> d1{}, d2{};
  for (int k = 0; k < kCircleMapNodes; ++k) {
    const double t = k * h;
    const auto e = std::polar(1.0, s1 * std::sin(t) + s2 * std::cos(2.0 * t));
    d1 += std::sin(t) * e;
    d2 += std::cos(2.0 * t) * e;
  }
  const std::complex<double> i{0.0, 1.0};
  return Jacobian2::from_columns(i * d1 * h, i * d2 * h);
}

/// Central differences of F with the given step.
inline Jacobian2 circle_map_jacobian_fd(double s1, double s2, double step = 1e-5) {
  const auto d1 = (circle_map_F(s1 + step, s2) - circle_map_F(s1 - step, s2)) / (2.0 * step);
  const auto d2 = (circle_map_F(s1, s2 + step) - circle_map_F(s1, s2 - step)) / (2.0 * step);
  return Jacobian2::from_columns(d1, d2);
}

struct InversionResult {
  double s1 = 0.0, s2 = 0.0;
  int iterations = 0;
  double parameter_error = 0.0;  // size of the last Newton correction
  double residual = 0.0;         // |F(s) - z|
  bool converged = false;
};

/// Newton iteration for F(s) = z from (s1, s2), with step halving while the
/// residual fails to decrease.
inline InversionResult invert_circle_map(std::complex<double> z, double s1, double s2, double tol = 1e-12,
                                         int max_iterations = 60) {
  InversionResult out;
  auto r = circle_map_F(s1, s2) - z;
  for (int it = 1; it <= max_iterations; ++it) {
    const auto j = circle_map_jacobian(s1, s2);
    const double det = j.det();
    if (det == 0.0) break;
    const double x1 = (-r.real() * j.m[1][1] + r.imag() * j.m[0][1]) / det;
    const double x2 = (-j.m[0][0] * r.imag() + j.m[1][0] * r.real()) / det;
    double t = 1.0;
    auto rn = circle_map_F(s1 + x1, s2 + x2) - z;
    for (int k = 0; k < 30 && std::abs(rn) > std::abs(r) && std::abs(r) > 1e-15; ++k) {
      t *= 0.5;
      rn = circle_map_F(s1 + t * x1, s2 + t * x2) - z;
    }
    s1 += t * x1;
    s2 += t * x2;
    r = rn;
    out.iterations = it;
    out.parameter_error = t * std::hypot(x1, x2);
    if (out.parameter_error <= tol) {
      out.converged = true;
      break;
    }
  }
  // Size of one more correction, an estimate of the distance to the root.
  const auto j = circle_map_jacobian(s1, s2);
  const double det = j.det();
  if (det != 0.0) {
    const double x1 = (-r.real() * j.m[1][1] + r.imag() * j.m[0][1]) / det;
    const double x2 = (-j.m[0][0] * r.imag() + j.m[1][0] * r.real()) / det;
    out.parameter_error = std::hypot(x1, x2);
  }
  out.s1 = s1;
  out.s2 = s2;
  out.residual = std::abs(r);
  return out;
}

/// n-th element (1-based) of the circle basis ordered as h1 = sin t,
/// h2 = cos 2t / sqrt 2, h3 = cos t, h4 = sin 2t / sqrt 2, then for k >= 3
/// sin kt / sqrt k followed by cos kt / sqrt k.
inline double circle_basis(int n, double t) {
  switch (n) {
    case 1: return std::sin(t);
    case 2: return std::cos(2.0 * t) / std::numbers::sqrt2;
    case 3: return std::cos(t);
    case 4: return std::sin(2.0 * t) / std::numbers::sqrt2;
    default: break;
  }
  const int k = 3 + (n - 5) / 2;
  const double s = 1.0 / std::sqrt(static_cast<double>(k));
  return (n - 5) % 2 == 0 ? s * std::sin(k * t) : s * std::cos(k * t);
}

struct Phi0Result {
  std::complex<double> value;
  double K = 0.0;
};

/// phi0(s) = int e^{(beta^2/2) sum_{n<=n0} h_n^2} e^{i beta (s1 h1 + s2 h2)} and
/// K = (1/2pi) int e^{(beta^2/2) sum_{n<=n0} h_n^2}, by the periodic trapezoid rule.
class Phi0Map {
 public:
  Phi0Map(int n0, double beta, int nodes = 0) : n0_(n0), beta_(beta) {
    require(n0 >= 2, Errc::InvalidArgument, "n0 must be >= 2");
    require(beta >= 0.0 && beta < 1.0, Errc::InvalidArgument, "beta must lie in [0, 1)");
    nodes_ = nodes > 0 ? nodes : std::max(kCircleMapNodes, 16 * n0);
    const double h = 2.0 * std::numbers::pi / nodes_;
    weight_.resize(static_cast<std::size_t>(nodes_));
    h1_.resize(weight_.size());
    h2_.resize(weight_.size());
    double mass = 0.0;
    for (int k = 0; k < nodes_; ++k) {
      const double t = k * h;
      double s = 0.0;
      for (int n = 1; n <= n0; ++n) {
        const double v = circle_basis(n, t);
        s += v * v;
      }
      const auto uk = static_cast<std::size_t>(k);
      weight_[uk] = std::exp(0.5 * beta * beta * s) * h;
      h1_[uk] = circle_basis(1, t);
      h2_[uk] = circle_basis(2, t);
      mass += weight_[uk];
    }
    K_ = mass / (2.0 * std::numbers::pi);
  }

  double K() const noexcept { return K_; }

  std::complex<double> operator()(double s1, double s2) const {
    std::complex<double> acc{};
    for (std::size_t k = 0; k < weight_.size(); ++k)
      acc += weight_[k] * std::polar(1.0, beta_ * (s1 * h1_[k] + s2 * h2_[k]));
    return acc;
  }

  /// sup over a polar probe grid of |s| <= radius of |phi0(s) - K F(beta s1, beta s2/sqrt 2)| / K.
  double discrepancy(double radius = 3.0, int rings = 12, int spokes = 32) const {
    double worst = std::abs((*this)(0.0, 0.0) - K_ * circle_map_F(0.0, 0.0)) / K_;
    for (int r = 1; r <= rings; ++r) {
      const double rho = radius * r / rings;
      for (int a = 0; a < spokes; ++a) {
        const double ang = 2.0 * std::numbers::pi * a / spokes;
        const double s1 = rho * std::cos(ang), s2 = rho * std::sin(ang);
        const auto ref = K_ * circle_map_F(beta_ * s1, beta_ * s2 / std::numbers::sqrt2);
        worst = std::max(worst, std::abs((*this)(s1, s2) - ref) / K_);
      }
    }
    return worst;
  }

 private:
  int n0_;
  double beta_;
  int nodes_ = 0;
  double K_ = 0.0;
  std::vector<double> weight_, h1_, h2_;
};

inline Phi0Result phi0_map(double s1, double s2, int n0, double beta) {
  const Phi0Map map(n0, beta);
  return {map(s1, s2), map.K()};
}

}  // namespace imchaos
