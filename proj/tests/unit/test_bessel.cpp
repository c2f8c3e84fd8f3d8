#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "imchaos/bessel.hpp"
#include "imchaos/rng.hpp"

using namespace imchaos;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::IoError;
}

}  // namespace

TEST(Bessel, ValuesAtZero) {
  EXPECT_EQ(bessel_j(0, 0.0), 1.0);
  for (int n = 1; n <= 8; ++n) EXPECT_EQ(bessel_j(n, 0.0), 0.0);
}

TEST(Bessel, NearFirstRoot) { EXPECT_LE(std::abs(bessel_j(0, 2.404826)), 1e-6); }

TEST(Bessel, AgreesWithLibstdcxx) {
  for (int n = 0; n <= 8; ++n) {
    for (double x = -50.0; x <= 50.0; x += 0.37) {
      // std::cyl_bessel_j takes x >= 0; J_n(-x) = (-1)^n J_n(x).
      const double ref = (x < 0 && n % 2 == 1 ? -1.0 : 1.0) * std::cyl_bessel_j(double(n), std::abs(x));
      EXPECT_NEAR(bessel_j(n, x), ref, 1e-12) << "n=" << n << " x=" << x;
      EXPECT_LE(std::abs(bessel_j(n, x)), 1.0);
    }
  }
}

TEST(Bessel, Errors) {
  EXPECT_EQ(code_of([] { bessel_j(9, 1.0); }), Errc::OrderOutOfRange);
  EXPECT_EQ(code_of([] { bessel_j(-1, 1.0); }), Errc::OrderOutOfRange);
  EXPECT_EQ(code_of([] { bessel_j(0, 50.5); }), Errc::ArgumentOutOfRange);
  EXPECT_EQ(code_of([] { bessel_j(0, std::nan("")); }), Errc::ArgumentOutOfRange);
}

TEST(BesselRoot, Bracket) {
  EXPECT_GT(bessel_j(0, 2.0), 0.0);
  EXPECT_LT(bessel_j(0, 3.0), 0.0);
}

TEST(BesselRoot, Value) {
  const double j0 = bessel_j0_root();
  EXPECT_GT(j0, 2.4);
  EXPECT_LT(j0, 2.41);
  EXPECT_LE(std::abs(bessel_j(0, j0)), 1e-13);
  EXPECT_NEAR(j0, 2.404825557695773, 1e-14);
}

TEST(BesselRoot, NeighbouringOrdersDoNotVanish) {
  const double j0 = bessel_j0_root();
  EXPECT_GT(std::abs(bessel_j(1, j0)), 0.5);
  EXPECT_GT(std::abs(bessel_j(2, j0)), 0.4);
  EXPECT_NEAR(bessel_j(1, j0), 0.519147497289, 1e-11);
  EXPECT_NEAR(bessel_j(2, j0), 0.431754807020, 1e-11);
}

TEST(CircleMap, Origin) {
  const auto f = circle_map_F(0.0, 0.0);
  EXPECT_NEAR(f.real(), kTwoPi, 1e-13);
  EXPECT_NEAR(f.imag(), 0.0, 1e-13);
}

TEST(CircleMap, JacobiAnger) {
  for (double s : {0.5, 1.0, bessel_j0_root(), -1.3}) {
    EXPECT_LE(std::abs(circle_map_F(s, 0.0) - kTwoPi * bessel_j(0, std::abs(s))), 1e-10) << s;
  }
  for (int k = 0; k < 64; ++k) {
    const double s = 10.0 * k / 63.0;
    EXPECT_LE(std::abs(circle_map_F(s, 0.0) - kTwoPi * bessel_j(0, s)), 1e-10) << s;
  }
}

TEST(CircleMap, ModulusBound) {
  NormalStream rng(17, 0);
  for (int k = 0; k < 100; ++k) {
    const double s1 = 20.0 * (rng.uniform(2 * k) - 0.5), s2 = 20.0 * (rng.uniform(2 * k + 1) - 0.5);
    EXPECT_LE(std::abs(circle_map_F(s1, s2)), kTwoPi * (1.0 + 1e-12));
  }
}

TEST(CircleMap, JacobianAtFirstRoot) {
  const double j0 = bessel_j0_root();
  const auto jac = circle_map_jacobian(j0, 0.0);
  const double j1 = bessel_j(1, j0), j2 = bessel_j(2, j0);
  // dF/ds1 = i int sin t e^{i j0 sin t} dt = -2 pi J1(j0); dF/ds2 = 2 pi i J2(j0).
  EXPECT_NEAR(jac.column(0).real(), -kTwoPi * j1, 1e-12);
  EXPECT_NEAR(jac.column(0).imag(), 0.0, 1e-12);
  EXPECT_NEAR(jac.column(1).real(), 0.0, 1e-12);
  EXPECT_NEAR(jac.column(1).imag(), kTwoPi * j2, 1e-12);
  EXPECT_NEAR(std::abs(jac.det()), kTwoPi * kTwoPi * j1 * j2, 1e-8);
  EXPECT_GT(std::abs(jac.det()), 0.0);
}

TEST(CircleMap, FiniteDifferenceJacobian) {
  for (auto [s1, s2] : {std::pair{bessel_j0_root(), 0.0}, std::pair{0.3, -1.2}, std::pair{4.0, 2.5}}) {
    const auto a = circle_map_jacobian(s1, s2);
    const auto b = circle_map_jacobian_fd(s1, s2, 1e-5);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) EXPECT_NEAR(a.m[r][c], b.m[r][c], 1e-6);
  }
}

TEST(CircleMap, LocalInversionFromDisc) {
  const double j0 = bessel_j0_root();
  const auto centre = circle_map_F(j0, 0.0);
  const double radius = 0.3 * std::sqrt(std::abs(circle_map_jacobian(j0, 0.0).det()));
  for (int k = 0; k < 16; ++k) {
    const double r = radius * (0.25 + 0.75 * (k % 4) / 3.0);
    const auto z = centre + std::polar(r, kTwoPi * k / 16.0);
    const auto inv = invert_circle_map(z, j0, 0.0);
    EXPECT_TRUE(inv.converged) << k;
    EXPECT_LE(inv.parameter_error, 1e-8) << k;
    EXPECT_LE(inv.residual, 1e-10) << k;
  }
}

TEST(CircleMap, InversionRecoversParameters) {
  const double j0 = bessel_j0_root();
  for (int k = 0; k < 16; ++k) {
    const double s1 = j0 + 0.2 * std::cos(kTwoPi * k / 16.0), s2 = 0.2 * std::sin(kTwoPi * k / 16.0);
    const auto inv = invert_circle_map(circle_map_F(s1, s2), j0, 0.0);
    EXPECT_LE(std::hypot(inv.s1 - s1, inv.s2 - s2), 1e-8) << k;
  }
}

TEST(CircleBasis, Ordering) {
  const double t = 0.7;
  EXPECT_DOUBLE_EQ(circle_basis(1, t), std::sin(t));
  EXPECT_DOUBLE_EQ(circle_basis(2, t), std::cos(2 * t) / std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(circle_basis(3, t), std::cos(t));
  EXPECT_DOUBLE_EQ(circle_basis(4, t), std::sin(2 * t) / std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(circle_basis(5, t), std::sin(3 * t) / std::sqrt(3.0));
  EXPECT_DOUBLE_EQ(circle_basis(6, t), std::cos(3 * t) / std::sqrt(3.0));
  EXPECT_DOUBLE_EQ(circle_basis(7, t), std::sin(4 * t) / 2.0);
}

TEST(Phi0, OriginIsTwoPiK) {
  for (int n0 : {2, 8, 33}) {
    const auto r = phi0_map(0.0, 0.0, n0, 0.5);
    EXPECT_NEAR(r.value.real(), kTwoPi * r.K, 1e-12);
    EXPECT_NEAR(r.value.imag(), 0.0, 1e-12);
    EXPECT_GT(r.K, 1.0);
  }
}

TEST(Phi0, BetaZeroIsConstant) {
  const Phi0Map map(8, 0.0);
  EXPECT_NEAR(map.K(), 1.0, 1e-13);
  for (double s : {0.0, 1.0, 2.5}) EXPECT_NEAR(std::abs(map(s, -s) - kTwoPi), 0.0, 1e-12);
}

TEST(Phi0, DiscrepancyShrinksWithN0) {
  // Odd counts leave a sin/cos pair incomplete, so the weight is not flat;
  // from n0 = 8 on (even, all pairs complete) the remaining gap is roundoff.
  double prev = 1e300;
  for (int n0 : {2, 3, 5, 8}) {
    const double d = Phi0Map(n0, 0.5).discrepancy();
    EXPECT_LT(d, prev) << n0;
    prev = d;
  }
  const double d8 = Phi0Map(8, 0.5).discrepancy();
  const double d32 = Phi0Map(32, 0.5).discrepancy();
  const double d128 = Phi0Map(128, 0.5).discrepancy();
  EXPECT_LE(d32, std::max(d8, 1e-13));
  EXPECT_LE(d128, std::max(d32, 1e-13) * 2.0);
  EXPECT_LE(d128, 1e-12);
}

TEST(Phi0, InvalidArguments) {
  EXPECT_EQ(code_of([] { Phi0Map(1, 0.5); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([] { Phi0Map(8, 1.0); }), Errc::InvalidArgument);
}
