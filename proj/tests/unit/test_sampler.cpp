#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "imchaos/sampler.hpp"
#include "imchaos/stats.hpp"

using namespace imchaos;

namespace {

const KLBasis& log_basis() {
  static const KLBasis b = kl_decompose(LogKernel(1), Grid::interval(129), 64);
  return b;
}

const KLBasis& star_basis() {
  static const KLBasis b = kl_decompose(
      StarScaleKernel(std::make_shared<SeedCovariance>(SeedCovariance::build(0.5)), 1.0, 3.0), Grid::interval(256),
      256);
  return b;
}

}  // namespace

TEST(CircleSampler, VarianceIsHarmonicNumber) {
  NormalStream rng(1, 0);
  const auto fs = sample_circle_field(3, 12, rng);
  ASSERT_EQ(fs.variance.size(), 12u);
  for (double v : fs.variance) EXPECT_NEAR(v, 11.0 / 6.0, 1e-12);
  EXPECT_EQ(fs.truncation, Truncation::fourier(3));
}

TEST(CircleSampler, ForcedCoefficientsGiveSine) {
  const CircleFieldSampler s(1, 16);
  const double a[] = {1.0}, b[] = {0.0};
  const auto fs = s.from_coefficients(a, b);
  for (std::size_t i = 0; i < fs.values.size(); ++i) EXPECT_NEAR(fs.values[i], std::sin(fs.grid.point(i)[0]), 1e-14);
}

TEST(CircleSampler, ForcedCoefficientsHigherModes) {
  const CircleFieldSampler s(3, 16);
  const double a[] = {0.0, 0.0, 0.5}, b[] = {0.0, 2.0, 0.0};
  const auto fs = s.from_coefficients(a, b);
  for (std::size_t i = 0; i < fs.values.size(); ++i) {
    const double t = fs.grid.point(i)[0];
    EXPECT_NEAR(fs.values[i], 2.0 * std::cos(2 * t) / std::sqrt(2.0) + 0.5 * std::sin(3 * t) / std::sqrt(3.0), 1e-14);
  }
}

TEST(CircleSampler, AliasedGrid) {
  try {
    CircleFieldSampler(64, 255);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AliasedGrid);
  }
}

TEST(CircleSampler, CovarianceMatchesPartialSum) {
  const CircleFieldSampler s(64, 384);  // theta = pi/3 is grid index 64
  const std::size_t m = 100000;
  std::vector<double> prod(m);
  std::vector<std::complex<double>> spec(s.grid().size() / 2 + 1);
  std::vector<double> out(s.grid().size());
  for (std::size_t i = 0; i < m; ++i) {
    NormalStream rng(2024, i);
    s.synthesize(rng, spec, out);
    prod[i] = out[0] * out[64];
  }
  const auto ms = stats::mean_se(prod);
  EXPECT_NEAR(ms.mean, CircleKernel::partial_sum(std::numbers::pi / 3.0, 64), 3.0 * ms.se);
}

TEST(CircleSampler, Deterministic) {
  const CircleFieldSampler s(32, 128);
  NormalStream a(7, 5), b(7, 5);
  EXPECT_EQ(s.sample(a).values, s.sample(b).values);
}

TEST(KLDecompose, CircleTopEigenvalueIsPiTwice) {
  const auto b = kl_decompose(CircleKernel{}, Grid::circle(512), 4);
  ASSERT_GE(b.size(), 2u);
  EXPECT_NEAR(b.eigenvalues[0], std::numbers::pi, 1e-2);
  EXPECT_NEAR(b.eigenvalues[1], b.eigenvalues[0], 1e-9 * b.eigenvalues[0]);
  EXPECT_LT(b.eigenvalues[2], 0.6 * b.eigenvalues[0]);
}

TEST(KLDecompose, DeltaCombHasEqualEigenvalues) {
  const auto g = Grid::circle(64);
  const auto b = kl_decompose_matrix(g, Eigen::MatrixXd::Identity(64, 64), 64);
  ASSERT_EQ(b.size(), 64u);
  for (double l : b.eigenvalues) EXPECT_NEAR(l, g.spacing(0), 1e-13);
}

TEST(KLDecompose, StarScaleReconstruction) {
  const auto& b = star_basis();
  const Eigen::MatrixXd c = covariance_matrix(
      StarScaleKernel(std::make_shared<SeedCovariance>(SeedCovariance::build(0.5)), 1.0, 3.0), b.grid);
  const Eigen::MatrixXd r = b.scaled * b.scaled.transpose();
  EXPECT_LE((c - r).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(KLDecompose, SortedAndWeightedOrthonormal) {
  for (const KLBasis* b : {&log_basis(), &star_basis()}) {
    for (std::size_t k = 1; k < b->size(); ++k) EXPECT_LE(b->eigenvalues[k], b->eigenvalues[k - 1]);
    EXPECT_GT(b->eigenvalues.back(), 1e-12 * b->eigenvalues.front());
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(b->weights.data(), static_cast<Eigen::Index>(b->weights.size()));
    const Eigen::MatrixXd gram = b->modes.transpose() * w.asDiagonal() * b->modes;
    const auto m = static_cast<Eigen::Index>(b->size());
    EXPECT_LE((gram - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(KLDecompose, RejectsIndefinite) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(8, 8);
  c(0, 0) = -1.0;
  try {
    kl_decompose_matrix(Grid::circle(8), c, 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotPositive);
  }
}

TEST(SampleKL, ZeroCoefficientsGiveZeroField) {
  const auto& b = log_basis();
  const std::vector<double> zeros(b.size(), 0.0);
  const auto fs = sample_kl_from(b, zeros);
  for (double v : fs.values) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(fs.variance, b.variance);
}

TEST(SampleKL, SingleModeVariance) {
  const auto b = kl_decompose(LogKernel(1), Grid::interval(65), 1);
  ASSERT_EQ(b.size(), 1u);
  const std::size_t probe = 20;
  std::vector<double> sq(100000);
  for (std::size_t i = 0; i < sq.size(); ++i) {
    NormalStream rng(77, i);
    const double v = sample_kl(b, rng).values[probe];
    sq[i] = v * v;
  }
  const auto ms = stats::mean_se(sq);
  const double expected = b.eigenvalues[0] * b.modes(20, 0) * b.modes(20, 0);
  EXPECT_NEAR(b.variance[probe], expected, 1e-12);
  EXPECT_NEAR(ms.mean, expected, 3.0 * ms.se);
}

TEST(SampleKL, CovarianceOnProbeSet) {
  const auto& b = log_basis();
  std::vector<std::size_t> probes;
  for (std::size_t k = 0; k < 16; ++k) probes.push_back(4 + 8 * k);
  const std::size_t m = 100000;
  std::vector<std::vector<double>> vals(probes.size(), std::vector<double>(m));
  for (std::size_t i = 0; i < m; ++i) {
    NormalStream rng(31, i);
    const auto fs = sample_kl(b, rng);
    for (std::size_t p = 0; p < probes.size(); ++p) vals[p][i] = fs.values[probes[p]];
  }
  const Eigen::MatrixXd cov = b.scaled * b.scaled.transpose();
  std::vector<double> prod(m);
  for (std::size_t p = 0; p < probes.size(); ++p) {
    for (std::size_t q = p; q < probes.size(); ++q) {
      for (std::size_t i = 0; i < m; ++i) prod[i] = vals[p][i] * vals[q][i];
      const auto ms = stats::mean_se(prod);
      EXPECT_NEAR(ms.mean, cov(static_cast<Eigen::Index>(probes[p]), static_cast<Eigen::Index>(probes[q])),
                  4.0 * ms.se)
          << p << "," << q;
    }
  }
}

TEST(Samplers, PointwiseGaussian) {
  const CircleFieldSampler circle(16, 64);
  const std::size_t m = 100000;
  std::vector<double> a(m), b(m), c(m);
  for (std::size_t i = 0; i < m; ++i) {
    NormalStream r1(5, i), r2(6, i), r3(7, i);
    a[i] = circle.sample(r1).values[10];
    b[i] = sample_kl(log_basis(), r2).values[40];
    c[i] = sample_kl(star_basis(), r3).values[100];
  }
  for (const auto* v : {&a, &b, &c}) {
    const auto s = stats::shape_moments(*v);
    EXPECT_LE(std::abs(s.skewness), 0.05);
    EXPECT_LE(std::abs(s.excess_kurtosis), 0.1);
  }
}

TEST(SampleShifted, ZeroShiftMatchesUnshiftedLaw) {
  const auto& b = log_basis();
  const CoefficientShift none{{0}, {0.0}, b.hash()};
  std::vector<double> x(10000), y(10000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    NormalStream r1(1, i), r2(2, i);
    x[i] = sample_kl(b, r1).values[64];
    y[i] = sample_shifted(b, none, r2).values[64];
  }
  EXPECT_GT(stats::ks_two_sample(x, y).p_value, 0.001);
}

TEST(SampleShifted, ShiftMovesMean) {
  const auto& b = log_basis();
  const CoefficientShift shift{{0}, {5.0}, 0};
  const std::size_t probe = 50;
  std::vector<double> x(10000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    NormalStream rng(3, i);
    const auto fs = sample_shifted(b, shift, rng);
    x[i] = fs.values[probe];
    if (i == 0) {
      EXPECT_EQ(fs.variance, b.variance);
    }
  }
  const auto ms = stats::mean_se(x);
  EXPECT_NEAR(ms.mean, 5.0 * b.scaled(static_cast<Eigen::Index>(probe), 0), 3.0 * ms.se);
}

TEST(SampleShifted, IndexOutOfRange) {
  const auto& b = log_basis();
  NormalStream rng(1, 0);
  try {
    sample_shifted(b, CoefficientShift{{b.size()}, {1.0}, 0}, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IndexOutOfRange);
  }
}

TEST(BasisCache, RoundTrip) {
  const auto& b = log_basis();
  const auto path = (std::filesystem::temp_directory_path() / "imchaos_basis_test.bin").string();
  write_basis_cache(path, b);
  const auto back = read_basis_cache(path, b.grid, b.kernel_hash);
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(back->eigenvalues, b.eigenvalues);
  EXPECT_EQ(back->modes, b.modes);
  EXPECT_EQ(back->hash(), b.hash());
  EXPECT_FALSE(read_basis_cache(path, b.grid, b.kernel_hash + 1).has_value());
  EXPECT_FALSE(read_basis_cache(path, Grid::interval(128), b.kernel_hash).has_value());
  std::filesystem::remove(path);
}

TEST(FieldCsv, Columns) {
  const CircleFieldSampler s(1, 4);
  NormalStream rng(1, 0);
  std::ostringstream os;
  write_csv(os, s.sample(rng));
  const auto text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "x,gamma,variance");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
}
