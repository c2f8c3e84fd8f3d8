#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "imchaos/mc.hpp"

using namespace imchaos;

namespace {

using cplx = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

EnsembleConfig circle_config(double beta, int modes, std::uint64_t samples, std::string f = "one") {
  EnsembleConfig c;
  c.field = "circle";
  c.modes = modes;
  c.grid = static_cast<std::size_t>(std::max(256, 6 * modes));
  c.beta = beta;
  c.f = std::move(f);
  c.samples = samples;
  c.seed = 11;
  return c;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::IoError;
}

}  // namespace

TEST(Ensemble, SingleSampleIsDeterministic) {
  const auto c = circle_config(0.5, 16, 1);
  const auto a = run_chaos_ensemble(c), b = run_chaos_ensemble(c);
  ASSERT_EQ(a.values.size(), 1u);
  EXPECT_EQ(a.values, b.values);
}

TEST(Ensemble, WorkerCountDoesNotChangeResults) {
  for (const char* field : {"circle", "kl-grid", "star-scale"}) {
    auto c = circle_config(0.6, 32, 10000, "bump");
    c.field = field;
    c.grid = field == std::string("circle") ? 256 : 129;
    c.t = 3.0;
    c.workers = 1;
    const auto a = run_chaos_ensemble(c);
    c.workers = 8;
    const auto b = run_chaos_ensemble(c);
    ASSERT_EQ(a.values.size(), b.values.size());
    EXPECT_EQ(std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(cplx)), 0) << field;
  }
}

TEST(Ensemble, PrefixIsStable) {
  // Stream i is sample i, whatever M is.
  const auto small = run_chaos_ensemble(circle_config(0.5, 16, 100));
  const auto large = run_chaos_ensemble(circle_config(0.5, 16, 5000));
  EXPECT_TRUE(std::equal(small.values.begin(), small.values.end(), large.values.begin()));
}

TEST(Ensemble, BetaZeroGivesIntegral) {
  const auto e = run_chaos_ensemble(circle_config(0.0, 16, 100, "bump"));
  for (const auto& z : e.values) EXPECT_LE(std::abs(z - e.f_integral), 1e-13);
}

TEST(Ensemble, MeanIsIntegral) {
  const auto e = run_chaos_ensemble(circle_config(0.5, 64, 100000));
  std::vector<double> re(e.values.size()), im(e.values.size());
  for (std::size_t i = 0; i < re.size(); ++i) {
    re[i] = e.values[i].real();
    im[i] = e.values[i].imag();
  }
  const auto mr = stats::mean_se(re), mi = stats::mean_se(im);
  EXPECT_NEAR(mr.mean, kTwoPi, 4.0 * mr.se);
  EXPECT_NEAR(mi.mean, 0.0, 4.0 * mi.se);
  EXPECT_NEAR(e.f_integral.real(), kTwoPi, 1e-12);
}

TEST(Ensemble, RejectsZeroSamples) {
  EXPECT_EQ(code_of([] { run_chaos_ensemble(circle_config(0.5, 16, 0)); }), Errc::InvalidArgument);
}

TEST(Density, SingleSampleAtOrigin) {
  const std::vector<cplx> v{cplx(0.0, 0.0)};
  const auto d = density_histogram(v, 1.0, 2);
  EXPECT_EQ(d.total, 1u);
  EXPECT_EQ(d.outside, 0u);
  EXPECT_EQ(d.counts[3], 1u);  // [0, 1)^2 holds the origin
  EXPECT_DOUBLE_EQ(d.density(1, 1), 1.0);
}

TEST(Density, BetaZeroMassSitsAtIntegral) {
  const auto e = run_chaos_ensemble(circle_config(0.0, 8, 50));
  const auto d = density_histogram(e.values, 8.0, 16);
  const int ix = static_cast<int>((kTwoPi + 8.0) / d.bin_width());
  const int iy = 16 / 2;
  EXPECT_EQ(d.counts[static_cast<std::size_t>(iy * 16 + ix)], 50u);
}

TEST(Density, MassConservation) {
  const auto e = run_chaos_ensemble(circle_config(0.7, 32, 20000, "bump"));
  for (double window : {0.5, 3.0, 20.0}) {
    const auto d = density_histogram(e.values, window, 24);
    EXPECT_EQ(std::accumulate(d.counts.begin(), d.counts.end(), std::uint64_t{0}) + d.outside, 20000u);
  }
  const auto d = density_histogram(e.values, 6.0, 48);
  double mass = 0.0;
  for (int iy = 0; iy < 48; ++iy)
    for (int ix = 0; ix < 48; ++ix) mass += d.density(ix, iy) * d.bin_width() * d.bin_width();
  EXPECT_NEAR(mass + static_cast<double>(d.outside) / 20000.0, 1.0, 1e-12);
}

TEST(Density, Errors) {
  const std::vector<cplx> none;
  EXPECT_EQ(code_of([&] { density_histogram(none, 1.0, 8); }), Errc::EmptyEnsemble);
  const std::vector<cplx> one{cplx(0.0)};
  EXPECT_EQ(code_of([&] { density_histogram(one, 1.0, 1); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([&] { density_histogram(one, 0.0, 8); }), Errc::InvalidArgument);
}

TEST(Density, StepSignCoversCentralDisc) {
  const auto e = run_chaos_ensemble(circle_config(0.5, 64, 200000, "step-sign"));
  const auto d = density_histogram(e.values, 6.0, 24);
  EXPECT_GE(d.min_count_in_disc(cplx(0.0), 3.0), 1u);
}

TEST(SmallBall, AllSamplesAtCentre) {
  const std::vector<cplx> v(100, cplx(1.0, 2.0));
  const auto s = small_ball(v, cplx(1.0, 2.0), {0.4, 0.1});
  EXPECT_EQ(s.hits, (std::vector<std::uint64_t>{100, 100}));
  EXPECT_DOUBLE_EQ(s.probability[1], 1.0);
  EXPECT_DOUBLE_EQ(s.scaled[1], 100.0);
  EXPECT_DOUBLE_EQ(s.ci[1].hi, 100.0);
}

TEST(SmallBall, NoHitsStillHasPositiveUpperBound) {
  const std::vector<cplx> v(1000, cplx(5.0, 0.0));
  const auto s = small_ball(v, cplx(0.0), default_radii());
  for (std::size_t k = 0; k < s.radii.size(); ++k) {
    EXPECT_EQ(s.hits[k], 0u);
    EXPECT_EQ(s.ci[k].lo, 0.0);
    EXPECT_GT(s.ci[k].hi, 0.0);
  }
}

TEST(SmallBall, HitsAreNested) {
  const auto e = run_chaos_ensemble(circle_config(0.5, 32, 20000, "step-sign"));
  const auto s = small_ball(e.values, cplx(0.0), default_radii());
  EXPECT_GE(s.hits[0], s.hits[1]);
  EXPECT_GE(s.hits[1], s.hits[2]);
  EXPECT_GT(s.hits[2], 0u);
}

TEST(SmallBall, InvalidRadii) {
  const std::vector<cplx> v(10);
  EXPECT_EQ(code_of([&] { small_ball(v, cplx(0.0), {}); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([&] { small_ball(v, cplx(0.0), {0.1, 0.2}); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([&] { small_ball(v, cplx(0.0), {0.0}); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([] { small_ball(std::vector<cplx>{}, cplx(0.0), {0.1}); }), Errc::EmptyEnsemble);
}

TEST(SmallBall, ConsistentWithDensity) {
  // Hits in a disc equal the histogram count over bins inside it when the
  // disc is a union of bins; compare a square instead: the 2x2 bins about z0.
  const auto e = run_chaos_ensemble(circle_config(0.5, 32, 50000, "step-sign"));
  const auto d = density_histogram(e.values, 2.0, 20);
  const double w = d.bin_width();
  std::uint64_t square = 0;
  for (const auto& z : e.values)
    if (std::abs(z.real()) < w && std::abs(z.imag()) < w) ++square;
  const std::uint64_t bins = d.counts[9 * 20 + 9] + d.counts[9 * 20 + 10] + d.counts[10 * 20 + 9] + d.counts[10 * 20 + 10];
  EXPECT_EQ(square, bins);
  const auto s = small_ball(e.values, cplx(0.0), {w});
  EXPECT_LE(s.hits[0], bins);
}

TEST(Moments, DecadePrefixes) {
  EXPECT_EQ(decade_prefixes(1000000), (std::vector<std::uint64_t>{1000, 10000, 100000, 1000000}));
  EXPECT_EQ(decade_prefixes(500), (std::vector<std::uint64_t>{500}));
  EXPECT_EQ(decade_prefixes(25000), (std::vector<std::uint64_t>{1000, 10000, 25000}));
}

TEST(Moments, ZerothMomentIsOne) {
  const auto e = run_chaos_ensemble(circle_config(0.5, 16, 2000));
  const auto r = moment_estimate(e.values, {0.0});
  for (double v : r.rows[0].estimates) EXPECT_EQ(v, 1.0);
}

TEST(Moments, SecondMomentMatchesTruncatedAnalytic) {
  const double beta = std::sqrt(0.5);
  for (int n : {16, 64}) {
    const auto c = circle_config(beta, n, 100000);
    const auto e = run_chaos_ensemble(c);
    const auto r = moment_estimate(e.values, {2.0});
    std::vector<double> sq(e.values.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = std::norm(e.values[i]);
    const auto ms = stats::mean_se(sq);
    EXPECT_NEAR(r.rows[0].estimates.back(), ms.mean, 1e-9 * ms.mean);
    const auto f = builtin_test_function("one", Grid::circle(c.grid));
    EXPECT_NEAR(ms.mean, second_moment_analytic(f, CircleKernel{}, beta, n), 4.0 * ms.se) << n;
  }
  const auto f = builtin_test_function("one", Grid::circle(512));
  EXPECT_NEAR(second_moment_analytic(f, CircleKernel{}, beta, 64), 45.871489170951, 1e-8);
  EXPECT_NEAR(second_moment_analytic(f, CircleKernel{}, beta), 46.597979083335, 1e-8);
}

TEST(Moments, NegativeMomentsSkipZeros) {
  const std::vector<cplx> v{cplx(0.0), cplx(2.0), cplx(0.0, 2.0), cplx(0.0)};
  const auto r = moment_estimate(v, {-1.0, 1.0}, {4});
  EXPECT_EQ(r.zero_samples, 2u);
  EXPECT_DOUBLE_EQ(r.rows[0].estimates[0], 0.5);
  EXPECT_DOUBLE_EQ(r.rows[1].estimates[0], 1.0);
}

TEST(Moments, DivergentSuspectFlag) {
  // Moduli shrink along the stream, so |z|^-3 averages blow up with the prefix.
  std::vector<cplx> v(10000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = cplx(static_cast<double>(v.size() - i) / v.size());
  const auto r = moment_estimate(v, {-3.0, 1.0}, {100, 10000});
  EXPECT_TRUE(r.rows[0].divergent_suspect);
  EXPECT_FALSE(r.rows[1].divergent_suspect);
  EXPECT_EQ(r.rows[0].growth.size(), 1u);
  // Growth of 1.5x per step never trips the flag, even though it compounds past 2x.
  const std::vector<cplx> w{cplx(1.0), cplx(std::pow(1.0 / 2.0, 1.0 / 3.0)), cplx(std::pow(1.0 / 3.5, 1.0 / 3.0)),
                            cplx(std::pow(1.0 / 5.0, 1.0 / 3.0))};
  const auto slow = moment_estimate(w, {-3.0}, {1, 2, 4});
  EXPECT_NEAR(slow.rows[0].growth[0], 1.5, 1e-12);
  EXPECT_FALSE(slow.rows[0].divergent_suspect);
}

TEST(Moments, Errors) {
  const std::vector<cplx> v(10, cplx(1.0));
  EXPECT_EQ(code_of([&] { moment_estimate(v, {1.0}, {11}); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([] { moment_estimate(std::vector<cplx>{}, {1.0}); }), Errc::EmptyEnsemble);
}

TEST(SobolevBall, LimitsInEta) {
  const auto c = circle_config(0.5, 16, 200, "bump");
  const auto norms = sobolev_norms(c, SobolevSpec::for_dimension(1));
  for (double v : norms) EXPECT_GT(v, 0.0);
  EXPECT_EQ(sobolev_ball_probability(norms, kInf).probability, 1.0);
  EXPECT_EQ(sobolev_ball_probability(norms, 0.0).probability, 0.0);
  const auto half = sobolev_ball_probability(norms, sobolev_ball_probability(norms, 0.0).median_norm);
  EXPECT_GE(half.probability, 0.5);
  EXPECT_EQ(code_of([&] { sobolev_ball_probability(norms, -1.0); }), Errc::InvalidArgument);
}

TEST(SobolevBall, BetaZeroIsZeroNorm) {
  auto c = circle_config(0.0, 16, 10, "one");
  const auto norms = sobolev_norms(c, SobolevSpec::for_dimension(1));
  for (double v : norms) EXPECT_LE(v, 1e-12);
}

TEST(TruncationGap, CoupledSamplesMatchAnalytic) {
  auto c = circle_config(std::sqrt(0.5), 0, 50000);
  c.grid = 512;
  const auto gaps = coupled_truncation_gaps(c, 16, 32);
  const auto ms = stats::mean_se(gaps);
  const auto f = builtin_test_function("one", Grid::circle(512));
  EXPECT_NEAR(ms.mean, truncation_gap(16, 32, f, std::sqrt(0.5)), 4.0 * ms.se);
}
