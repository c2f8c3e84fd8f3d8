#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "imchaos/error.hpp"
#include "imchaos/fft.hpp"
#include "imchaos/grid.hpp"
#include "imchaos/hash.hpp"
#include "imchaos/kernels.hpp"
#include "imchaos/quadrature.hpp"
#include "imchaos/sampler.hpp"

namespace imchaos {

using cplx = std::complex<double>;

/// Quadrature used for chaos integrals: periodic trapezoid on the circle,
/// composite Simpson on boxes.
inline std::vector<double> chaos_weights(const Grid& grid) { return grid.simpson_weights(); }

/// Complex test function sampled on a grid. `exact`, when set, evaluates the
/// function off-grid (used for refinement checks).
struct TestFunction {
  Grid grid;
  std::vector<cplx> values;
  std::vector<char> support;  // 1 where values != 0
  double l1 = 0.0;            // quadrature of |f|
  std::string name;
  std::function<cplx(const Point&)> exact;

  int dim() const noexcept { return grid.dim(); }

  std::uint64_t hash() const {
    Fnv1a h;
    h.str(name).u64(grid.hash()).u64(values.size());
    for (const auto& v : values) h.f64(v.real()).f64(v.imag());
    return h.value();
  }
};

inline TestFunction test_function_from_values(const Grid& grid, std::vector<cplx> values, std::string name,
                                              std::function<cplx(const Point&)> exact = {}) {
  require(values.size() == grid.size(), Errc::GridMismatch, "test function values do not match grid");
  TestFunction f{grid, std::move(values), {}, 0.0, std::move(name), std::move(exact)};
  f.support.resize(f.values.size());
  const auto w = chaos_weights(grid);
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    f.support[i] = f.values[i] != cplx{} ? 1 : 0;
    f.l1 += w[i] * std::abs(f.values[i]);
  }
  return f;
}

inline TestFunction make_test_function(const Grid& grid, std::function<cplx(const Point&)> fn, std::string name) {
  std::vector<cplx> values(grid.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = fn(grid.point(i));
  return test_function_from_values(grid, std::move(values), std::move(name), std::move(fn));
}

inline constexpr std::array<std::string_view, 4> kBuiltinTestFunctions = {"one", "ramp", "step-sign", "bump"};

/// Built-ins, written in the normalised coordinate u in [0,1] of the last axis
/// (theta/2pi on the circle):
///   one = 1, ramp = u, step-sign = sign(1/2 - u) (0 at u = 1/2),
///   bump = prod over axes of exp(-1/(1-(2u-1)^2)).
inline TestFunction builtin_test_function(std::string_view name, const Grid& grid) {
  const int d = grid.dim();
  auto unit = [grid](const Point& p, int axis) {
    const auto a = static_cast<std::size_t>(axis);
    if (grid.is_circle()) return p[0] / (2.0 * std::numbers::pi);
    return (p[a] - grid.lo(axis)) / (grid.hi(axis) - grid.lo(axis));
  };
  std::function<cplx(const Point&)> fn;
  if (name == "one") {
    fn = [](const Point&) { return cplx{1.0, 0.0}; };
  } else if (name == "ramp") {
    fn = [unit, d](const Point& p) { return cplx{unit(p, d - 1), 0.0}; };
  } else if (name == "step-sign") {
    fn = [unit, d](const Point& p) {
      const double u = unit(p, d - 1);
      return cplx{u < 0.5 ? 1.0 : (u > 0.5 ? -1.0 : 0.0), 0.0};
    };
  } else if (name == "bump") {
    fn = [unit, d](const Point& p) {
      double v = 1.0;
      for (int a = 0; a < d; ++a) {
        const double x = 2.0 * unit(p, a) - 1.0;
        v *= std::abs(x) < 1.0 ? std::exp(-1.0 / (1.0 - x * x)) : 0.0;
      }
      return cplx{v, 0.0};
    };
  } else {
    throw Error(Errc::InvalidArgument, "unknown built-in test function '" + std::string(name) + "'");
  }
  return make_test_function(grid, fn, std::string(name));
}

/// Reads grid values from CSV: one row per grid point (row-major order), with
/// columns `re` or `re,im` or `x,re,im`; a non-numeric first line is a header.
inline TestFunction load_test_function_csv(const std::string& path, const Grid& grid) {
  std::ifstream is(path);
  require(static_cast<bool>(is), Errc::IoError, "cannot open test function file " + path);
  std::vector<cplx> values;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> cols;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        cols.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      require(first, Errc::InvalidArgument, "non-numeric row in " + path);
      first = false;
      continue;
    }
    first = false;
    if (cols.size() == 1) values.emplace_back(cols[0], 0.0);
    else if (cols.size() == 2) values.emplace_back(cols[0], cols[1]);
    else if (cols.size() == 3) values.emplace_back(cols[1], cols[2]);
    else throw Error(Errc::InvalidArgument, "expected 1-3 columns in " + path);
  }
  require(values.size() == grid.size(), Errc::GridMismatch,
          path + " has " + std::to_string(values.size()) + " rows, grid has " + std::to_string(grid.size()));
  return test_function_from_values(grid, std::move(values), "csv:" + path);
}

struct ChaosObservable {
  cplx value;
  double beta = 0.0;
  Truncation truncation;
  std::uint64_t f_hash = 0;
  std::uint64_t stream_id = 0;
};

/// e^{beta^2 sigma^2(x_i) / 2}, the Wick renormalisation factor.
inline std::vector<double> wick_weight(const FieldSample& sample, double beta) {
  std::vector<double> w(sample.variance.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(0.5 * beta * beta * sample.variance[i]);
  return w;
}

/// Precomputed w_i f(x_i) for repeated chaos integrals against one f.
inline std::vector<cplx> weighted_values(const TestFunction& f) {
  const auto w = chaos_weights(f.grid);
  std::vector<cplx> out(f.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = w[i] * f.values[i];
  return out;
}

/// sum_i wf_i e^{i beta gamma_i} e^{beta^2 var_i / 2}; hot-path kernel of chaos_integral.
inline cplx chaos_sum(std::span<const cplx> wf, std::span<const double> gamma, std::span<const double> variance,
                      double beta) {
  cplx acc{};
  const double half_b2 = 0.5 * beta * beta;
  for (std::size_t i = 0; i < wf.size(); ++i) {
    if (wf[i] == cplx{}) continue;
    const double ph = beta * gamma[i];
    acc += wf[i] * std::exp(half_b2 * variance[i]) * cplx{std::cos(ph), std::sin(ph)};
  }
  return acc;
}

inline ChaosObservable chaos_integral(const TestFunction& f, const FieldSample& sample, double beta) {
  require(f.grid == sample.grid, Errc::GridMismatch, "test function and field live on different grids");
  const auto wf = weighted_values(f);
  return {chaos_sum(wf, sample.values, sample.variance, beta), beta, sample.truncation, f.hash(), sample.stream_id};
}

/// Support of f dilated by one grid cell in every axis (periodic on the circle).
inline std::vector<char> default_window(const TestFunction& f) {
  const Grid& g = f.grid;
  std::vector<char> k(f.support.size(), 0);
  for (std::size_t i = 0; i < f.support.size(); ++i) {
    if (!f.support[i]) continue;
    const auto idx = g.unflatten(i);
    // All offsets in {-1,0,1}^d.
    int combos = 1;
    for (int a = 0; a < g.dim(); ++a) combos *= 3;
    for (int c = 0; c < combos; ++c) {
      auto nb = idx;
      int rem = c;
      bool inside = true;
      for (int a = 0; a < g.dim(); ++a) {
        const int off = rem % 3 - 1;
        rem /= 3;
        const auto ua = static_cast<std::size_t>(a);
        const auto n = static_cast<std::ptrdiff_t>(g.extent(a));
        auto j = static_cast<std::ptrdiff_t>(idx[ua]) + off;
        if (g.is_circle()) j = (j + n) % n;
        else if (j < 0 || j >= n) inside = false;
        nb[ua] = static_cast<std::size_t>(j);
      }
      if (inside) k[g.flatten(nb)] = 1;
    }
  }
  return k;
}

/// 1_K (f :e^{i beta Gamma}: - 1) on the grid.
inline std::vector<cplx> chaos_field(const TestFunction& f, const FieldSample& sample, double beta,
                                     std::span<const char> window = {}) {
  require(f.grid == sample.grid, Errc::GridMismatch, "test function and field live on different grids");
  std::vector<char> dflt;
  if (window.empty()) {
    dflt = default_window(f);
    window = dflt;
  }
  require(window.size() == f.values.size(), Errc::GridMismatch, "window mask does not match grid");
  std::vector<cplx> out(f.values.size());
  const double half_b2 = 0.5 * beta * beta;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!window[i]) continue;
    const double ph = beta * sample.values[i];
    out[i] = f.values[i] * std::exp(half_b2 * sample.variance[i]) * cplx{std::cos(ph), std::sin(ph)} - 1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Second moments. On the circle every covariance is a function of the angle
// difference, K(u) = sum_m c_m e^{imu}, so
//   E|mu(f)|^2 = sum_m c_m |int f e^{im theta} d theta|^2
// with f read as its trigonometric interpolant.
// ---------------------------------------------------------------------------

namespace detail {

/// F_m = int f e^{i m theta} d theta for m in (-n/2, n/2], indexed m mod n.
inline std::vector<cplx> circle_moments(const TestFunction& f) {
  const std::size_t n = f.values.size();
  std::vector<cplx> data(f.values);
  const int shape[1] = {static_cast<int>(n)};
  fft::transform(data, shape, +1);
  const double h = 2.0 * std::numbers::pi / static_cast<double>(n);
  for (auto& v : data) v *= h;
  return data;
}

inline int signed_frequency(std::size_t j, std::size_t n) {
  const auto jj = static_cast<long long>(j);
  const auto nn = static_cast<long long>(n);
  return static_cast<int>(jj <= nn / 2 ? jj : jj - nn);
}

/// Fourier coefficients c_m = (1/2pi) int e^{beta^2 C_N(u)} e^{-imu} du,
/// |m| <= n/2, by the periodic trapezoid rule on a fine lag grid.
inline std::vector<double> truncated_kernel_coefficients(int modes, double beta, std::size_t n) {
  std::size_t lags = 4096;
  while (lags < 16 * static_cast<std::size_t>(modes) || lags < 2 * n) lags *= 2;
  // C_N on the lag grid through one real synthesis.
  fft::RealSynthesis synth(static_cast<int>(lags));
  std::vector<cplx> spec(lags / 2 + 1);
  for (int k = 1; k <= modes; ++k) spec[static_cast<std::size_t>(k)] = {0.5 / k, 0.0};
  std::vector<double> cn(lags);
  synth.execute(spec, cn);
  std::vector<cplx> e(lags);
  for (std::size_t l = 0; l < lags; ++l) e[l] = std::exp(beta * beta * cn[l]);
  const int shape[1] = {static_cast<int>(lags)};
  fft::transform(e, shape, -1);
  std::vector<double> c(n / 2 + 1);
  for (std::size_t m = 0; m < c.size(); ++m) c[m] = e[m].real() / static_cast<double>(lags);
  return c;
}

/// c_m = (1/2pi) int_0^{2pi} |2 sin(u/2)|^{-beta^2} cos(m u) du by adaptive
/// Gauss-Kronrod; the u^{-beta^2} endpoint singularity is removed with
/// u = v^p, p = 1/(1-beta^2).
inline double full_circle_coefficient(int m, double beta) {
  const double b2 = beta * beta;
  const double p = 1.0 / (1.0 - b2);
  const double vmax = std::pow(std::numbers::pi, 1.0 / p);
  auto integrand = [&](double v) {
    const double u = std::pow(v, p);
    const double jac = p * std::pow(v, p - 1.0);
    double core;
    if (u < 1e-8) {
      core = std::pow(v, p - 1.0 - p * b2) * std::pow(std::sin(0.5 * u) / (0.5 * u), -b2) * p;
      return core * std::cos(m * u);
    }
    return jac * std::pow(2.0 * std::sin(0.5 * u), -b2) * std::cos(m * u);
  };
  // Split so each piece holds a bounded number of oscillations.
  const int pieces = std::max(1, std::abs(m));
  double total = 0.0;
  for (int k = 0; k < pieces; ++k) {
    const double a = vmax * std::pow(double(k) / pieces, 1.0 / p);
    const double b = vmax * std::pow(double(k + 1) / pieces, 1.0 / p);
    total += quad::gauss_kronrod(integrand, a, b, 1e-14, 1e-13).value;
  }
  return total / std::numbers::pi;  // 2 * int_0^pi / (2 pi)
}

}  // namespace detail

/// Truncation of the field for second-moment purposes: circle Fourier modes
/// (`modes` > 0) or the kernel's own truncation (`modes` = 0).
inline double second_moment_analytic(const TestFunction& f, const Kernel& kernel, double beta, int circle_modes = 0) {
  const double b2 = beta * beta;
  if (std::holds_alternative<CircleKernel>(kernel)) {
    require(f.grid.is_circle(), Errc::GridMismatch, "circle kernel needs a circle test function");
    const std::size_t n = f.values.size();
    const auto fm = detail::circle_moments(f);
    std::vector<double> c;
    if (circle_modes > 0) {
      c = detail::truncated_kernel_coefficients(circle_modes, beta, n);
    } else {
      if (b2 >= 1.0) throw Error(Errc::DivergentMoment, "beta^2 >= d for the untruncated circle kernel");
      c.resize(n / 2 + 1);
      // Coefficients for f's nonzero frequencies only.
      for (std::size_t j = 0; j < n; ++j) {
        const int m = std::abs(detail::signed_frequency(j, n));
        if (std::norm(fm[j]) > 0.0 && c[static_cast<std::size_t>(m)] == 0.0)
          c[static_cast<std::size_t>(m)] = detail::full_circle_coefficient(m, beta);
      }
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const int m = std::abs(detail::signed_frequency(j, n));
      total += c[static_cast<std::size_t>(m)] * std::norm(fm[j]);
    }
    return total;
  }

  require(!f.grid.is_circle(), Errc::GridMismatch, "box kernel needs a box test function");
  require(kernel_dim(kernel) == f.dim(), Errc::GridMismatch, "kernel and test function dimensions differ");
  const bool bounded = std::holds_alternative<StarScaleKernel>(kernel) && std::get<StarScaleKernel>(kernel).truncated();
  if (!bounded && b2 >= f.dim()) throw Error(Errc::DivergentMoment, "beta^2 >= d for an untruncated log kernel");
  require(bounded || f.dim() == 1, Errc::InvalidArgument,
          "untruncated second moments on boxes are implemented for d = 1 only");

  const Grid& g = f.grid;
  const auto w = chaos_weights(g);
  const std::size_t n = g.size();
  double total = 0.0;
  if (bounded) {
    const auto& k = std::get<StarScaleKernel>(kernel);
    // Stationary kernel: tabulate over lag multi-indices.
    std::vector<double> table(n);
    for (std::size_t l = 0; l < n; ++l) {
      const auto idx = g.unflatten(l);
      double r2 = 0.0;
      for (int a = 0; a < g.dim(); ++a) {
        const double d = static_cast<double>(idx[static_cast<std::size_t>(a)]) * g.spacing(a);
        r2 += d * d;
      }
      table[l] = std::exp(b2 * k.of_distance(std::sqrt(r2)));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!f.support[i]) continue;
      const auto ii = g.unflatten(i);
      for (std::size_t j = 0; j < n; ++j) {
        if (!f.support[j]) continue;
        const auto jj = g.unflatten(j);
        std::array<std::size_t, kMaxDim> lag{0, 0, 0};
        for (int a = 0; a < g.dim(); ++a) {
          const auto ua = static_cast<std::size_t>(a);
          lag[ua] = ii[ua] > jj[ua] ? ii[ua] - jj[ua] : jj[ua] - ii[ua];
        }
        total += w[i] * w[j] * (f.values[i] * std::conj(f.values[j])).real() * table[g.flatten(lag)];
      }
    }
    return total;
  }

  // d = 1, singular kernel C = -log|x-y| + R(x,y): off-diagonal nodes are
  // summed directly; each diagonal cell uses the exact cell average of
  // |x-y|^{-beta^2}, 2 h^{-beta^2} / ((1-beta^2)(2-beta^2)).
  const double h = g.spacing(0);
  const double cell_mean = 2.0 * std::pow(h, -b2) / ((1.0 - b2) * (2.0 - b2));
  auto regular_diag = [&](const Point& x) {
    return std::visit(
        [&](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, LogKernel>) {
            return k.regular(x, x);
          } else if constexpr (std::is_same_v<K, StarScaleKernel>) {
            const double r = 1e-9;
            return k.of_distance(r) + std::log(r);
          } else {
            return 0.0;
          }
        },
        kernel);
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (!f.support[i]) continue;
    const Point xi = g.point(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (!f.support[j]) continue;
      const double fij = (f.values[i] * std::conj(f.values[j])).real();
      if (i == j) {
        total += w[i] * w[i] * fij * std::exp(b2 * regular_diag(xi)) * cell_mean;
      } else {
        total += w[i] * w[j] * fij * std::exp(b2 * covariance(kernel, xi, g.point(j)));
      }
    }
  }
  return total;
}

/// E|mu_N(f) - mu_M(f)|^2 = S_M - S_N for N <= M, where S_J = E|mu_J(f)|^2,
/// because E[mu_N conj(mu_M)] = S_min(N,M).
inline double truncation_gap(int n_modes, int m_modes, const TestFunction& f, double beta) {
  require(f.grid.is_circle(), Errc::GridMismatch, "truncation gap is defined for circle test functions");
  require(n_modes >= 1 && m_modes >= 1, Errc::InvalidArgument, "mode counts must be >= 1");
  if (n_modes == m_modes) return 0.0;
  const int lo = std::min(n_modes, m_modes);
  const int hi = std::max(n_modes, m_modes);
  const CircleKernel circle;
  return second_moment_analytic(f, circle, beta, hi) - second_moment_analytic(f, circle, beta, lo);
}

// ---------------------------------------------------------------------------
// Negative Sobolev norms.
//
// Box grids: the field u (supported strictly inside the window) is embedded in
// a zero-padded periodic box of P_a = padding * n_a points per axis, spacing
// h_a, side L_a = P_a h_a. With
//   u^(m) = (prod_a h_a) * sum_j u_j e^{-2 pi i m.j / P}        (approx. u^(m/L))
// the returned value is
//   sqrt( sum_m (1 + |m/L|^2)^{-s} |u^(m)|^2 * prod_a (1/L_a) ),
// a Riemann sum for int (1+|xi|^2)^{-s} |u^(xi)|^2 d xi with
// u^(xi) = int u(x) e^{-2 pi i xi.x} dx.
//
// Circle grids: with c_m = (1/n) sum_j u_j e^{-i m theta_j}, |m| <= n/2,
//   ||u||^2 = 2 pi * sum_m (1 + m^2)^{-s} |c_m|^2,
// so s = 0 returns the L^2 norm in both cases.
// ---------------------------------------------------------------------------

struct SobolevSpec {
  double s = 1.0;   // order -s, s > d/2
  int padding = 4;  // >= 4

  static SobolevSpec for_dimension(int d, double eps = 0.5) { return {0.5 * d + eps, 4}; }
};

inline double sobolev_neg_norm(std::span<const cplx> field, const Grid& grid, const SobolevSpec& spec) {
  require(field.size() == grid.size(), Errc::GridMismatch, "field does not match grid");
  require(spec.s > 0.5 * grid.dim(), Errc::InvalidArgument, "Sobolev order needs s > d/2");
  require(spec.padding >= 4, Errc::InvalidArgument, "padding factor must be >= 4");

  if (grid.is_circle()) {
    const std::size_t n = field.size();
    std::vector<cplx> data(field.begin(), field.end());
    const int shape[1] = {static_cast<int>(n)};
    fft::transform(data, shape, -1);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double m = detail::signed_frequency(j, n);
      acc += std::pow(1.0 + m * m, -spec.s) * std::norm(data[j] / static_cast<double>(n));
    }
    return std::sqrt(2.0 * std::numbers::pi * acc);
  }

  const int d = grid.dim();
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field[i] == cplx{}) continue;
    const auto idx = grid.unflatten(i);
    for (int a = 0; a < d; ++a) {
      const auto j = idx[static_cast<std::size_t>(a)];
      if (j == 0 || j + 1 == grid.extent(a))
        throw Error(Errc::SupportTouchesBoundary, "field support reaches the window edge");
    }
  }

  std::vector<int> shape(static_cast<std::size_t>(d));
  std::size_t total = 1;
  double cell = 1.0;
  for (int a = 0; a < d; ++a) {
    shape[static_cast<std::size_t>(a)] = spec.padding * static_cast<int>(grid.extent(a));
    total *= static_cast<std::size_t>(shape[static_cast<std::size_t>(a)]);
    cell *= grid.spacing(a);
  }
  std::vector<cplx> data(total);
  for (std::size_t i = 0; i < field.size(); ++i) {
    const auto idx = grid.unflatten(i);
    std::size_t flat = 0;
    for (int a = 0; a < d; ++a)
      flat = flat * static_cast<std::size_t>(shape[static_cast<std::size_t>(a)]) + idx[static_cast<std::size_t>(a)];
    data[flat] = field[i];
  }
  fft::transform(data, shape, -1);

  double inv_volume = 1.0;
  std::array<double, kMaxDim> side{};
  for (int a = 0; a < d; ++a) {
    side[static_cast<std::size_t>(a)] = shape[static_cast<std::size_t>(a)] * grid.spacing(a);
    inv_volume /= side[static_cast<std::size_t>(a)];
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rem = i;
    double xi2 = 0.0;
    for (int a = d - 1; a >= 0; --a) {
      const auto p = static_cast<std::size_t>(shape[static_cast<std::size_t>(a)]);
      const double xi = detail::signed_frequency(rem % p, p) / side[static_cast<std::size_t>(a)];
      rem /= p;
      xi2 += xi * xi;
    }
    acc += std::pow(1.0 + xi2, -spec.s) * std::norm(data[i] * cell);
  }
  return std::sqrt(acc * inv_volume);
}

}  // namespace imchaos
