#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "imchaos/chaos.hpp"
#include "imchaos/error.hpp"
#include "imchaos/fft.hpp"
#include "imchaos/grid.hpp"
#include "imchaos/quadrature.hpp"

namespace imchaos {

/// Real phase a on the grid of a test function, with solver diagnostics.
struct PhaseProfile {
  Grid grid = Grid::interval(2);
  std::vector<double> values;
  double epsilon = 0.0;      // mollifier width of the accepted solve (0: none)
  double s1 = 0.0, s2 = 0.0; // Newton parameters
  double residual = 0.0;     // |int f e^{i beta a} - z0| on the grid
  cplx target{};
  int iterations = 0;
  double mix = 0.0;          // bisection parameter for nonzero targets
  double phase_shift = 0.0;  // constant added in the last step
};

struct PerturbationPair {
  std::vector<double> g1, g2;
  cplx theta1, theta2;
  std::size_t index1 = 0, index2 = 0;  // positions in the dictionary
};

struct PhaseOptions {
  double newton_tolerance = 1e-10;
  int max_iterations = 50;
  double trust_radius = 2.0;
  std::vector<double> schedule = default_schedule();
  double det_threshold = 0.1;
  double margin = 1e-3;
  int scan_points = 64;
  /// Replaces the built-in dictionary when non-empty.
  std::vector<std::vector<double>> dictionary;

  static std::vector<double> default_schedule() {
    std::vector<double> s;
    for (int k = 0; k <= 12; ++k) s.push_back(0.1 * std::ldexp(1.0, -k));
    return s;
  }
};

/// int f e^{i beta a} with the chaos quadrature.
inline cplx phase_integral(const TestFunction& f, std::span<const double> a, double beta) {
  const auto w = chaos_weights(f.grid);
  cplx acc{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (f.values[i] == cplx{}) continue;
    acc += w[i] * f.values[i] * std::polar(1.0, beta * a[i]);
  }
  return acc;
}

/// rho_eps * a with the unit-mass bump rho(x) ~ exp(-1/(1-|x|^2)), discrete
/// normalisation, and zero extension outside the grid. Widths below the grid
/// spacing return `a` unchanged.
inline std::vector<double> mollify(const Grid& grid, std::span<const double> a, double eps) {
  require(!grid.is_circle(), Errc::InvalidArgument, "mollification is implemented for box grids");
  require(a.size() == grid.size(), Errc::GridMismatch, "phase does not match grid");
  const int d = grid.dim();
  std::array<std::size_t, kMaxDim> radius{0, 0, 0};
  bool any = false;
  for (int a_ = 0; a_ < d; ++a_) {
    radius[static_cast<std::size_t>(a_)] = static_cast<std::size_t>(std::floor(eps / grid.spacing(a_)));
    any = any || radius[static_cast<std::size_t>(a_)] > 0;
  }
  if (!(eps > 0.0) || !any) return {a.begin(), a.end()};

  std::vector<int> shape(static_cast<std::size_t>(d));
  std::size_t total = 1;
  for (int ax = 0; ax < d; ++ax) {
    const auto ua = static_cast<std::size_t>(ax);
    std::size_t p = 1;
    while (p < grid.extent(ax) + radius[ua] + 1) p <<= 1;
    shape[ua] = static_cast<int>(p);
    total *= p;
  }
  auto flat = [&](const std::array<std::size_t, kMaxDim>& idx) {
    std::size_t f = 0;
    for (int ax = 0; ax < d; ++ax)
      f = f * static_cast<std::size_t>(shape[static_cast<std::size_t>(ax)]) + idx[static_cast<std::size_t>(ax)];
    return f;
  };

  std::vector<cplx> data(total), kern(total);
  for (std::size_t i = 0; i < a.size(); ++i) data[flat(grid.unflatten(i))] = a[i];

  // Kernel at signed offsets, wrapped into the padded box.
  double mass = 0.0;
  std::array<std::size_t, kMaxDim> idx{0, 0, 0};
  std::size_t count = 1;
  for (int ax = 0; ax < d; ++ax) count *= 2 * radius[static_cast<std::size_t>(ax)] + 1;
  for (std::size_t c = 0; c < count; ++c) {
    std::size_t rem = c;
    double r2 = 0.0;
    for (int ax = d - 1; ax >= 0; --ax) {
      const auto ua = static_cast<std::size_t>(ax);
      const std::size_t span = 2 * radius[ua] + 1;
      const auto off = static_cast<std::ptrdiff_t>(rem % span) - static_cast<std::ptrdiff_t>(radius[ua]);
      rem /= span;
      const double x = static_cast<double>(off) * grid.spacing(ax) / eps;
      r2 += x * x;
      const auto p = static_cast<std::ptrdiff_t>(shape[ua]);
      idx[ua] = static_cast<std::size_t>((off + p) % p);
    }
    if (r2 >= 1.0) continue;
    const double v = std::exp(-1.0 / (1.0 - r2));
    kern[flat(idx)] = v;
    mass += v;
  }
  fft::transform(data, shape, -1);
  fft::transform(kern, shape, -1);
  const double scale = 1.0 / (mass * static_cast<double>(total));
  for (std::size_t i = 0; i < total; ++i) data[i] *= kern[i] * scale;
  fft::transform(data, shape, +1);

  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = data[flat(grid.unflatten(i))].real();
  return out;
}

namespace detail {

inline double l1_norm_required(const TestFunction& f) {
  if (!(f.l1 > 0.0)) throw Error(Errc::ZeroFunction, "test function has zero L1 norm");
  return f.l1;
}

/// v = -arg(f)/beta, zero off the support.
inline std::vector<double> argument_phase(const TestFunction& f, double beta) {
  std::vector<double> v(f.values.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (f.values[i] != cplx{}) v[i] = -std::arg(f.values[i]) / beta;
  return v;
}

/// Smallest index box containing supp f, per axis.
inline std::array<std::array<std::size_t, 2>, kMaxDim> support_box(const TestFunction& f) {
  std::array<std::array<std::size_t, 2>, kMaxDim> box{};
  for (int ax = 0; ax < kMaxDim; ++ax) box[static_cast<std::size_t>(ax)] = {SIZE_MAX, 0};
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    if (!f.support[i]) continue;
    const auto idx = f.grid.unflatten(i);
    for (int ax = 0; ax < f.dim(); ++ax) {
      auto& b = box[static_cast<std::size_t>(ax)];
      b[0] = std::min(b[0], idx[static_cast<std::size_t>(ax)]);
      b[1] = std::max(b[1], idx[static_cast<std::size_t>(ax)]);
    }
  }
  return box;
}

}  // namespace detail

/// Built-in dictionary: bump windows on the four quarters of supp f along the
/// last axis, modulated by
/// {1, sin(pi u), cos(pi u), sin(2 pi u)}; other axes carry a plain bump over
/// the support box.
inline std::vector<std::vector<double>> perturbation_dictionary(const TestFunction& f) {
  const Grid& g = f.grid;
  const int d = g.dim();
  const auto box = detail::support_box(f);
  const int last = d - 1;
  const double a = g.coordinate(last, box[static_cast<std::size_t>(last)][0]);
  const double b = g.coordinate(last, box[static_cast<std::size_t>(last)][1]);
  const double half = 0.25 * (b - a);
  auto bump = [](double u) { return std::abs(u) < 1.0 ? std::exp(-1.0 / (1.0 - u * u)) : 0.0; };

  std::vector<std::vector<double>> dict;
  for (int q = 0; q < 4; ++q) {
    const double centre = a + (q + 0.5) * half;
    for (int mod = 0; mod < 4; ++mod) {
      std::vector<double> e(g.size(), 0.0);
      for (std::size_t i = 0; i < e.size(); ++i) {
        if (!f.support[i]) continue;
        const Point p = g.point(i);
        double v = 1.0;
        for (int ax = 0; ax < last; ++ax) {
          const auto& bx = box[static_cast<std::size_t>(ax)];
          const double lo = g.coordinate(ax, bx[0]);
          const double hi = g.coordinate(ax, bx[1]);
          v *= hi > lo ? bump((2.0 * p[static_cast<std::size_t>(ax)] - lo - hi) / (hi - lo)) : 1.0;
        }
        const double u = half > 0.0 ? (p[static_cast<std::size_t>(last)] - centre) / half : 0.0;
        v *= bump(u);
        switch (mod) {
          case 1: v *= std::sin(std::numbers::pi * u); break;
          case 2: v *= std::cos(std::numbers::pi * u); break;
          case 3: v *= std::sin(2.0 * std::numbers::pi * u); break;
          default: break;
        }
        e[i] = v;
      }
      dict.push_back(std::move(e));
    }
  }
  return dict;
}

/// Response d/ds int f e^{i(beta a + s g)} at s = 0, i.e. int i f g e^{i beta a}.
inline cplx perturbation_response(const TestFunction& f, std::span<const double> a, std::span<const double> g,
                                  double beta) {
  const auto w = chaos_weights(f.grid);
  cplx acc{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (f.values[i] == cplx{} || g[i] == 0.0) continue;
    acc += w[i] * g[i] * f.values[i] * std::polar(1.0, beta * a[i]);
  }
  return cplx{0.0, 1.0} * acc;
}

/// The pair with the largest |det [Re th1, Re th2; Im th1, Im th2]| among those
/// with |det| >= threshold * |th1| |th2|.
inline PerturbationPair select_perturbations(const TestFunction& f, std::span<const double> a, double beta,
                                             const std::vector<std::vector<double>>& dict, double threshold) {
  std::vector<cplx> theta(dict.size());
  for (std::size_t k = 0; k < dict.size(); ++k) theta[k] = perturbation_response(f, a, dict[k], beta);
  double best = -1.0;
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < dict.size(); ++i) {
    for (std::size_t j = i + 1; j < dict.size(); ++j) {
      const double det = std::abs(theta[i].real() * theta[j].imag() - theta[j].real() * theta[i].imag());
      const double scale = std::abs(theta[i]) * std::abs(theta[j]);
      if (scale > 0.0 && det >= threshold * scale && det > best) {
        best = det;
        bi = i;
        bj = j;
      }
    }
  }
  if (best <= 0.0) throw Error(Errc::DegeneratePerturbations, "no dictionary pair is linearly independent");
  return {dict[bi], dict[bj], theta[bi], theta[bj], bi, bj};
}

/// a = v + b(x_d), where b is (2 pi / (beta ||f||_1)) times the running
/// integral of |f| along the last axis; b winds exactly once, so
/// int f e^{i beta a} = 0 up to quadrature error.
inline PhaseProfile zero_phase(const TestFunction& f, double beta) {
  require(!f.grid.is_circle(), Errc::InvalidArgument, "phase construction needs a box grid");
  require(beta > 0.0, Errc::InvalidArgument, "beta must be positive");
  const double l1 = detail::l1_norm_required(f);
  const Grid& g = f.grid;
  const int last = g.dim() - 1;
  const std::size_t nl = g.extent(last);

  // Marginal of |f| on the last axis, integrated over the others.
  std::vector<double> marginal(nl, 0.0);
  {
    std::vector<double> other(g.size(), 1.0);
    for (int ax = 0; ax < last; ++ax) {
      const auto w1 = Grid::simpson_1d(g.extent(ax), g.spacing(ax));
      for (std::size_t i = 0; i < g.size(); ++i) other[i] *= w1[g.unflatten(i)[static_cast<std::size_t>(ax)]];
    }
    for (std::size_t i = 0; i < g.size(); ++i)
      marginal[g.unflatten(i)[static_cast<std::size_t>(last)]] += other[i] * std::abs(f.values[i]);
  }
  auto cum = quad::cumulative(marginal, g.spacing(last));
  // Normalise by the computed total so the winding is exactly one turn.
  const double total = cum.back() > 0.0 ? cum.back() : l1;
  const double scale = 2.0 * std::numbers::pi / (beta * total);

  PhaseProfile p;
  p.grid = g;
  p.values = detail::argument_phase(f, beta);
  for (std::size_t i = 0; i < g.size(); ++i) p.values[i] += scale * cum[g.unflatten(i)[static_cast<std::size_t>(last)]];
  p.residual = std::abs(phase_integral(f, p.values, beta));
  return p;
}

namespace detail {

struct NewtonOutcome {
  bool converged = false;
  double s1 = 0.0, s2 = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Damped Newton for int f e^{i(beta m + s1 g1 + s2 g2)} = target over (s1,s2).
inline NewtonOutcome newton_phase(const TestFunction& f, std::span<const double> m, const PerturbationPair& pair,
                                  double beta, cplx target, const PhaseOptions& opt) {
  const auto w = chaos_weights(f.grid);
  const std::size_t n = m.size();
  auto eval = [&](double s1, double s2, cplx* d1, cplx* d2) {
    cplx eta{}, j1{}, j2{};
    for (std::size_t i = 0; i < n; ++i) {
      if (f.values[i] == cplx{}) continue;
      const cplx t = w[i] * f.values[i] * std::polar(1.0, beta * m[i] + s1 * pair.g1[i] + s2 * pair.g2[i]);
      eta += t;
      if (d1) {
        j1 += pair.g1[i] * t;
        j2 += pair.g2[i] * t;
      }
    }
    if (d1) {
      *d1 = cplx{0.0, 1.0} * j1;
      *d2 = cplx{0.0, 1.0} * j2;
    }
    return eta - target;
  };

  NewtonOutcome out;
  double s1 = 0.0, s2 = 0.0;
  cplx d1, d2;
  cplx r = eval(s1, s2, &d1, &d2);
  for (int it = 0; it <= opt.max_iterations; ++it) {
    out.iterations = it;
    if (std::abs(r) <= opt.newton_tolerance) {
      out = {true, s1, s2, std::abs(r), it};
      return out;
    }
    if (it == opt.max_iterations) break;
    const double det = d1.real() * d2.imag() - d2.real() * d1.imag();
    if (det == 0.0 || !std::isfinite(det)) break;
    // Solve [Re d1, Re d2; Im d1, Im d2] x = -r.
    const double x1 = (-r.real() * d2.imag() + r.imag() * d2.real()) / det;
    const double x2 = (-d1.real() * r.imag() + d1.imag() * r.real()) / det;
    double t = 1.0;
    const double f0 = std::norm(r);
    bool accepted = false;
    for (int half = 0; half < 40; ++half) {
      const double n1 = s1 + t * x1, n2 = s2 + t * x2;
      const cplx rn = eval(n1, n2, nullptr, nullptr);
      if (std::norm(rn) <= (1.0 - 1e-4 * t) * f0) {
        s1 = n1;
        s2 = n2;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    if (std::hypot(s1, s2) > opt.trust_radius) break;
    r = eval(s1, s2, &d1, &d2);
  }
  out.converged = false;
  out.s1 = s1;
  out.s2 = s2;
  out.residual = std::abs(r);
  return out;
}

}  // namespace detail

/// Mollified zero phase: for each width in the schedule, solve
/// int f e^{i beta (rho_eps * a_hat + (s1 g1 + s2 g2)/beta)} = 0 by Newton and
/// return the first converged profile.
inline PhaseProfile smooth_zero_phase(const TestFunction& f, double beta, const PhaseOptions& opt = {}) {
  const PhaseProfile base = zero_phase(f, beta);
  require(!opt.schedule.empty(), Errc::InvalidArgument, "empty mollifier schedule");
  const auto dict = opt.dictionary.empty() ? perturbation_dictionary(f) : opt.dictionary;
  for (const auto& e : dict)
    require(e.size() == f.values.size(), Errc::GridMismatch, "dictionary element does not match grid");

  std::optional<PerturbationPair> pair;
  for (double eps : opt.schedule) {
    const auto m = mollify(f.grid, base.values, eps);
    if (!pair) pair = select_perturbations(f, m, beta, dict, opt.det_threshold);
    const auto r = detail::newton_phase(f, m, *pair, beta, cplx{}, opt);
    if (!r.converged) continue;
    PhaseProfile p;
    p.grid = f.grid;
    p.values = m;
    for (std::size_t i = 0; i < m.size(); ++i) p.values[i] += (r.s1 * pair->g1[i] + r.s2 * pair->g2[i]) / beta;
    p.epsilon = eps;
    p.s1 = r.s1;
    p.s2 = r.s2;
    p.iterations = r.iterations;
    p.residual = std::abs(phase_integral(f, p.values, beta));
    return p;
  }
  throw Error(Errc::NoConvergence, "Newton failed for every mollifier width in the schedule");
}

/// Phase with int f e^{i beta a} = z0 for |z0| < ||f||_1 (1 - margin).
///
/// With a0 the smooth zero phase and b_lam = (1-lam)(rho_lam * v) + lam a0,
/// |int f e^{i beta b_lam}| runs from ||f||_1 (lam = 0) to 0 (lam = 1). The
/// leftmost sign change on a uniform scan is refined by bisection, and the
/// constant (arg z0 - arg int f e^{i beta b_lam})/beta fixes the argument.
inline PhaseProfile phase_for_target(const TestFunction& f, double beta, cplx z0, const PhaseOptions& opt = {}) {
  const double l1 = detail::l1_norm_required(f);
  if (std::abs(z0) >= l1 * (1.0 - opt.margin))
    throw Error(Errc::TargetTooLarge, "|z0| must be below ||f||_1 (1 - margin)");
  PhaseProfile a0 = smooth_zero_phase(f, beta, opt);
  if (z0 == cplx{}) return a0;

  const auto v = detail::argument_phase(f, beta);
  const double target = std::abs(z0);
  auto blend = [&](double lam) {
    auto b = mollify(f.grid, v, lam);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = (1.0 - lam) * b[i] + lam * a0.values[i];
    return b;
  };
  auto gap = [&](double lam) { return std::abs(phase_integral(f, blend(lam), beta)) - target; };

  const int scan = std::max(opt.scan_points, 2);
  double lo = 0.0, hi = 0.0;
  double glo = gap(0.0);
  bool bracketed = false;
  for (int k = 1; k <= scan; ++k) {
    const double lam = static_cast<double>(k) / scan;
    const double gk = gap(lam);
    if ((glo > 0.0) != (gk > 0.0) || gk == 0.0) {
      lo = static_cast<double>(k - 1) / scan;
      hi = lam;
      bracketed = true;
      break;
    }
    glo = gk;
  }
  if (!bracketed) throw Error(Errc::NonUnimodalBracket, "no sign change of |int f e^{i beta b}| - |z0| on [0,1]");

  const double tol = 1e-13 * l1;
  double glo_v = gap(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = gap(mid);
    if (std::abs(gm) <= tol) {
      lo = hi = mid;
      break;
    }
    if ((gm > 0.0) == (glo_v > 0.0)) {
      lo = mid;
      glo_v = gm;
    } else {
      hi = mid;
    }
  }
  const double lam = std::abs(gap(lo)) <= std::abs(gap(hi)) ? lo : hi;

  PhaseProfile p;
  p.grid = f.grid;
  p.values = blend(lam);
  const cplx reached = phase_integral(f, p.values, beta);
  p.phase_shift = (std::arg(z0) - std::arg(reached)) / beta;
  for (auto& x : p.values) x += p.phase_shift;
  p.epsilon = lam;
  p.mix = lam;
  p.s1 = a0.s1;
  p.s2 = a0.s2;
  p.iterations = a0.iterations;
  p.target = z0;
  p.residual = std::abs(phase_integral(f, p.values, beta) - z0);
  return p;
}

/// |int f e^{i beta a} - z0| recomputed on the grid refined 2x per axis, with a
/// interpolated cubically and f taken from its exact evaluator when available.
inline double verify_phase(const TestFunction& f, double beta, const PhaseProfile& profile, cplx z0) {
  const Grid& g = f.grid;
  require(profile.values.size() == g.size(), Errc::GridMismatch, "profile does not match grid");
  require(!g.is_circle(), Errc::InvalidArgument, "verification is implemented for box grids");
  const int d = g.dim();
  std::vector<std::size_t> shape;
  std::vector<double> lo, hi;
  for (int ax = 0; ax < d; ++ax) {
    shape.push_back(2 * (g.extent(ax) - 1) + 1);
    lo.push_back(g.lo(ax));
    hi.push_back(g.hi(ax));
  }
  const Grid fine = Grid::box(shape, lo, hi);
  const auto w = chaos_weights(fine);

  // Tensor-product cubic interpolation of grid data at a point.
  auto interp = [&](auto const& data, const Point& x) {
    using T = std::decay_t<decltype(data[0])>;
    std::array<std::array<std::size_t, 4>, kMaxDim> nodes{};
    std::array<std::array<double, 4>, kMaxDim> coef{};
    std::array<int, kMaxDim> count{1, 1, 1};
    for (int ax = 0; ax < d; ++ax) {
      const auto ua = static_cast<std::size_t>(ax);
      const std::size_t n = g.extent(ax);
      const double u = (x[ua] - g.lo(ax)) / g.spacing(ax);
      if (n < 4) {
        const auto j = std::min(static_cast<std::size_t>(std::max(u, 0.0)), n - 2);
        const double t = u - static_cast<double>(j);
        nodes[ua] = {j, j + 1, 0, 0};
        coef[ua] = {1.0 - t, t, 0.0, 0.0};
        count[ua] = 2;
        continue;
      }
      auto j = static_cast<std::ptrdiff_t>(std::floor(u)) - 1;
      j = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(n) - 4);
      const double t = u - static_cast<double>(j);
      for (int k = 0; k < 4; ++k) nodes[ua][static_cast<std::size_t>(k)] = static_cast<std::size_t>(j + k);
      coef[ua] = {-(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0, t * (t - 2.0) * (t - 3.0) / 2.0,
                  -t * (t - 1.0) * (t - 3.0) / 2.0, t * (t - 1.0) * (t - 2.0) / 6.0};
      count[ua] = 4;
    }
    T acc{};
    for (int i0 = 0; i0 < count[0]; ++i0)
      for (int i1 = 0; i1 < count[1]; ++i1)
        for (int i2 = 0; i2 < count[2]; ++i2) {
          const std::array<int, 3> k{i0, i1, i2};
          std::array<std::size_t, kMaxDim> idx{0, 0, 0};
          double c = 1.0;
          for (int ax = 0; ax < d; ++ax) {
            const auto ua = static_cast<std::size_t>(ax);
            idx[ua] = nodes[ua][static_cast<std::size_t>(k[ua])];
            c *= coef[ua][static_cast<std::size_t>(k[ua])];
          }
          acc += c * data[g.flatten(idx)];
        }
    return acc;
  };

  cplx acc{};
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const Point x = fine.point(i);
    const cplx fv = f.exact ? f.exact(x) : interp(f.values, x);
    if (fv == cplx{}) continue;
    const double a = interp(profile.values, x);
    acc += w[i] * fv * std::polar(1.0, beta * a);
  }
  return std::abs(acc - z0);
}

}  // namespace imchaos
