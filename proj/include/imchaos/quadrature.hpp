#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <span>
#include <vector>

#include "imchaos/error.hpp"

namespace imchaos::quad {

namespace detail {

template <class F>
double simpson_step(F& f, double a, double fa, double b, double fb, double m, double fm, double whole,
                    double tol, int depth, int& evals) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  evals += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, evals) +
         simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, evals);
}

}  // namespace detail

/// Adaptive Simpson with Richardson correction; `abs_tol` is split between
/// halves at every refinement.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double abs_tol = 1e-10, int max_depth = 48) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  int evals = 3;
  return detail::simpson_step(f, a, fa, b, fb, m, fm, whole, abs_tol, max_depth, evals);
}

/// Result of a Gauss-Kronrod integration.
struct GkResult {
  double value = 0.0;
  double error = 0.0;
  int intervals = 0;
};

/// Globally adaptive 7/15-point Gauss-Kronrod. Endpoints are never evaluated,
/// so integrable endpoint singularities are tolerated (slowly).
template <class F>
GkResult gauss_kronrod(F&& f, double a, double b, double abs_tol = 1e-12, double rel_tol = 1e-12,
                       int max_intervals = 4000) {
  static constexpr std::array<double, 8> xk = {
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
  static constexpr std::array<double, 8> wk = {
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr std::array<double, 4> wg = {
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

  struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
  };
  auto rule = [&](double lo, double hi) {
    const double c = 0.5 * (lo + hi);
    const double h = 0.5 * (hi - lo);
    const double fc = f(c);
    double kron = wk[7] * fc;
    double gauss = wg[3] * fc;
    for (int j = 0; j < 7; ++j) {
      const double dx = h * xk[static_cast<std::size_t>(j)];
      const double s = f(c - dx) + f(c + dx);
      kron += wk[static_cast<std::size_t>(j)] * s;
      if (j % 2 == 1) gauss += wg[static_cast<std::size_t>(j / 2)] * s;
    }
    return Segment{lo, hi, kron * h, std::abs((kron - gauss) * h)};
  };

  std::priority_queue<Segment> heap;
  heap.push(rule(a, b));
  double total = heap.top().value;
  double err = heap.top().error;
  int count = 1;
  while (err > std::max(abs_tol, rel_tol * std::abs(total)) && count < max_intervals) {
    const Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const Segment l = rule(worst.a, mid);
    const Segment r = rule(mid, worst.b);
    total += l.value + r.value - worst.value;
    err += l.error + r.error - worst.error;
    heap.push(l);
    heap.push(r);
    ++count;
  }
  // Re-add in a fixed order to shed accumulated cancellation error.
  double sum = 0.0;
  double esum = 0.0;
  std::vector<Segment> segs;
  segs.reserve(heap.size());
  while (!heap.empty()) {
    segs.push_back(heap.top());
    heap.pop();
  }
  std::sort(segs.begin(), segs.end(), [](const Segment& x, const Segment& y) { return x.a < y.a; });
  for (const auto& s : segs) {
    sum += s.value;
    esum += s.error;
  }
  return {sum, esum, count};
}

/// Running integral of uniformly spaced samples; each cell uses the cubic
/// through its four nearest samples (fourth-order accurate).
inline std::vector<double> cumulative(std::span<const double> v, double h) {
  const std::size_t n = v.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double cell;
    if (n < 4) {
      cell = 0.5 * h * (v[i] + v[i + 1]);
    } else if (i == 0) {
      cell = h * (9.0 * v[0] + 19.0 * v[1] - 5.0 * v[2] + v[3]) / 24.0;
    } else if (i + 2 == n) {
      cell = h * (v[n - 4] - 5.0 * v[n - 3] + 19.0 * v[n - 2] + 9.0 * v[n - 1]) / 24.0;
    } else {
      cell = h * (-v[i - 1] + 13.0 * v[i] + 13.0 * v[i + 1] - v[i + 2]) / 24.0;
    }
    out[i + 1] = out[i] + cell;
  }
  return out;
}

/// Four-point Lagrange interpolation of samples taken at x0 + j*h. The stencil
/// is clamped at both ends; outside the sampled range the edge value is held.
template <class T>
T cubic_interpolate(std::span<const T> v, double x0, double h, double x) {
  const std::size_t n = v.size();
  if (n == 0) return T{};
  if (n == 1) return v[0];
  const double u = (x - x0) / h;
  if (u <= 0.0) return v.front();
  if (u >= static_cast<double>(n - 1)) return v.back();
  if (n < 4) {
    const auto j = static_cast<std::size_t>(u);
    const double t = u - static_cast<double>(j);
    return v[j] * (1.0 - t) + v[j + 1] * t;
  }
  auto j = static_cast<std::ptrdiff_t>(std::floor(u)) - 1;
  j = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(n) - 4);
  const double t = u - static_cast<double>(j);
  const double l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
  const double l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
  const double l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
  const double l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
  const auto k = static_cast<std::size_t>(j);
  return v[k] * l0 + v[k + 1] * l1 + v[k + 2] * l2 + v[k + 3] * l3;
}

}  // namespace imchaos::quad
