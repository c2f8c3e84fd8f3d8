#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "imchaos/error.hpp"
#include "imchaos/hash.hpp"

namespace imchaos {

inline constexpr int kMaxDim = 3;
using Point = std::array<double, kMaxDim>;

enum class Domain { Circle, Box };

/// Uniform sampling grid. A circle grid holds n angles 2*pi*i/n; a box grid is
/// a tensor product of closed intervals sampled endpoint-inclusive, flattened
/// row-major (last axis fastest).
class Grid {
 public:
  static Grid circle(std::size_t n) {
    require(n >= 2, Errc::InvalidArgument, "circle grid needs at least 2 points");
    Grid g;
    g.domain_ = Domain::Circle;
    g.dim_ = 1;
    g.shape_ = {n, 1, 1};
    g.lo_ = {0.0, 0.0, 0.0};
    g.hi_ = {2.0 * std::numbers::pi, 0.0, 0.0};
    return g;
  }

  static Grid box(const std::vector<std::size_t>& shape, const std::vector<double>& lo,
                  const std::vector<double>& hi) {
    const auto d = shape.size();
    require(d >= 1 && d <= kMaxDim && lo.size() == d && hi.size() == d, Errc::InvalidArgument,
            "box grid needs 1..3 axes with matching bounds");
    Grid g;
    g.domain_ = Domain::Box;
    g.dim_ = static_cast<int>(d);
    g.shape_ = {1, 1, 1};
    g.lo_ = {0.0, 0.0, 0.0};
    g.hi_ = {0.0, 0.0, 0.0};
    for (std::size_t a = 0; a < d; ++a) {
      require(shape[a] >= 2, Errc::InvalidArgument, "box axis needs at least 2 points");
      require(hi[a] > lo[a], Errc::InvalidArgument, "box axis needs hi > lo");
      g.shape_[a] = shape[a];
      g.lo_[a] = lo[a];
      g.hi_[a] = hi[a];
    }
    return g;
  }

  static Grid interval(std::size_t n, double a = 0.0, double b = 1.0) { return box({n}, {a}, {b}); }

  Domain domain() const noexcept { return domain_; }
  bool is_circle() const noexcept { return domain_ == Domain::Circle; }
  int dim() const noexcept { return dim_; }
  std::size_t extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  double lo(int axis) const { return lo_[static_cast<std::size_t>(axis)]; }
  double hi(int axis) const { return hi_[static_cast<std::size_t>(axis)]; }

  std::size_t size() const noexcept { return shape_[0] * shape_[1] * shape_[2]; }

  double spacing(int axis) const {
    const auto a = static_cast<std::size_t>(axis);
    if (is_circle()) return 2.0 * std::numbers::pi / static_cast<double>(shape_[0]);
    return (hi_[a] - lo_[a]) / static_cast<double>(shape_[a] - 1);
  }

  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim_; ++a) v *= spacing(a);
    return v;
  }

  std::array<std::size_t, kMaxDim> unflatten(std::size_t i) const {
    std::array<std::size_t, kMaxDim> idx{0, 0, 0};
    for (int a = dim_ - 1; a >= 0; --a) {
      const auto ua = static_cast<std::size_t>(a);
      idx[ua] = i % shape_[ua];
      i /= shape_[ua];
    }
    return idx;
  }

  std::size_t flatten(const std::array<std::size_t, kMaxDim>& idx) const {
    std::size_t i = 0;
    for (int a = 0; a < dim_; ++a) i = i * shape_[static_cast<std::size_t>(a)] + idx[static_cast<std::size_t>(a)];
    return i;
  }

  double coordinate(int axis, std::size_t j) const { return lo(axis) + spacing(axis) * static_cast<double>(j); }

  Point point(std::size_t i) const {
    const auto idx = unflatten(i);
    Point p{0.0, 0.0, 0.0};
    for (int a = 0; a < dim_; ++a) p[static_cast<std::size_t>(a)] = coordinate(a, idx[static_cast<std::size_t>(a)]);
    return p;
  }

  std::vector<double> axis_points(int axis) const {
    std::vector<double> out(extent(axis));
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = coordinate(axis, j);
    return out;
  }

  /// Trapezoid weights; exact for trigonometric polynomials on the circle.
  std::vector<double> trapezoid_weights() const {
    return tensor_weights([](std::size_t n, double h) {
      std::vector<double> w(n, h);
      w.front() *= 0.5;
      w.back() *= 0.5;
      return w;
    });
  }

  /// Composite Simpson per axis (3/8 rule on the last panel for even counts).
  /// On the circle this is the periodic trapezoid rule.
  std::vector<double> simpson_weights() const {
    return tensor_weights([](std::size_t n, double h) { return simpson_1d(n, h); });
  }

  static std::vector<double> simpson_1d(std::size_t n, double h) {
    std::vector<double> w(n, 0.0);
    if (n == 2) {
      w[0] = w[1] = 0.5 * h;
      return w;
    }
    if (n == 3) {
      w = {h / 3.0, 4.0 * h / 3.0, h / 3.0};
      return w;
    }
    std::size_t simpson_end = (n % 2 == 1) ? n - 1 : n - 4;
    for (std::size_t i = 0; i < simpson_end; i += 2) {
      w[i] += h / 3.0;
      w[i + 1] += 4.0 * h / 3.0;
      w[i + 2] += h / 3.0;
    }
    if (n % 2 == 0) {
      const double c = 3.0 * h / 8.0;
      w[n - 4] += c;
      w[n - 3] += 3.0 * c;
      w[n - 2] += 3.0 * c;
      w[n - 1] += c;
    }
    return w;
  }

  std::uint64_t hash() const {
    Fnv1a h;
    h.u64(static_cast<std::uint64_t>(domain_)).u64(static_cast<std::uint64_t>(dim_));
    for (std::size_t a = 0; a < kMaxDim; ++a) h.u64(shape_[a]).f64(lo_[a]).f64(hi_[a]);
    return h.value();
  }

  bool operator==(const Grid&) const = default;

 private:
  Grid() = default;

  template <class Rule>
  std::vector<double> tensor_weights(Rule rule) const {
    if (is_circle()) return std::vector<double>(size(), spacing(0));
    std::array<std::vector<double>, kMaxDim> axis_w;
    for (int a = 0; a < dim_; ++a) axis_w[static_cast<std::size_t>(a)] = rule(extent(a), spacing(a));
    std::vector<double> w(size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      const auto idx = unflatten(i);
      double v = 1.0;
      for (int a = 0; a < dim_; ++a) v *= axis_w[static_cast<std::size_t>(a)][idx[static_cast<std::size_t>(a)]];
      w[i] = v;
    }
    return w;
  }

  Domain domain_ = Domain::Box;
  int dim_ = 1;
  std::array<std::size_t, kMaxDim> shape_{1, 1, 1};
  std::array<double, kMaxDim> lo_{0.0, 0.0, 0.0};
  std::array<double, kMaxDim> hi_{0.0, 0.0, 0.0};
};

inline double euclidean_distance(const Point& x, const Point& y, int dim) {
  double s = 0.0;
  for (int a = 0; a < dim; ++a) {
    const double d = x[static_cast<std::size_t>(a)] - y[static_cast<std::size_t>(a)];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace imchaos
