#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "imchaos/error.hpp"
#include "imchaos/fft.hpp"
#include "imchaos/grid.hpp"
#include "imchaos/hash.hpp"
#include "imchaos/quadrature.hpp"

namespace imchaos {

inline constexpr double kDiagonalGuard = 1e-14;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// C(x,y) = -log|x-y| + g(x,y) on a box in R^d.
class LogKernel {
 public:
  using Regular = std::function<double(const Point&, const Point&)>;

  explicit LogKernel(int dim = 1, Regular g = {}, std::string id = "zero")
      : dim_(dim), g_(std::move(g)), id_(std::move(id)) {
    require(dim >= 1 && dim <= kMaxDim, Errc::InvalidArgument, "log kernel dimension must be 1..3");
  }

  int dim() const noexcept { return dim_; }
  const std::string& id() const noexcept { return id_; }

  double regular(const Point& x, const Point& y) const { return g_ ? g_(x, y) : 0.0; }

  double operator()(const Point& x, const Point& y) const {
    const double r = euclidean_distance(x, y, dim_);
    require(r >= kDiagonalGuard, Errc::DiagonalSingularity, "log kernel evaluated on the diagonal");
    return -std::log(r) + regular(x, y);
  }

 private:
  int dim_;
  Regular g_;
  std::string id_;
};

/// GFF covariance on the unit circle, parameterised by angles.
class CircleKernel {
 public:
  double operator()(double theta, double theta_prime) const {
    const double chord = 2.0 * std::abs(std::sin(0.5 * (theta - theta_prime)));
    require(chord >= kDiagonalGuard, Errc::DiagonalSingularity, "circle kernel on coincident angles");
    return -std::log(chord);
  }
  double operator()(const Point& x, const Point& y) const { return (*this)(x[0], y[0]); }

  /// C_N(u) = sum_{k<=N} cos(k u)/k, the covariance of the N-mode truncation.
  static double partial_sum(double u, int modes) {
    double s = 0.0;
    for (int k = 1; k <= modes; ++k) s += std::cos(k * u) / k;
    return s;
  }
};

/// Radial seed covariance k = (phi * phi) / ||phi||^2 for the bump
/// phi(x) = exp(-1/(1-|x/w|^2)); supported in |x| <= 2w with nonnegative
/// Fourier transform |phi^|^2.
class SeedCovariance {
 public:
  static constexpr std::size_t kProfilePoints = 4096;

  static SeedCovariance build(double width, int dim = 1) {
    if (!(width > 0.0 && width <= 0.5))
      throw Error(Errc::InvalidWidth, "seed bump width must lie in (0, 0.5]");
    require(dim >= 1 && dim <= kMaxDim, Errc::InvalidArgument, "seed dimension must be 1..3");

    // Self-convolution on a periodic box [-2,2)^d; the support radius 2w <= 1
    // never wraps.
    const int points = dim == 1 ? 65536 : (dim == 2 ? 1024 : 128);
    const double box = 4.0;
    const double h = box / points;
    std::vector<int> shape(static_cast<std::size_t>(dim), points);
    std::size_t total = 1;
    for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(points);
    std::vector<std::complex<double>> field(total);
    for (std::size_t i = 0; i < total; ++i) {
      std::size_t rem = i;
      double r2 = 0.0;
      for (int a = 0; a < dim; ++a) {
        const auto j = static_cast<int>(rem % static_cast<std::size_t>(points));
        rem /= static_cast<std::size_t>(points);
        const int signed_j = j < points / 2 ? j : j - points;
        const double x = signed_j * h / width;
        r2 += x * x;
      }
      field[i] = r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0;
    }
    fft::transform(field, shape, -1);
    for (auto& c : field) c = std::norm(c);
    fft::transform(field, shape, +1);

    // Samples at r = j*h, normalised so k(0) = 1.
    const auto axis_count = static_cast<std::size_t>(points / 2);
    std::vector<double> axis(axis_count);
    // The profile is radial, so the contiguous (last) axis serves.
    for (std::size_t j = 0; j < axis_count; ++j) axis[j] = field[j].real();
    const double k0 = axis[0];
    for (auto& v : axis) v /= k0;

    SeedCovariance seed;
    seed.width_ = width;
    seed.dim_ = dim;
    seed.decay_exponent_ = 0.5 * (dim + 1) + 1.0;
    seed.profile_.resize(kProfilePoints);
    const double dr = 1.0 / static_cast<double>(kProfilePoints - 1);
    const double support = 2.0 * width;
    for (std::size_t i = 0; i < kProfilePoints; ++i) {
      const double r = static_cast<double>(i) * dr;
      seed.profile_[i] = r >= support ? 0.0 : quad::cubic_interpolate<double>(axis, 0.0, h, r);
    }
    seed.profile_[0] = 1.0;
    return seed;
  }

  double operator()(double r) const {
    r = std::abs(r);
    if (r >= support_radius() || r >= 1.0) return 0.0;
    const double dr = 1.0 / static_cast<double>(kProfilePoints - 1);
    return quad::cubic_interpolate<double>(profile_, 0.0, dr, r);
  }

  double width() const noexcept { return width_; }
  int dim() const noexcept { return dim_; }
  double support_radius() const noexcept { return 2.0 * width_; }
  /// Polynomial decay order s of the Fourier transform; must exceed (d+1)/2.
  /// The transform of a smooth compactly supported profile decays faster than
  /// any power, so any admissible s holds.
  double decay_exponent() const noexcept { return decay_exponent_; }
  const std::vector<double>& profile() const noexcept { return profile_; }

 private:
  SeedCovariance() = default;
  double width_ = 0.5;
  int dim_ = 1;
  double decay_exponent_ = 2.0;
  std::vector<double> profile_;
};

/// Almost star-scale invariant covariance
///   L_t(x,y) = int_0^t k(e^u (x-y)) (1 - e^{-delta u}) du.
class StarScaleKernel {
 public:
  StarScaleKernel(std::shared_ptr<const SeedCovariance> seed, double delta, double t = kInf)
      : seed_(std::move(seed)), delta_(delta), t_(t) {
    require(seed_ != nullptr, Errc::InvalidArgument, "star-scale kernel needs a seed");
    require(delta > 0.0, Errc::InvalidArgument, "delta must be positive");
    require(t >= 0.0, Errc::InvalidArgument, "truncation t must be nonnegative");
  }

  int dim() const noexcept { return seed_->dim(); }
  double delta() const noexcept { return delta_; }
  double truncation() const noexcept { return t_; }
  bool truncated() const noexcept { return std::isfinite(t_); }
  const SeedCovariance& seed() const noexcept { return *seed_; }
  std::shared_ptr<const SeedCovariance> seed_ptr() const noexcept { return seed_; }

  /// t - (1 - e^{-delta t})/delta, the exact on-diagonal value since k(0) = 1.
  static double truncated_variance(double delta, double t) { return t + std::expm1(-delta * t) / delta; }

  double of_distance(double r) const {
    if (r < kDiagonalGuard) {
      require(truncated(), Errc::DiagonalSingularity, "untruncated star-scale kernel on the diagonal");
      return truncated_variance(delta_, t_);
    }
    if (r >= 1.0) return 0.0;
    const double upper = std::min(t_, std::log(seed_->support_radius() / r));
    if (upper <= 0.0) return 0.0;
    const auto& k = *seed_;
    const double delta = delta_;
    return quad::adaptive_simpson(
        [&](double u) { return k(std::exp(u) * r) * -std::expm1(-delta * u); }, 0.0, upper, 1e-10);
  }

  double operator()(const Point& x, const Point& y) const { return of_distance(euclidean_distance(x, y, dim())); }

 private:
  std::shared_ptr<const SeedCovariance> seed_;
  double delta_;
  double t_;
};

using Kernel = std::variant<LogKernel, CircleKernel, StarScaleKernel>;

inline double covariance(const Kernel& kernel, const Point& x, const Point& y) {
  return std::visit([&](const auto& k) { return k(x, y); }, kernel);
}

inline int kernel_dim(const Kernel& kernel) {
  return std::visit(
      [](const auto& k) -> int {
        if constexpr (std::is_same_v<std::decay_t<decltype(k)>, CircleKernel>) return 1;
        else return k.dim();
      },
      kernel);
}

/// Serializable kernel description:
///   {"kind": "circle"|"log"|"star-scale", "d": int, "delta": float,
///    "t": float|"inf", "seed_width": float}
struct KernelSpec {
  std::string kind = "circle";
  int d = 1;
  double delta = 1.0;
  double t = kInf;
  double seed_width = 0.5;

  bool operator==(const KernelSpec&) const = default;

  std::uint64_t hash() const {
    return Fnv1a{}.str(kind).u64(static_cast<std::uint64_t>(d)).f64(delta).f64(t).f64(seed_width).value();
  }
};

inline void to_json(nlohmann::json& j, const KernelSpec& s) {
  j = nlohmann::json{{"kind", s.kind}, {"d", s.d}, {"delta", s.delta}, {"seed_width", s.seed_width}};
  if (std::isfinite(s.t)) j["t"] = s.t;
  else j["t"] = "inf";
}

inline void from_json(const nlohmann::json& j, KernelSpec& s) {
  s = KernelSpec{};
  s.kind = j.at("kind").get<std::string>();
  require(s.kind == "circle" || s.kind == "log" || s.kind == "star-scale", Errc::InvalidArgument,
          "unknown kernel kind '" + s.kind + "'");
  if (j.contains("d")) s.d = j.at("d").get<int>();
  if (j.contains("delta")) s.delta = j.at("delta").get<double>();
  if (j.contains("seed_width")) s.seed_width = j.at("seed_width").get<double>();
  if (j.contains("t")) {
    const auto& t = j.at("t");
    if (t.is_string()) {
      require(t.get<std::string>() == "inf", Errc::InvalidArgument, "t must be a number or \"inf\"");
      s.t = kInf;
    } else {
      s.t = t.get<double>();
    }
  }
  if (s.kind == "circle") require(s.d == 1, Errc::InvalidArgument, "circle kernel has d = 1");
}

inline Kernel make_kernel(const KernelSpec& s) {
  if (s.kind == "circle") return CircleKernel{};
  if (s.kind == "log") return LogKernel(s.d);
  if (s.kind == "star-scale")
    return StarScaleKernel(std::make_shared<SeedCovariance>(SeedCovariance::build(s.seed_width, s.d)), s.delta,
                           s.t);
  throw Error(Errc::InvalidArgument, "unknown kernel kind '" + s.kind + "'");
}

}  // namespace imchaos
