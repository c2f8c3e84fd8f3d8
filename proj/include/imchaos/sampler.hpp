#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "imchaos/error.hpp"
#include "imchaos/fft.hpp"
#include "imchaos/grid.hpp"
#include "imchaos/hash.hpp"
#include "imchaos/kernels.hpp"
#include "imchaos/rng.hpp"

namespace imchaos {

/// How a sampled field was cut off: N Fourier modes, a star-scale cutoff t,
/// or m Karhunen-Loeve modes of a discretised kernel.
struct Truncation {
  enum class Kind { Modes, Scale, Basis };
  Kind kind = Kind::Modes;
  int modes = 0;
  double scale = 0.0;

  static Truncation fourier(int n) { return {Kind::Modes, n, 0.0}; }
  static Truncation basis(int m, double t = 0.0) { return {Kind::Basis, m, t}; }

  bool operator==(const Truncation&) const = default;
};

struct FieldSample {
  Grid grid;
  std::vector<double> values;    // Gamma(x_i)
  std::vector<double> variance;  // E[Gamma(x_i)^2], deterministic given the truncation
  Truncation truncation;
  std::uint64_t stream_id = 0;
};

/// H_N = sum_{k<=N} 1/k.
inline double harmonic_number(int n) {
  double s = 0.0;
  for (int k = n; k >= 1; --k) s += 1.0 / k;
  return s;
}

/// Circle GFF truncated to N modes,
///   Gamma_N(theta) = sum_{k<=N} (A_k sin(k theta) + B_k cos(k theta)) / sqrt(k),
/// synthesised on n >= 4N equispaced angles. Draws are consumed in the order
/// A_1, B_1, A_2, B_2, ..., so truncations sharing a stream are coupled.
class CircleFieldSampler {
 public:
  CircleFieldSampler(int modes, std::size_t grid_size)
      : modes_(modes), grid_(Grid::circle(std::max<std::size_t>(grid_size, 2))) {
    require(modes >= 1, Errc::InvalidArgument, "mode count must be >= 1");
    if (grid_size < 4 * static_cast<std::size_t>(modes))
      throw Error(Errc::AliasedGrid, "grid size " + std::to_string(grid_size) + " < 4N = " +
                                         std::to_string(4 * modes));
    synth_ = std::make_shared<fft::RealSynthesis>(static_cast<int>(grid_size));
    inv_sqrt_.resize(static_cast<std::size_t>(modes));
    for (int k = 1; k <= modes; ++k) inv_sqrt_[static_cast<std::size_t>(k - 1)] = 1.0 / std::sqrt(double(k));
    variance_ = harmonic_number(modes);
  }

  int modes() const noexcept { return modes_; }
  const Grid& grid() const noexcept { return grid_; }
  double variance() const noexcept { return variance_; }

  /// Hot path: writes Gamma on the grid into `out`; `spectrum` is scratch of
  /// size n/2+1.
  void synthesize(NormalStream& rng, std::span<std::complex<double>> spectrum, std::span<double> out) const {
    std::fill(spectrum.begin(), spectrum.end(), std::complex<double>{});
    for (int k = 1; k <= modes_; ++k) {
      const double a = rng();
      const double b = rng();
      const double s = 0.5 * inv_sqrt_[static_cast<std::size_t>(k - 1)];
      spectrum[static_cast<std::size_t>(k)] = {b * s, -a * s};
    }
    synth_->execute(spectrum, out);
  }

  FieldSample sample(NormalStream& rng) const {
    FieldSample fs = blank(rng.stream_id());
    std::vector<std::complex<double>> spectrum(grid_.size() / 2 + 1);
    synthesize(rng, spectrum, fs.values);
    return fs;
  }

  /// Deterministic synthesis from explicit coefficients (A_k, B_k), k = 1..N.
  FieldSample from_coefficients(std::span<const double> a, std::span<const double> b) const {
    require(a.size() == static_cast<std::size_t>(modes_) && b.size() == a.size(), Errc::InvalidArgument,
            "need exactly N sine and N cosine coefficients");
    FieldSample fs = blank(0);
    std::vector<std::complex<double>> spectrum(grid_.size() / 2 + 1);
    for (int k = 1; k <= modes_; ++k) {
      const double s = 0.5 * inv_sqrt_[static_cast<std::size_t>(k - 1)];
      spectrum[static_cast<std::size_t>(k)] = {b[static_cast<std::size_t>(k - 1)] * s,
                                               -a[static_cast<std::size_t>(k - 1)] * s};
    }
    synth_->execute(spectrum, fs.values);
    return fs;
  }

 private:
  FieldSample blank(std::uint64_t stream) const {
    return FieldSample{grid_, std::vector<double>(grid_.size()), std::vector<double>(grid_.size(), variance_),
                       Truncation::fourier(modes_), stream};
  }

  int modes_;
  Grid grid_;
  std::shared_ptr<fft::RealSynthesis> synth_;
  std::vector<double> inv_sqrt_;
  double variance_ = 0.0;
};

inline FieldSample sample_circle_field(int modes, std::size_t grid_size, NormalStream& rng) {
  return CircleFieldSampler(modes, grid_size).sample(rng);
}

/// Discrete Karhunen-Loeve basis: eigenpairs of W^{1/2} C W^{1/2}, with the
/// eigenvectors mapped back to grid functions f_k = W^{-1/2} v_k so that
/// sum_i w_i f_j(x_i) f_k(x_i) = delta_jk.
struct KLBasis {
  Grid grid;
  std::vector<double> weights;
  std::vector<double> eigenvalues;  // nonincreasing, all > 1e-12 * lambda_1
  Eigen::MatrixXd modes;            // n x m, column k is f_k on the grid
  Eigen::MatrixXd scaled;           // n x m, column k is sqrt(lambda_k) f_k
  std::vector<double> variance;     // sum_k lambda_k f_k(x_i)^2
  std::uint64_t kernel_hash = 0;
  double min_raw_eigenvalue = 0.0;  // before truncation, for diagnostics

  std::size_t size() const noexcept { return eigenvalues.size(); }
  std::size_t points() const noexcept { return grid.size(); }

  std::uint64_t hash() const {
    Fnv1a h;
    h.u64(kernel_hash).u64(grid.hash()).u64(size());
    h.f64s(std::span<const double>(eigenvalues));
    return h.value();
  }
};

namespace detail {

// E[-log|X-Y|] for X, Y independent uniform on the unit d-cube.
inline constexpr std::array<double, 3> kCubeLogMean = {1.5, 0.80508672194943, 0.50181373020778};

inline double grid_scale(const Grid& g) {
  if (g.is_circle()) return g.spacing(0);
  return std::pow(g.cell_volume(), 1.0 / g.dim());
}

}  // namespace detail

/// Self-covariance assigned to grid point i. Singular kernels get the cell
/// average of the kernel; on the circle this is log n, which makes the
/// discretised operator annihilate constants like the zero-mean field does.
inline double regularized_diagonal(const Kernel& kernel, const Grid& grid, std::size_t i) {
  const Point x = grid.point(i);
  const double h = detail::grid_scale(grid);
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, CircleKernel>) {
          return std::log(static_cast<double>(grid.size()));
        } else if constexpr (std::is_same_v<K, LogKernel>) {
          return k.regular(x, x) - std::log(h) + detail::kCubeLogMean[static_cast<std::size_t>(k.dim() - 1)];
        } else {
          if (k.truncated()) return StarScaleKernel::truncated_variance(k.delta(), k.truncation());
          const double t_eff = -std::log(h) + detail::kCubeLogMean[static_cast<std::size_t>(k.dim() - 1)];
          return StarScaleKernel::truncated_variance(k.delta(), std::max(t_eff, 0.0));
        }
      },
      kernel);
}

inline std::uint64_t kernel_fingerprint(const Kernel& kernel) {
  return std::visit(
      [](const auto& k) -> std::uint64_t {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, CircleKernel>) {
          return Fnv1a{}.str("circle").value();
        } else if constexpr (std::is_same_v<K, LogKernel>) {
          return Fnv1a{}.str("log").u64(static_cast<std::uint64_t>(k.dim())).str(k.id()).value();
        } else {
          return Fnv1a{}
              .str("star-scale")
              .u64(static_cast<std::uint64_t>(k.dim()))
              .f64(k.delta())
              .f64(k.truncation())
              .f64(k.seed().width())
              .value();
        }
      },
      kernel);
}

inline std::vector<double> kl_weights(const Grid& grid) { return grid.trapezoid_weights(); }

/// Eigendecomposition of an explicit covariance matrix sampled on `grid`.
inline KLBasis kl_decompose_matrix(const Grid& grid, const Eigen::MatrixXd& cov, std::size_t mode_cap,
                                   std::uint64_t kernel_hash = 0) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  require(cov.rows() == n && cov.cols() == n, Errc::GridMismatch, "covariance matrix does not match grid");
  require(mode_cap >= 1, Errc::InvalidArgument, "mode cap must be >= 1");
  const auto w = kl_weights(grid);
  Eigen::VectorXd sw(n);
  for (Eigen::Index i = 0; i < n; ++i) sw(i) = std::sqrt(w[static_cast<std::size_t>(i)]);
  const Eigen::MatrixXd a = sw.asDiagonal() * (0.5 * (cov + cov.transpose())) * sw.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  require(es.info() == Eigen::Success, Errc::NotPositive, "eigendecomposition failed");
  const auto& ev = es.eigenvalues();  // ascending
  const double top = ev(n - 1);
  const double bottom = ev(0);
  require(top > 0.0, Errc::NotPositive, "covariance has no positive eigenvalue");
  if (bottom < -1e-6 * top)
    throw Error(Errc::NotPositive, "min eigenvalue " + std::to_string(bottom) + " < -1e-6 * max " +
                                       std::to_string(top));

  KLBasis basis{grid, w, {}, {}, {}, {}, kernel_hash, bottom};
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = n - 1; j >= 0 && keep.size() < mode_cap; --j) {
    if (ev(j) > 1e-12 * top) keep.push_back(j);
  }
  const auto m = static_cast<Eigen::Index>(keep.size());
  basis.modes.resize(n, m);
  basis.scaled.resize(n, m);
  basis.eigenvalues.resize(keep.size());
  for (Eigen::Index c = 0; c < m; ++c) {
    const Eigen::Index j = keep[static_cast<std::size_t>(c)];
    const double lambda = ev(j);
    basis.eigenvalues[static_cast<std::size_t>(c)] = lambda;
    Eigen::VectorXd v = es.eigenvectors().col(j);
    // Fix the sign so bases are reproducible: largest-magnitude entry positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    basis.modes.col(c) = v.cwiseQuotient(sw);
    basis.scaled.col(c) = std::sqrt(lambda) * basis.modes.col(c);
  }
  basis.variance.resize(grid.size());
  for (Eigen::Index i = 0; i < n; ++i) basis.variance[static_cast<std::size_t>(i)] = basis.scaled.row(i).squaredNorm();
  return basis;
}

inline Eigen::MatrixXd covariance_matrix(const Kernel& kernel, const Grid& grid) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point xi = grid.point(static_cast<std::size_t>(i));
    cov(i, i) = regularized_diagonal(kernel, grid, static_cast<std::size_t>(i));
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double c = covariance(kernel, xi, grid.point(static_cast<std::size_t>(j)));
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  return cov;
}

inline KLBasis kl_decompose(const Kernel& kernel, const Grid& grid, std::size_t mode_cap) {
  require(kernel_dim(kernel) == grid.dim(), Errc::GridMismatch, "kernel and grid dimensions differ");
  const bool circle_kernel = std::holds_alternative<CircleKernel>(kernel);
  require(circle_kernel == grid.is_circle(), Errc::GridMismatch, "circle kernel needs a circle grid and vice versa");
  return kl_decompose_matrix(grid, covariance_matrix(kernel, grid), mode_cap, kernel_fingerprint(kernel));
}

/// Additive shift of designated standard-Gaussian coordinates A_k (0-based
/// mode indices into a KLBasis).
struct CoefficientShift {
  std::vector<std::size_t> indices;
  std::vector<double> values;
  std::uint64_t basis_hash = 0;  // 0 = not pinned to a particular basis
};

namespace detail {

inline FieldSample synthesize_kl(const KLBasis& basis, const Eigen::VectorXd& coeffs, std::uint64_t stream) {
  FieldSample fs{basis.grid, std::vector<double>(basis.points()), basis.variance,
                 Truncation::basis(static_cast<int>(basis.size())), stream};
  Eigen::Map<Eigen::VectorXd>(fs.values.data(), static_cast<Eigen::Index>(fs.values.size())) =
      basis.scaled * coeffs;
  return fs;
}

inline Eigen::VectorXd draw_coefficients(std::size_t m, NormalStream& rng) {
  Eigen::VectorXd a(static_cast<Eigen::Index>(m));
  for (Eigen::Index k = 0; k < a.size(); ++k) a(k) = rng();
  return a;
}

}  // namespace detail

inline FieldSample sample_kl(const KLBasis& basis, NormalStream& rng) {
  return detail::synthesize_kl(basis, detail::draw_coefficients(basis.size(), rng), rng.stream_id());
}

/// Synthesis from explicit coefficients A_1..A_m.
inline FieldSample sample_kl_from(const KLBasis& basis, std::span<const double> coeffs) {
  require(coeffs.size() == basis.size(), Errc::InvalidArgument, "coefficient count must equal basis size");
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
  return detail::synthesize_kl(basis, a, 0);
}

inline FieldSample sample_shifted(const KLBasis& basis, const CoefficientShift& shift, NormalStream& rng) {
  require(shift.indices.size() == shift.values.size(), Errc::InvalidArgument, "shift indices/values mismatch");
  require(shift.basis_hash == 0 || shift.basis_hash == basis.hash(), Errc::InvalidArgument,
          "shift was built for a different basis");
  for (auto idx : shift.indices)
    if (idx >= basis.size())
      throw Error(Errc::IndexOutOfRange, "shift index " + std::to_string(idx) + " outside basis of size " +
                                             std::to_string(basis.size()));
  Eigen::VectorXd a = detail::draw_coefficients(basis.size(), rng);
  for (std::size_t j = 0; j < shift.indices.size(); ++j) a(static_cast<Eigen::Index>(shift.indices[j])) += shift.values[j];
  return detail::synthesize_kl(basis, a, rng.stream_id());
}

/// CSV with columns x[,y[,z]],gamma,variance; angles for circle grids.
inline void write_csv(std::ostream& os, const FieldSample& fs) {
  static constexpr const char* kAxis[] = {"x", "y", "z"};
  for (int a = 0; a < fs.grid.dim(); ++a) os << kAxis[a] << ',';
  os << "gamma,variance\n";
  os.precision(17);
  for (std::size_t i = 0; i < fs.values.size(); ++i) {
    const Point p = fs.grid.point(i);
    for (int a = 0; a < fs.grid.dim(); ++a) os << p[static_cast<std::size_t>(a)] << ',';
    os << fs.values[i] << ',' << fs.variance[i] << '\n';
  }
}

// Basis cache layout, all little-endian:
//   u64 n, u64 m, u64 kernel_hash, u64 grid_hash,
//   f64 weights[n], f64 eigenvalues[m], f64 modes[n*m] (column-major).
namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}
inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }
inline bool get_u64(std::istream& is, std::uint64_t& v) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return true;
}
inline bool get_f64(std::istream& is, double& v) {
  std::uint64_t u = 0;
  if (!get_u64(is, u)) return false;
  v = std::bit_cast<double>(u);
  return true;
}

}  // namespace detail

inline void write_basis_cache(const std::string& path, const KLBasis& basis) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), Errc::IoError, "cannot open " + path);
  const auto n = basis.points();
  const auto m = basis.size();
  detail::put_u64(os, n);
  detail::put_u64(os, m);
  detail::put_u64(os, basis.kernel_hash);
  detail::put_u64(os, basis.grid.hash());
  for (double w : basis.weights) detail::put_f64(os, w);
  for (double l : basis.eigenvalues) detail::put_f64(os, l);
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(m); ++c)
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(n); ++r) detail::put_f64(os, basis.modes(r, c));
  require(static_cast<bool>(os), Errc::IoError, "write failed for " + path);
}

/// Loads a cached basis; nullopt when the file is missing or was produced for
/// another kernel or grid.
inline std::optional<KLBasis> read_basis_cache(const std::string& path, const Grid& grid, std::uint64_t kernel_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  std::uint64_t n = 0, m = 0, kh = 0, gh = 0;
  if (!detail::get_u64(is, n) || !detail::get_u64(is, m) || !detail::get_u64(is, kh) || !detail::get_u64(is, gh))
    return std::nullopt;
  if (n != grid.size() || kh != kernel_hash || gh != grid.hash() || m == 0 || m > n) return std::nullopt;
  KLBasis basis{grid, std::vector<double>(n), std::vector<double>(m), {}, {}, {}, kernel_hash, 0.0};
  for (auto& w : basis.weights)
    if (!detail::get_f64(is, w)) return std::nullopt;
  for (auto& l : basis.eigenvalues)
    if (!detail::get_f64(is, l)) return std::nullopt;
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(m);
  basis.modes.resize(rows, cols);
  basis.scaled.resize(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r)
      if (!detail::get_f64(is, basis.modes(r, c))) return std::nullopt;
  for (Eigen::Index c = 0; c < cols; ++c)
    basis.scaled.col(c) = std::sqrt(basis.eigenvalues[static_cast<std::size_t>(c)]) * basis.modes.col(c);
  basis.variance.resize(n);
  for (Eigen::Index i = 0; i < rows; ++i) basis.variance[static_cast<std::size_t>(i)] = basis.scaled.row(i).squaredNorm();
  return basis;
}

}  // namespace imchaos
