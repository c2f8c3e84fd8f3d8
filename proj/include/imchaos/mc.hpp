#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "imchaos/chaos.hpp"
#include "imchaos/error.hpp"
#include "imchaos/grid.hpp"
#include "imchaos/kernels.hpp"
#include "imchaos/rng.hpp"
#include "imchaos/sampler.hpp"
#include "imchaos/stats.hpp"

namespace imchaos {

/// Everything that determines an ensemble. Sample i draws from the stream
/// (seed, i), so the ensemble is a pure function of this struct; `workers`
/// only changes the schedule.
struct EnsembleConfig {
  std::string field = "circle";  // circle | kl-grid | star-scale
  int modes = 64;                // Fourier modes (circle) or KL mode cap
  std::size_t grid = 256;
  double beta = 0.5;
  std::string f = "one";         // built-in name or CSV path
  std::uint64_t samples = 1000;
  std::uint64_t seed = 0;
  int workers = 1;
  // kl-grid / star-scale only
  double delta = 1.0;
  double t = 4.0;
  double seed_width = 0.5;
};

inline void to_json(nlohmann::json& j, const EnsembleConfig& c) {
  j = nlohmann::json{{"field", c.field}, {"modes", c.modes}, {"grid", c.grid},   {"beta", c.beta},
                     {"f", c.f},         {"samples", c.samples}, {"seed", c.seed}};
  if (c.field != "circle") {
    j["delta"] = c.delta;
    j["t"] = c.t;
    j["seed_width"] = c.seed_width;
  }
}

/// A sampler of Gamma on a grid: circle Fourier synthesis or a KL basis.
class FieldSource {
 public:
  explicit FieldSource(const EnsembleConfig& c) {
    require(c.modes >= 1, Errc::InvalidArgument, "mode count must be >= 1");
    if (c.field == "circle") {
      impl_ = std::make_shared<CircleFieldSampler>(c.modes, c.grid);
      grid_ = std::get<0>(impl_)->grid();
      variance_.assign(grid_.size(), std::get<0>(impl_)->variance());
      truncation_ = Truncation::fourier(c.modes);
      return;
    }
    Kernel kernel = CircleKernel{};
    if (c.field == "kl-grid") {
      kernel = LogKernel(1);
    } else if (c.field == "star-scale") {
      kernel = make_kernel(KernelSpec{"star-scale", 1, c.delta, c.t, c.seed_width});
    } else {
      throw Error(Errc::InvalidArgument, "unknown field kind '" + c.field + "'");
    }
    grid_ = Grid::interval(c.grid);
    auto basis = std::make_shared<KLBasis>(kl_decompose(kernel, grid_, static_cast<std::size_t>(c.modes)));
    variance_ = basis->variance;
    truncation_ = Truncation::basis(static_cast<int>(basis->size()), c.field == "star-scale" ? c.t : 0.0);
    impl_ = std::move(basis);
  }

  const Grid& grid() const noexcept { return grid_; }
  const std::vector<double>& variance() const noexcept { return variance_; }
  const Truncation& truncation() const noexcept { return truncation_; }

  /// Scratch space for one thread.
  struct Scratch {
    std::vector<std::complex<double>> spectrum;
    Eigen::VectorXd coeffs;
  };
  Scratch scratch() const {
    Scratch s;
    if (impl_.index() == 0) s.spectrum.resize(grid_.size() / 2 + 1);
    else s.coeffs.resize(static_cast<Eigen::Index>(std::get<1>(impl_)->size()));
    return s;
  }

  void draw(NormalStream& rng, Scratch& s, std::span<double> out) const {
    if (impl_.index() == 0) {
      std::get<0>(impl_)->synthesize(rng, s.spectrum, out);
      return;
    }
    const auto& basis = *std::get<1>(impl_);
    for (Eigen::Index k = 0; k < s.coeffs.size(); ++k) s.coeffs(k) = rng();
    Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) = basis.scaled * s.coeffs;
  }

  FieldSample sample(std::uint64_t seed, std::uint64_t stream) const {
    NormalStream rng(seed, stream);
    auto s = scratch();
    FieldSample fs{grid_, std::vector<double>(grid_.size()), variance_, truncation_, stream};
    draw(rng, s, fs.values);
    return fs;
  }

 private:
  std::variant<std::shared_ptr<CircleFieldSampler>, std::shared_ptr<KLBasis>> impl_;
  Grid grid_ = Grid::circle(2);
  std::vector<double> variance_;
  Truncation truncation_;
};

inline TestFunction resolve_test_function(const std::string& spec, const Grid& grid) {
  for (auto name : kBuiltinTestFunctions)
    if (spec == name) return builtin_test_function(spec, grid);
  return load_test_function_csv(spec, grid);
}

struct ChaosEnsemble {
  EnsembleConfig config;
  Truncation truncation;
  std::uint64_t f_hash = 0;
  std::complex<double> f_integral;       // int f, the exact mean
  std::vector<std::complex<double>> values;  // values[i] comes from stream i
};

inline constexpr std::uint64_t kBlockSize = 4096;

/// Runs body(begin, end) over contiguous blocks of [0, count) on `workers`
/// threads. Blocks are claimed dynamically; callers must write results by index.
template <class Body>
void parallel_blocks(std::uint64_t count, int workers, Body&& body) {
  const std::uint64_t blocks = (count + kBlockSize - 1) / kBlockSize;
  std::atomic<std::uint64_t> next{0};
  auto run = [&] {
    for (std::uint64_t b = next++; b < blocks; b = next++) body(b * kBlockSize, std::min(count, (b + 1) * kBlockSize));
  };
  const auto threads = static_cast<std::uint64_t>(std::max(1, workers));
  if (threads == 1 || blocks <= 1) {
    run();
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::uint64_t t = 0; t < std::min(threads, blocks); ++t) {
    pool.emplace_back([&] {
      try {
        run();
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = blocks;
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

/// M independent samples of mu_N(f) = int f :e^{i beta Gamma_N}:.
inline ChaosEnsemble run_chaos_ensemble(const EnsembleConfig& c) {
  require(c.samples >= 1, Errc::InvalidArgument, "sample count must be >= 1");
  require(c.beta >= 0.0, Errc::InvalidArgument, "beta must be nonnegative");
  const FieldSource source(c);
  const TestFunction f = resolve_test_function(c.f, source.grid());
  const auto wf = weighted_values(f);

  ChaosEnsemble e{c, source.truncation(), f.hash(), stats::pairwise_sum(std::span<const cplx>(wf)), {}};
  e.values.resize(c.samples);
  parallel_blocks(c.samples, c.workers, [&](std::uint64_t begin, std::uint64_t end) {
    auto scratch = source.scratch();
    std::vector<double> gamma(source.grid().size());
    for (std::uint64_t i = begin; i < end; ++i) {
      NormalStream rng(c.seed, i);
      source.draw(rng, scratch, gamma);
      e.values[i] = chaos_sum(wf, gamma, source.variance(), c.beta);
    }
  });
  return e;
}

/// |mu_N(f) - mu_M(f)|^2 for coupled samples (shared streams, so the first
/// min(N, M) mode pairs coincide). Circle fields only.
inline std::vector<double> coupled_truncation_gaps(const EnsembleConfig& c, int n_low, int n_high) {
  require(c.field == "circle", Errc::InvalidArgument, "coupled truncation needs the circle field");
  EnsembleConfig lo = c, hi = c;
  lo.modes = n_low;
  hi.modes = n_high;
  const FieldSource a(lo), b(hi);
  const TestFunction f = resolve_test_function(c.f, a.grid());
  const auto wf = weighted_values(f);
  std::vector<double> out(c.samples);
  parallel_blocks(c.samples, c.workers, [&](std::uint64_t begin, std::uint64_t end) {
    auto sa = a.scratch();
    auto sb = b.scratch();
    std::vector<double> ga(a.grid().size()), gb(b.grid().size());
    for (std::uint64_t i = begin; i < end; ++i) {
      NormalStream ra(c.seed, i), rb(c.seed, i);
      a.draw(ra, sa, ga);
      b.draw(rb, sb, gb);
      out[i] = std::norm(chaos_sum(wf, ga, a.variance(), c.beta) - chaos_sum(wf, gb, b.variance(), c.beta));
    }
  });
  return out;
}

/// Binary dump: per sample u64 stream id, f64 re, f64 im (little-endian).
inline void write_ensemble(const std::string& path, const ChaosEnsemble& e) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), Errc::IoError, "cannot open " + path);
  for (std::size_t i = 0; i < e.values.size(); ++i) {
    detail::put_u64(os, i);
    detail::put_f64(os, e.values[i].real());
    detail::put_f64(os, e.values[i].imag());
  }
  std::ofstream side(path + ".json");
  nlohmann::json j;
  j["config"] = e.config;
  j["records"] = e.values.size();
  j["layout"] = "u64 stream_id, f64 re, f64 im; little-endian";
  side << j.dump(2) << '\n';
  require(static_cast<bool>(os) && static_cast<bool>(side), Errc::IoError, "write failed for " + path);
}

// ---------------------------------------------------------------------------
// Density histogram on [-R, R]^2.
// ---------------------------------------------------------------------------

struct DensityGrid {
  double window = 1.0;  // R
  int bins = 8;
  std::vector<std::uint64_t> counts;  // counts[iy * bins + ix], x = Re, y = Im
  std::uint64_t total = 0;
  std::uint64_t outside = 0;

  double bin_width() const { return 2.0 * window / bins; }
  double density(int ix, int iy) const {
    const double area = bin_width() * bin_width();
    return static_cast<double>(counts[static_cast<std::size_t>(iy * bins + ix)]) / (static_cast<double>(total) * area);
  }
  std::complex<double> centre(int ix, int iy) const {
    return {-window + (ix + 0.5) * bin_width(), -window + (iy + 0.5) * bin_width()};
  }
  /// Smallest count among bins whose centre lies in |z - c| <= radius.
  std::uint64_t min_count_in_disc(std::complex<double> c, double radius) const {
    std::uint64_t m = UINT64_MAX;
    for (int iy = 0; iy < bins; ++iy)
      for (int ix = 0; ix < bins; ++ix)
        if (std::abs(centre(ix, iy) - c) <= radius) m = std::min(m, counts[static_cast<std::size_t>(iy * bins + ix)]);
    return m;
  }
};

inline DensityGrid density_histogram(std::span<const std::complex<double>> values, double window, int bins) {
  require(!values.empty(), Errc::EmptyEnsemble, "density of an empty ensemble");
  require(bins >= 2, Errc::InvalidArgument, "need at least 2 bins per axis");
  require(window > 0.0, Errc::InvalidArgument, "window half-width must be positive");
  DensityGrid d{window, bins, std::vector<std::uint64_t>(static_cast<std::size_t>(bins * bins)), values.size(), 0};
  const double scale = bins / (2.0 * window);
  for (const auto& z : values) {
    const double x = (z.real() + window) * scale;
    const double y = (z.imag() + window) * scale;
    if (!(x >= 0.0 && x < bins && y >= 0.0 && y < bins)) {
      ++d.outside;
      continue;
    }
    ++d.counts[static_cast<std::size_t>(static_cast<int>(y) * bins + static_cast<int>(x))];
  }
  return d;
}

// ---------------------------------------------------------------------------
// Small balls.
// ---------------------------------------------------------------------------

struct SmallBallEstimate {
  std::complex<double> z0;
  std::vector<double> radii;
  std::vector<std::uint64_t> hits;
  std::uint64_t trials = 0;
  std::vector<double> probability;  // hits / trials
  std::vector<double> scaled;       // r^{-2} P
  std::vector<stats::Interval> ci;  // Wilson 95%, scaled by r^{-2}
};

inline std::vector<double> default_radii() { return {0.4, 0.2, 0.1}; }

inline SmallBallEstimate small_ball(std::span<const std::complex<double>> values, std::complex<double> z0,
                                    std::vector<double> radii) {
  require(!values.empty(), Errc::EmptyEnsemble, "small-ball estimate of an empty ensemble");
  require(!radii.empty(), Errc::InvalidArgument, "need at least one radius");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    require(radii[k] > 0.0, Errc::InvalidArgument, "radii must be positive");
    require(k == 0 || radii[k] < radii[k - 1], Errc::InvalidArgument, "radii must be sorted decreasing");
  }
  SmallBallEstimate s{z0, radii, std::vector<std::uint64_t>(radii.size()), values.size(), {}, {}, {}};
  for (const auto& z : values) {
    const double d = std::abs(z - z0);
    for (std::size_t k = 0; k < radii.size() && d < radii[k]; ++k) ++s.hits[k];
  }
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const double inv = 1.0 / (radii[k] * radii[k]);
    const double p = static_cast<double>(s.hits[k]) / static_cast<double>(s.trials);
    const auto w = stats::wilson(s.hits[k], s.trials);
    s.probability.push_back(p);
    s.scaled.push_back(p * inv);
    s.ci.push_back({w.lo * inv, w.hi * inv});
  }
  return s;
}

// ---------------------------------------------------------------------------
// Moments over nested prefixes.
// ---------------------------------------------------------------------------

struct MomentRow {
  double p = 0.0;
  std::vector<double> estimates;  // one per prefix
  std::vector<double> growth;     // estimates[k+1] / estimates[k]
  bool divergent_suspect = false;
};

struct MomentReport {
  std::vector<std::uint64_t> prefixes;
  std::vector<MomentRow> rows;
  std::uint64_t zero_samples = 0;  // excluded for p < 0
};

/// Prefixes 10^3, 10^4, ... below M, then M itself.
inline std::vector<std::uint64_t> decade_prefixes(std::uint64_t m) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t p = 1000; p < m; p *= 10) out.push_back(p);
  out.push_back(m);
  return out;
}

/// (1/M') sum |mu_i|^p over each prefix. A row with p <= -2 is flagged
/// divergent-suspect when the estimate more than doubles between consecutive prefixes.
inline MomentReport moment_estimate(std::span<const std::complex<double>> values, const std::vector<double>& ps,
                                    std::vector<std::uint64_t> prefixes = {}) {
  require(!values.empty(), Errc::EmptyEnsemble, "moments of an empty ensemble");
  if (prefixes.empty()) prefixes = decade_prefixes(values.size());
  for (auto p : prefixes) require(p >= 1 && p <= values.size(), Errc::InvalidArgument, "prefix exceeds ensemble size");
  MomentReport r;
  r.prefixes = prefixes;
  std::vector<double> mod(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    mod[i] = std::abs(values[i]);
    if (mod[i] == 0.0 && i < prefixes.back()) ++r.zero_samples;
  }
  for (double p : ps) {
    MomentRow row;
    row.p = p;
    for (auto m : prefixes) {
      if (p == 0.0) {
        row.estimates.push_back(1.0);
        continue;
      }
      std::vector<double> terms;
      terms.reserve(m);
      for (std::size_t i = 0; i < m; ++i) {
        if (p < 0.0 && mod[i] == 0.0) continue;
        terms.push_back(std::pow(mod[i], p));
      }
      row.estimates.push_back(terms.empty() ? 0.0
                                            : stats::pairwise_sum(std::span<const double>(terms)) /
                                                  static_cast<double>(terms.size()));
    }
    for (std::size_t k = 1; k < row.estimates.size(); ++k)
      row.growth.push_back(row.estimates[k - 1] > 0.0 ? row.estimates[k] / row.estimates[k - 1] : 0.0);
    row.divergent_suspect = p <= -2.0 && std::any_of(row.growth.begin(), row.growth.end(), [](double g) { return g > 2.0; });
    r.rows.push_back(std::move(row));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sobolev balls: ||1_K (f :e^{i beta Gamma}: - 1)||_{H^{-s}} <= eta.
// ---------------------------------------------------------------------------

/// Norm of the chaos field of every sample, in stream order.
inline std::vector<double> sobolev_norms(const EnsembleConfig& c, const SobolevSpec& spec) {
  require(c.samples >= 1, Errc::InvalidArgument, "sample count must be >= 1");
  const FieldSource source(c);
  const TestFunction f = resolve_test_function(c.f, source.grid());
  const auto window = default_window(f);
  std::vector<double> norms(c.samples);
  parallel_blocks(c.samples, c.workers, [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t i = begin; i < end; ++i) {
      const FieldSample fs = source.sample(c.seed, i);
      const auto field = chaos_field(f, fs, c.beta, window);
      norms[i] = sobolev_neg_norm(field, fs.grid, spec);
    }
  });
  return norms;
}

struct SobolevBallEstimate {
  double eta = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;
  double probability = 0.0;
  stats::Interval ci;
  double median_norm = 0.0;
};

inline SobolevBallEstimate sobolev_ball_probability(std::span<const double> norms, double eta) {
  require(!norms.empty(), Errc::EmptyEnsemble, "Sobolev-ball estimate of an empty ensemble");
  require(eta >= 0.0, Errc::InvalidArgument, "eta must be nonnegative");
  SobolevBallEstimate s;
  s.eta = eta;
  s.trials = norms.size();
  for (double v : norms)
    if (v <= eta) ++s.hits;
  s.probability = static_cast<double>(s.hits) / static_cast<double>(s.trials);
  s.ci = stats::wilson(s.hits, s.trials);
  s.median_norm = stats::median({norms.begin(), norms.end()});
  return s;
}

inline SobolevBallEstimate sobolev_ball_probability(const EnsembleConfig& c, double eta, const SobolevSpec& spec) {
  const auto norms = sobolev_norms(c, spec);
  return sobolev_ball_probability(norms, eta);
}

}  // namespace imchaos
