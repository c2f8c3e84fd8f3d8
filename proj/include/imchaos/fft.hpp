#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <span>
#include <vector>

#include "imchaos/error.hpp"

namespace imchaos::fft {

// FFTW's planner is not re-entrant; execution of an existing plan is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

/// In-place complex DFT over a row-major array of the given shape.
/// sign = -1 is the forward transform sum_j x_j e^{-2 pi i j.k / n}; no scaling.
inline void transform(std::vector<std::complex<double>>& data, std::span<const int> shape, int sign) {
  std::size_t total = 1;
  for (int n : shape) total *= static_cast<std::size_t>(n);
  require(total == data.size(), Errc::InvalidArgument, "fft shape does not match data size");
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    // ESTIMATE keeps the chosen algorithm, and therefore the bits, stable run to run.
    plan = fftw_plan_dft(static_cast<int>(shape.size()), shape.data(), ptr, ptr, sign,
                         FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  require(plan != nullptr, Errc::InvalidArgument, "fftw planning failed");
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

/// Reusable complex-to-real plan of length n, for hot loops. Executes on caller
/// buffers, so one instance may be shared between threads.
class RealSynthesis {
 public:
  explicit RealSynthesis(int n) : n_(n) {
    std::vector<std::complex<double>> in(static_cast<std::size_t>(n / 2 + 1));
    std::vector<double> out(static_cast<std::size_t>(n));
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(in.data()), out.data(),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
    require(plan_ != nullptr, Errc::InvalidArgument, "fftw planning failed");
  }
  RealSynthesis(const RealSynthesis&) = delete;
  RealSynthesis& operator=(const RealSynthesis&) = delete;
  ~RealSynthesis() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }

  int size() const noexcept { return n_; }

  /// out_j = sum_k X_k e^{2 pi i j k / n} for Hermitian X given as its n/2+1
  /// leading coefficients. `spectrum` is clobbered.
  void execute(std::span<std::complex<double>> spectrum, std::span<double> out) const {
    fftw_execute_dft_c2r(plan_, reinterpret_cast<fftw_complex*>(spectrum.data()), out.data());
  }

 private:
  int n_;
  fftw_plan plan_ = nullptr;
};

}  // namespace imchaos::fft
