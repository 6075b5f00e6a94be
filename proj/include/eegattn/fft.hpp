#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace eegattn::fft {

namespace detail {
// FFTW's planner is not re-entrant; execution with the new-array interface is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
}  // namespace detail

/// Real <-> half-complex transform pair of a fixed size. Buffers are owned so
/// plans can be reused; copying in and out keeps callers free of alignment rules.
class RealTransform {
 public:
  explicit RealTransform(std::size_t n)
      : n_(n),
        real_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        spec_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
    std::lock_guard lock(detail::planner_mutex());
    const int ni = static_cast<int>(n);
    forward_ = fftw_plan_dft_r2c_1d(ni, real_.get(), spec_.get(), FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(ni, spec_.get(), real_.get(), FFTW_ESTIMATE);
  }
  RealTransform(const RealTransform&) = delete;
  RealTransform& operator=(const RealTransform&) = delete;
  ~RealTransform() {
    std::lock_guard lock(detail::planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  std::size_t size() const { return n_; }

  /// Unnormalized forward DFT, bins 0..n/2.
  void forward(std::span<const double> in, std::vector<std::complex<double>>& out) {
    std::copy(in.begin(), in.end(), real_.get());
    fftw_execute(forward_);
    out.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k <= n_ / 2; ++k) out[k] = {spec_.get()[k][0], spec_.get()[k][1]};
  }

  /// Unnormalized inverse (sum over bins without 1/n).
  void inverse(std::span<const std::complex<double>> in, std::vector<double>& out) {
    for (std::size_t k = 0; k <= n_ / 2; ++k) {
      spec_.get()[k][0] = in[k].real();
      spec_.get()[k][1] = in[k].imag();
    }
    fftw_execute(inverse_);
    out.assign(real_.get(), real_.get() + n_);
  }

 private:
  std::size_t n_;
  std::unique_ptr<double, detail::FftwFree> real_;
  std::unique_ptr<fftw_complex, detail::FftwFree> spec_;
  fftw_plan forward_{};
  fftw_plan inverse_{};
};

/// Per-thread cache of transforms keyed by size.
inline RealTransform& transform(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<RealTransform>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<RealTransform>(n);
  return *slot;
}

}  // namespace eegattn::fft
