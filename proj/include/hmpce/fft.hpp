#pragma once

// Unitary DFT backed by FFTW. Plans are created once per (size, direction)
// and shared; plan creation is serialized, execution is thread-safe.

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <fftw3.h>

namespace hmpce::fft {

namespace detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(n));
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    fftw_plan plan = fftw_plan_dft_1d(n, p, p, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) throw std::runtime_error("fftw: plan creation failed");
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

}  // namespace detail

/// In-place unitary DFT: X[k] = N^{-1/2} sum_n x[n] e^{-2 pi i k n / N}.
/// `inverse` selects the conjugate transform.
inline void unitary_dft_inplace(std::span<std::complex<double>> data, bool inverse = false) {
  const int n = static_cast<int>(data.size());
  if (n == 0) return;
  fftw_plan plan = detail::PlanCache::instance().get(n, inverse ? FFTW_BACKWARD : FFTW_FORWARD);
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (auto& x : data) x *= scale;
}

}  // namespace hmpce::fft
