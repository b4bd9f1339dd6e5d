#pragma once

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>

#include "uwqc/error.hpp"

namespace uwqc::fft {

enum class Direction { forward = FFTW_FORWARD, backward = FFTW_BACKWARD };

namespace detail {

struct BufferDeleter {
  void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};
using Buffer = std::unique_ptr<fftw_complex[], BufferDeleter>;

inline Buffer allocate(std::size_t count) {
  auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * count));
  if (p == nullptr) throw std::bad_alloc();
  return Buffer(p);
}

// The FFTW planner is not re-entrant; execution of a finished plan on
// new (equally aligned) arrays is. Plans are cached per (n, direction)
// and built with FFTW_ESTIMATE so that the chosen algorithm, and hence
// every output bit, does not depend on timing measurements.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t n, Direction dir) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(n, static_cast<int>(dir));
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto scratch = allocate(n * n);
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(n), scratch.get(),
                                      scratch.get(), static_cast<int>(dir), FFTW_ESTIMATE);
    require(plan != nullptr, Errc::invalid_argument, "fft: planner failed");
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  PlanCache() = default;
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

}  // namespace detail

/// Unnormalised in-place 2D DFT of an n x n row-major array.
/// forward uses exp(-i...), backward exp(+i...).
inline void transform(std::span<std::complex<double>> data, std::size_t n, Direction dir) {
  require(data.size() == n * n, Errc::invalid_argument, "fft: size mismatch");
  fftw_plan plan = detail::PlanCache::instance().get(n, dir);
  auto buf = detail::allocate(n * n);
  std::memcpy(buf.get(), data.data(), sizeof(fftw_complex) * n * n);
  fftw_execute_dft(plan, buf.get(), buf.get());
  std::memcpy(data.data(), buf.get(), sizeof(fftw_complex) * n * n);
}

}  // namespace uwqc::fft
