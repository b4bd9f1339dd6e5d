#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uwqc/error.hpp"

namespace uwqc {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

/// Square transverse sampling grid. Samples are cell-centred: the optical
/// axis falls midway between the four central samples, so no sample ever
/// sits exactly on an on-axis phase singularity.
class Grid {
 public:
  Grid(std::size_t n_samples, double spacing) : n_(n_samples), dx_(spacing) {
    require(n_samples >= 16 && n_samples % 2 == 0, Errc::invalid_argument,
            "grid: n_samples must be even and >= 16");
    require(spacing > 0.0 && std::isfinite(spacing), Errc::invalid_argument,
            "grid: spacing must be positive");
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t count() const noexcept { return n_ * n_; }
  double spacing() const noexcept { return dx_; }
  double extent() const noexcept { return static_cast<double>(n_) * dx_; }
  double cell_area() const noexcept { return dx_ * dx_; }

  /// Physical coordinate of sample index i along either axis.
  double coord(std::size_t i) const noexcept {
    return (static_cast<double>(i) - 0.5 * static_cast<double>(n_ - 1)) * dx_;
  }
  /// Spatial frequency (cycles/m) of FFT bin k.
  double frequency(std::size_t k) const noexcept {
    const auto n = static_cast<long>(n_);
    const long kk = static_cast<long>(k) < n / 2 ? static_cast<long>(k) : static_cast<long>(k) - n;
    return static_cast<double>(kk) / extent();
  }
  double nyquist() const noexcept { return 0.5 / dx_; }

  std::size_t index(std::size_t ix, std::size_t iy) const noexcept { return iy * n_ + ix; }

  friend bool operator==(const Grid& a, const Grid& b) noexcept {
    return a.n_ == b.n_ && a.dx_ == b.dx_;
  }

 private:
  std::size_t n_;
  double dx_;
};

/// Sampled scalar optical amplitude, row-major (y outer, x inner).
class ComplexField {
 public:
  ComplexField(Grid grid, double wavelength)
      : ComplexField(grid, wavelength, std::vector<cplx>(grid.count())) {}

  ComplexField(Grid grid, double wavelength, std::vector<cplx> samples)
      : grid_(grid), wavelength_(wavelength), data_(std::move(samples)) {
    require(wavelength > 0.0 && std::isfinite(wavelength), Errc::invalid_argument,
            "field: wavelength must be positive");
    require(data_.size() == grid_.count(), Errc::invalid_argument,
            "field: sample count does not match grid");
  }

  const Grid& grid() const noexcept { return grid_; }
  double wavelength() const noexcept { return wavelength_; }

  std::span<const cplx> samples() const noexcept { return data_; }
  std::span<cplx> samples() noexcept { return data_; }

  const cplx& at(std::size_t ix, std::size_t iy) const noexcept { return data_[grid_.index(ix, iy)]; }
  cplx& at(std::size_t ix, std::size_t iy) noexcept { return data_[grid_.index(ix, iy)]; }

  double power() const noexcept {
    double s = 0.0;
    for (const auto& v : data_) s += std::norm(v);
    return s * grid_.cell_area();
  }

  std::vector<double> intensity() const {
    std::vector<double> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = std::norm(data_[i]);
    return out;
  }

  bool compatible(const ComplexField& other) const noexcept {
    return grid_ == other.grid_ && wavelength_ == other.wavelength_;
  }

 private:
  Grid grid_;
  double wavelength_;
  std::vector<cplx> data_;
};

/// Thin phase slab in radians.
struct PhaseScreen {
  PhaseScreen(Grid g, std::vector<double> values, std::string name = {})
      : grid(g), phase(std::move(values)), label(std::move(name)) {
    require(phase.size() == grid.count(), Errc::invalid_argument,
            "phase screen: sample count does not match grid");
    for (double v : phase)
      require(std::isfinite(v), Errc::invalid_argument, "phase screen: non-finite sample");
  }
  explicit PhaseScreen(Grid g, std::string name = {})
      : PhaseScreen(g, std::vector<double>(g.count(), 0.0), std::move(name)) {}

  double at(std::size_t ix, std::size_t iy) const noexcept { return phase[grid.index(ix, iy)]; }

  Grid grid;
  std::vector<double> phase;
  std::string label;
};

}  // namespace uwqc
