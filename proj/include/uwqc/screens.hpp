#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "uwqc/fft.hpp"
#include "uwqc/grid.hpp"
#include "uwqc/rng.hpp"
#include "uwqc/zernike.hpp"

namespace uwqc {

/// Per-mode coefficient standard deviations (radians), keyed by j.
using ModalStatistics = std::map<int, double>;

/// Flat sigma for j = 2..j_max.
inline ModalStatistics uniform_modal_statistics(double sigma, int j_max = 15) {
  ModalStatistics s;
  for (int j = 2; j <= j_max; ++j) s[j] = sigma;
  return s;
}

struct ModalScreen {
  PhaseScreen screen;
  ZernikeSpectrum spectrum;
};

/// Independent zero-mean Gaussian coefficients, a_j = sigma_j * N(0,1).
/// Each j draws from its own stream, so the value of a_j does not depend
/// on which other modes are present.
inline ModalScreen sample_modal_screen(const ModalStatistics& stats, double aperture_radius, const Grid& grid,
                                       std::uint64_t seed) {
  require(!stats.contains(1), Errc::invalid_argument, "sample_modal_screen: piston (j=1) cannot be randomised");
  ZernikeSpectrum spec(aperture_radius);
  const CounterRng rng = CounterRng(seed).split("modal");
  for (auto [j, sigma] : stats) {
    require(j >= 2, Errc::invalid_argument, "sample_modal_screen: j must be >= 2");
    require(sigma >= 0.0, Errc::invalid_argument, "sample_modal_screen: sigma must be >= 0");
    spec.set(j, sigma * rng.split(static_cast<std::uint64_t>(j)).normal(0));
  }
  auto screen = phase_from_spectrum(spec, grid);
  screen.label = "modal seed " + std::to_string(seed);
  return {std::move(screen), std::move(spec)};
}

struct KolmogorovOptions {
  /// Spectral components above this fraction of the Nyquist frequency are
  /// discarded; 1 keeps the full band.
  double cutoff_fraction = 1.0;
  /// Levels of 3x3 subharmonic low-frequency compensation (0 disables).
  int subharmonic_levels = 7;
};

namespace detail {

inline double kolmogorov_psd(double r0, double f) { return 0.023 * std::pow(r0, -5.0 / 3.0) * std::pow(f, -11.0 / 3.0); }

/// Variance assigned to the spectral sample at (fx, fy) standing for the
/// square cell of side h around it: the cell integral of PSD * f^2 divided
/// by f^2 at the sample, which reproduces the small-separation structure
/// function contributed by that cell.
inline double cell_variance(double r0, double fx, double fy, double h) {
  constexpr int q = 16;
  double acc = 0.0;
  for (int b = 0; b < q; ++b)
    for (int a = 0; a < q; ++a) {
      const double x = fx + ((a + 0.5) / q - 0.5) * h;
      const double y = fy + ((b + 0.5) / q - 0.5) * h;
      const double f2 = x * x + y * y;
      acc += kolmogorov_psd(r0, std::sqrt(f2)) * f2;
    }
  return acc / (q * q) * h * h / (fx * fx + fy * fy);
}

}  // namespace detail

/// Kolmogorov phase screen by FFT filtering of complex Gaussian noise with
/// the phase PSD 0.023 r0^(-5/3) f^(-11/3) (f in cycles/m). The real part
/// of the synthesis is kept; the zero-frequency term is zero. The FFT
/// lattice cannot represent frequencies below 1/extent, where this
/// spectrum carries most of its power, so subharmonic levels p = 1..L
/// add 3x3 samples at spacing 1/(3^p extent). Samples within two lattice
/// steps of the origin, and all subharmonic samples, take their variance
/// from a cell integral of the spectrum instead of its central value.
inline PhaseScreen kolmogorov_screen(double r0, const Grid& grid, std::uint64_t seed,
                                     const KolmogorovOptions& opt = {}) {
  require(r0 > 0.0, Errc::invalid_argument, "kolmogorov_screen: r0 must be positive");
  require(opt.subharmonic_levels >= 0, Errc::invalid_argument, "kolmogorov_screen: subharmonic_levels must be >= 0");
  const std::size_t n = grid.size();
  const double df = 1.0 / grid.extent();
  const double cut = opt.cutoff_fraction * grid.nyquist();
  const CounterRng rng = CounterRng(seed).split("kolmogorov");
  std::vector<cplx> c(grid.count());
  for (std::size_t ky = 0; ky < n; ++ky)
    for (std::size_t kx = 0; kx < n; ++kx) {
      const double fx = grid.frequency(kx), fy = grid.frequency(ky);
      const double f = std::hypot(fx, fy);
      if (f == 0.0 || std::abs(fx) > cut || std::abs(fy) > cut) continue;
      const bool near = std::abs(fx) < 2.5 * df && std::abs(fy) < 2.5 * df;
      const double var = near ? detail::cell_variance(r0, fx, fy, df) : detail::kolmogorov_psd(r0, f) * df * df;
      const std::uint64_t k = grid.index(kx, ky);
      c[k] = cplx(rng.normal(2 * k), rng.normal(2 * k + 1)) * std::sqrt(var);
    }
  fft::transform(c, n, fft::Direction::backward);
  std::vector<double> phase(grid.count());
  for (std::size_t i = 0; i < phase.size(); ++i) phase[i] = c[i].real();

  if (opt.subharmonic_levels > 0) {
    std::vector<double> low(grid.count(), 0.0);
    std::vector<cplx> ex(n), ey(n);
    const CounterRng sub_rng = CounterRng(seed).split("subharmonic");
    for (int p = 1; p <= opt.subharmonic_levels; ++p) {
      const double h = df / std::pow(3.0, p);
      const CounterRng r = sub_rng.split(static_cast<std::uint64_t>(p));
      for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b) {
          if (a == 0 && b == 0) continue;
          const double fx = a * h, fy = b * h;
          const auto k = static_cast<std::uint64_t>((b + 1) * 3 + (a + 1));
          const cplx cn =
              cplx(r.normal(2 * k), r.normal(2 * k + 1)) * std::sqrt(detail::cell_variance(r0, fx, fy, h));
          for (std::size_t i = 0; i < n; ++i) {
            ex[i] = std::polar(1.0, two_pi * fx * grid.coord(i));
            ey[i] = std::polar(1.0, two_pi * fy * grid.coord(i));
          }
          for (std::size_t iy = 0; iy < n; ++iy) {
            const cplx row = cn * ey[iy];
            for (std::size_t ix = 0; ix < n; ++ix) low[grid.index(ix, iy)] += (row * ex[ix]).real();
          }
        }
    }
    double mean = 0.0;
    for (double v : low) mean += v;
    mean /= static_cast<double>(low.size());
    for (std::size_t i = 0; i < phase.size(); ++i) phase[i] += low[i] - mean;
  }
  return PhaseScreen(grid, std::move(phase), "kolmogorov r0=" + std::to_string(r0));
}

}  // namespace uwqc
