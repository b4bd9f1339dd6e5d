#pragma once

#include <cmath>
#include <complex>
#include <cstdlib>
#include <span>
#include <utility>
#include <vector>

#include "uwqc/error.hpp"
#include "uwqc/fft.hpp"
#include "uwqc/grid.hpp"

namespace uwqc {

inline constexpr double default_wavelength = 532e-9;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Analytic Laguerre-Gauss amplitude at the waist plane, unit power,
/// azimuthal winding exp(+i*ell*phi).
inline cplx lg_amplitude(int ell, int p, double waist, double x, double y) {
  const unsigned l = static_cast<unsigned>(std::abs(ell));
  const double r2 = (x * x + y * y) / (waist * waist);
  const double norm =
      std::sqrt(2.0 * std::tgamma(p + 1.0) / (pi * std::tgamma(p + l + 1.0))) / waist;
  const double radial = std::pow(2.0 * r2, 0.5 * l) *
                        std::assoc_laguerre(static_cast<unsigned>(p), l, 2.0 * r2) *
                        std::exp(-r2);
  const double phi = std::atan2(y, x);
  return norm * radial * std::polar(1.0, ell * phi);
}

/// LG_{ell,p} sampled on the grid, centred on the optical axis and
/// renormalised to unit discrete power.
inline ComplexField lg_mode(int ell, int p, double waist, const Grid& grid,
                            double wavelength = default_wavelength) {
  require(p >= 0, Errc::invalid_argument, "lg_mode: radial index p must be >= 0");
  require(waist > 0.0, Errc::invalid_argument, "lg_mode: waist must be positive");
  require(waist <= grid.extent() / 4.0, Errc::beam_too_large,
          "lg_mode: waist exceeds a quarter of the grid extent");
  ComplexField f(grid, wavelength);
  const std::size_t n = grid.size();
  for (std::size_t iy = 0; iy < n; ++iy)
    for (std::size_t ix = 0; ix < n; ++ix)
      f.at(ix, iy) = lg_amplitude(ell, p, waist, grid.coord(ix), grid.coord(iy));
  const double scale = 1.0 / std::sqrt(f.power());
  for (auto& v : f.samples()) v *= scale;
  return f;
}

inline ComplexField gaussian_beam(double waist, const Grid& grid, double wavelength = default_wavelength) {
  return lg_mode(0, 0, waist, grid, wavelength);
}

/// Pointwise weighted sum; no renormalisation.
inline ComplexField superpose(std::span<const ComplexField> fields, std::span<const cplx> weights) {
  require(!fields.empty(), Errc::invalid_argument, "superpose: no fields");
  require(fields.size() == weights.size(), Errc::invalid_argument,
          "superpose: fields and weights differ in length");
  ComplexField out(fields.front().grid(), fields.front().wavelength());
  auto dst = out.samples();
  for (std::size_t k = 0; k < fields.size(); ++k) {
    require(fields[k].compatible(out), Errc::grid_mismatch, "superpose: mismatched grids");
    auto src = fields[k].samples();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weights[k] * src[i];
  }
  return out;
}

inline ComplexField superpose(std::initializer_list<ComplexField> fields,
                              std::initializer_list<cplx> weights) {
  const std::vector<ComplexField> f(fields);
  const std::vector<cplx> w(weights);
  return superpose(std::span<const ComplexField>(f), std::span<const cplx>(w));
}

/// Discrete inner product sum(a * conj(b)) * dA.
inline cplx mode_overlap(const ComplexField& a, const ComplexField& b) {
  require(a.compatible(b), Errc::grid_mismatch, "mode_overlap: mismatched grids");
  auto sa = a.samples();
  auto sb = b.samples();
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const cplx t = sa[i] * std::conj(sb[i]);
    re += t.real();
    im += t.imag();
  }
  return cplx(re, im) * a.grid().cell_area();
}

/// Intensity-weighted first moment.
inline Point centroid(const ComplexField& f) {
  const Grid& g = f.grid();
  double sx = 0.0, sy = 0.0, s = 0.0;
  for (std::size_t iy = 0; iy < g.size(); ++iy)
    for (std::size_t ix = 0; ix < g.size(); ++ix) {
      const double w = std::norm(f.at(ix, iy));
      s += w;
      sx += w * g.coord(ix);
      sy += w * g.coord(iy);
    }
  require(s > 0.0, Errc::zero_power, "centroid: field has zero power");
  return {sx / s, sy / s};
}

/// 1/e^2 intensity radius from the second moment, w = 2*sqrt(<x^2>),
/// averaged over x and y about the centroid.
inline double second_moment_radius(const ComplexField& f) {
  const Point c = centroid(f);
  const Grid& g = f.grid();
  double sxx = 0.0, syy = 0.0, s = 0.0;
  for (std::size_t iy = 0; iy < g.size(); ++iy)
    for (std::size_t ix = 0; ix < g.size(); ++ix) {
      const double w = std::norm(f.at(ix, iy));
      const double dx = g.coord(ix) - c.x;
      const double dy = g.coord(iy) - c.y;
      s += w;
      sxx += w * dx * dx;
      syy += w * dy * dy;
    }
  require(s > 0.0, Errc::zero_power, "second_moment_radius: field has zero power");
  return 2.0 * std::sqrt(0.5 * (sxx + syy) / s);
}

/// Circular shift by whole samples.
inline ComplexField shifted(const ComplexField& f, long dx_samples, long dy_samples) {
  const auto n = static_cast<long>(f.grid().size());
  ComplexField out(f.grid(), f.wavelength());
  for (long iy = 0; iy < n; ++iy)
    for (long ix = 0; ix < n; ++ix) {
      const long tx = ((ix + dx_samples) % n + n) % n;
      const long ty = ((iy + dy_samples) % n + n) % n;
      out.at(static_cast<std::size_t>(tx), static_cast<std::size_t>(ty)) =
          f.at(static_cast<std::size_t>(ix), static_cast<std::size_t>(iy));
    }
  return out;
}

/// Angular spectrum of the field, scaled so that sum(|F|^2) * df^2 is the
/// power (continuous Fourier transform convention).
inline std::vector<cplx> angular_spectrum(const ComplexField& f) {
  std::vector<cplx> spec(f.samples().begin(), f.samples().end());
  fft::transform(spec, f.grid().size(), fft::Direction::forward);
  const double scale = f.grid().cell_area();
  for (auto& v : spec) v *= scale;
  return spec;
}

inline double spectral_power(const ComplexField& f) {
  const auto spec = angular_spectrum(f);
  double s = 0.0;
  for (const auto& v : spec) s += std::norm(v);
  const double df = 1.0 / f.grid().extent();
  return s * df * df;
}

/// Fraction of spectral power with max(|fx|,|fy|) above frac * Nyquist.
inline double high_frequency_fraction(const ComplexField& f, double frac = 0.8) {
  const auto spec = angular_spectrum(f);
  const Grid& g = f.grid();
  const double cut = frac * g.nyquist();
  double hi = 0.0, total = 0.0;
  for (std::size_t ky = 0; ky < g.size(); ++ky)
    for (std::size_t kx = 0; kx < g.size(); ++kx) {
      const double p = std::norm(spec[g.index(kx, ky)]);
      total += p;
      if (std::abs(g.frequency(kx)) > cut || std::abs(g.frequency(ky)) > cut) hi += p;
    }
  return total > 0.0 ? hi / total : 0.0;
}

}  // namespace uwqc
