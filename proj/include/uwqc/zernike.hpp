#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "uwqc/error.hpp"
#include "uwqc/grid.hpp"

namespace uwqc {

/// Zernike mode label. The single index follows j = 1 + (n(n+2) + m)/2,
/// i.e. the OSA/ANSI ordering shifted to start at 1:
///
///   j : 1  2   3  4   5  6  7   8   9  10 11  12  13 14 15
///   n : 0  1   1  2   2  2  3   3   3  3  4   4   4  4  4
///   m : 0 -1   1 -2   0  2 -3  -1   1  3 -4  -2   0  2  4
///
/// Conventional Noll numbering differs beyond j = 3 (Noll defocus is 4,
/// here it is 5).
struct ZernikeIndex {
  int n = 0;
  int m = 0;
  int j = 1;

  friend bool operator==(const ZernikeIndex&, const ZernikeIndex&) = default;
};

inline ZernikeIndex index_from_nm(int n, int m) {
  require(n >= 0 && std::abs(m) <= n && (n - std::abs(m)) % 2 == 0, Errc::invalid_argument,
          "zernike: invalid (n, m) = (" + std::to_string(n) + ", " + std::to_string(m) + ")");
  return {n, m, 1 + (n * (n + 2) + m) / 2};
}

inline ZernikeIndex nm_from_index(int j) {
  require(j >= 1, Errc::invalid_argument, "zernike: index j must be >= 1");
  const int k = j - 1;
  int n = 0;
  while ((n + 1) * (n + 2) / 2 <= k) ++n;
  const int m = 2 * k - n * (n + 2);
  return index_from_nm(n, m);
}

namespace detail {

inline double factorial(int k) { return std::tgamma(k + 1.0); }

// Radial coefficients c_s of rho^(n-2s), s = 0..(n-|m|)/2.
inline std::vector<double> radial_coefficients(int n, int m) {
  const int am = std::abs(m);
  std::vector<double> c;
  for (int s = 0; s <= (n - am) / 2; ++s) {
    const double v = factorial(n - s) /
                     (factorial(s) * factorial((n + am) / 2 - s) * factorial((n - am) / 2 - s));
    c.push_back(s % 2 ? -v : v);
  }
  return c;
}

inline double noll_norm(int n, int m) {
  return m == 0 ? std::sqrt(n + 1.0) : std::sqrt(2.0 * (n + 1.0));
}

// Z = N * sum_s c_s (x^2+y^2)^(k_s) * P(x, y), with P = Re or Im of
// (x + iy)^|m| and k_s = (n-|m|)/2 - s. Polynomial in x, y, so value and
// gradient are regular at the origin.
struct Evaluated {
  double value = 0.0;
  double dx = 0.0;
  double dy = 0.0;
};

// Precomputed radial coefficients and normalisation for one mode.
class Polynomial {
 public:
  explicit Polynomial(const ZernikeIndex& idx)
      : idx_(idx), coeffs_(radial_coefficients(idx.n, idx.m)), norm_(noll_norm(idx.n, idx.m)) {}

  const ZernikeIndex& index() const noexcept { return idx_; }

  Evaluated operator()(double x, double y) const {
    const int am = std::abs(idx_.m);
    const std::complex<double> z(x, y);
    std::complex<double> zm(1.0, 0.0), zm1(0.0, 0.0);
    for (int i = 0; i < am; ++i) {
      zm1 = zm;
      zm *= z;
    }
    // d/dx z^M = M z^(M-1); d/dy z^M = i M z^(M-1)
    const std::complex<double> dzm_dx = static_cast<double>(am) * zm1;
    const std::complex<double> dzm_dy = std::complex<double>(0.0, am) * zm1;
    const bool use_sin = idx_.m < 0;
    const double P = use_sin ? zm.imag() : zm.real();
    const double Px = use_sin ? dzm_dx.imag() : dzm_dx.real();
    const double Py = use_sin ? dzm_dy.imag() : dzm_dy.real();

    // q(r2) = sum_s c_s r2^k and its derivative in r2, by Horner in r2
    // (the highest power k = (n-|m|)/2 belongs to s = 0).
    const double r2 = x * x + y * y;
    double q = 0.0, dq = 0.0;
    for (double c : coeffs_) {
      dq = dq * r2 + q;
      q = q * r2 + c;
    }
    return {norm_ * q * P, norm_ * (2.0 * x * dq * P + q * Px), norm_ * (2.0 * y * dq * P + q * Py)};
  }

 private:
  ZernikeIndex idx_;
  std::vector<double> coeffs_;
  double norm_;
};

inline Evaluated evaluate_cartesian(const ZernikeIndex& idx, double x, double y) {
  return Polynomial(idx)(x, y);
}

}  // namespace detail

/// RMS-normalised Zernike polynomial on the unit disk; cos(|m| phi) for
/// m >= 0, sin(|m| phi) for m < 0.
inline double zernike_eval(const ZernikeIndex& idx, double rho, double phi) {
  require(rho >= 0.0 && rho <= 1.0 + 1e-12, Errc::invalid_argument, "zernike_eval: rho outside [0, 1]");
  return detail::evaluate_cartesian(idx, rho * std::cos(phi), rho * std::sin(phi)).value;
}

inline double zernike_eval_xy(const ZernikeIndex& idx, double x, double y) {
  require(x * x + y * y <= 1.0 + 1e-12, Errc::invalid_argument, "zernike: point outside unit disk");
  return detail::evaluate_cartesian(idx, x, y).value;
}

struct Gradient {
  double dx = 0.0;
  double dy = 0.0;
};

/// Analytic gradient in unit-disk coordinates.
inline Gradient zernike_gradient(const ZernikeIndex& idx, double x, double y) {
  require(x * x + y * y <= 1.0 + 1e-12, Errc::invalid_argument, "zernike_gradient: point outside unit disk");
  const auto e = detail::evaluate_cartesian(idx, x, y);
  return {e.dx, e.dy};
}

/// Coefficients a_j in radians of phase over a disk of physical radius.
class ZernikeSpectrum {
 public:
  explicit ZernikeSpectrum(double aperture_radius) : radius_(aperture_radius) {
    require(aperture_radius > 0.0, Errc::invalid_argument, "zernike spectrum: aperture radius must be positive");
  }

  double aperture_radius() const noexcept { return radius_; }

  void set(int j, double a) {
    require(j >= 1, Errc::invalid_argument, "zernike spectrum: j must be >= 1");
    coeffs_[j] = a;
  }
  double coefficient(int j) const {
    auto it = coeffs_.find(j);
    return it == coeffs_.end() ? 0.0 : it->second;
  }
  bool contains(int j) const { return coeffs_.contains(j); }
  bool empty() const noexcept { return coeffs_.empty(); }
  std::size_t size() const noexcept { return coeffs_.size(); }

  /// Ordered (j, a_j) pairs.
  const std::map<int, double>& coefficients() const noexcept { return coeffs_; }

  ZernikeSpectrum scaled(double s) const {
    ZernikeSpectrum out(radius_);
    for (auto [j, a] : coeffs_) out.set(j, s * a);
    return out;
  }

  /// Phase at a physical point relative to the aperture centre; zero
  /// outside the aperture.
  double phase_at(double x, double y) const {
    const double u = x / radius_, v = y / radius_;
    if (u * u + v * v > 1.0) return 0.0;
    double s = 0.0;
    for (auto [j, a] : coeffs_) s += a * detail::evaluate_cartesian(nm_from_index(j), u, v).value;
    return s;
  }

 private:
  double radius_;
  std::map<int, double> coeffs_;
};

inline double radians_to_waves(double a) noexcept { return a / two_pi; }
inline double waves_to_radians(double w) noexcept { return w * two_pi; }
inline double radians_to_microns(double a, double wavelength) noexcept { return a / two_pi * wavelength * 1e6; }
inline double microns_to_radians(double um, double wavelength) noexcept { return um * 1e-6 / wavelength * two_pi; }

/// Phase = sum_j a_j Z_j inside the aperture, 0 outside.
inline PhaseScreen phase_from_spectrum(const ZernikeSpectrum& spec, const Grid& grid) {
  require(spec.aperture_radius() <= 0.5 * grid.extent() * (1.0 + 1e-12), Errc::invalid_argument,
          "phase_from_spectrum: aperture larger than grid");
  std::vector<std::pair<detail::Polynomial, double>> modes;
  for (auto [j, a] : spec.coefficients())
    if (a != 0.0) modes.emplace_back(detail::Polynomial(nm_from_index(j)), a);
  std::vector<double> phase(grid.count(), 0.0);
  const double R = spec.aperture_radius();
  for (std::size_t iy = 0; iy < grid.size(); ++iy)
    for (std::size_t ix = 0; ix < grid.size(); ++ix) {
      const double u = grid.coord(ix) / R, v = grid.coord(iy) / R;
      if (u * u + v * v > 1.0) continue;
      double s = 0.0;
      for (const auto& [poly, a] : modes) s += a * poly(u, v).value;
      phase[grid.index(ix, iy)] = s;
    }
  return PhaseScreen(grid, std::move(phase), "zernike");
}

}  // namespace uwqc
