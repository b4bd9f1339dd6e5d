#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "uwqc/field.hpp"
#include "uwqc/rng.hpp"
#include "uwqc/summation.hpp"
#include "uwqc/zernike.hpp"

namespace uwqc {

/// Lenslet geometry of the wavefront sensor. Camera pixel size and the
/// number of pixels behind each lenslet are not part of the optical
/// prescription; the defaults are working assumptions.
struct LensletArray {
  int count_x = 23;
  int count_y = 23;
  double pitch = 150e-6;
  double focal_length = 5.2e-3;
  double pixel_size = 5e-6;
  int pixels_per_lenslet = 30;

  void validate() const {
    require(count_x > 0 && count_y > 0 && pitch > 0.0 && focal_length > 0.0 && pixel_size > 0.0 &&
                pixels_per_lenslet > 0,
            Errc::validation, "lenslet array: all dimensions must be positive");
  }
  int lenslet_count() const noexcept { return count_x * count_y; }
  std::size_t index(int lx, int ly) const noexcept { return static_cast<std::size_t>(ly * count_x + lx); }
  /// Optical axis of lenslet (lx, ly) relative to the array centre.
  Point center(int lx, int ly) const noexcept {
    return {(lx - 0.5 * (count_x - 1)) * pitch, (ly - 0.5 * (count_y - 1)) * pitch};
  }
  /// Pixel-centre offset from the lenslet axis.
  double pixel_offset(int k) const noexcept { return (k - 0.5 * (pixels_per_lenslet - 1)) * pixel_size; }
};

/// Optional detector noise; disabled by default.
struct SensorNoise {
  /// Expected photo-electrons in the whole frame; 0 disables shot noise.
  double photons = 0.0;
  /// Additive Gaussian read noise in photo-electrons (or in intensity
  /// units when shot noise is off).
  double read_noise = 0.0;
  std::uint64_t seed = 0;
};

/// Focal-plane mosaic: count_y * P rows by count_x * P columns.
struct SpotImage {
  LensletArray geometry;
  double wavelength = default_wavelength;
  std::vector<double> pixels;

  std::size_t width() const noexcept { return static_cast<std::size_t>(geometry.count_x * geometry.pixels_per_lenslet); }
  std::size_t height() const noexcept { return static_cast<std::size_t>(geometry.count_y * geometry.pixels_per_lenslet); }
  double pixel(int lx, int ly, int px, int py) const noexcept {
    const int P = geometry.pixels_per_lenslet;
    return pixels[static_cast<std::size_t>(ly * P + py) * width() + static_cast<std::size_t>(lx * P + px)];
  }
};

namespace detail {

// Half-open sample index range [lo, hi) whose coordinates fall in [a, b).
inline std::pair<long, long> samples_in(const Grid& g, double a, double b) {
  const double c = 0.5 * static_cast<double>(g.size() - 1);
  const long lo = static_cast<long>(std::ceil(a / g.spacing() + c - 1e-9));
  const long hi = static_cast<long>(std::ceil(b / g.spacing() + c - 1e-9));
  return {std::max(0L, lo), std::min(static_cast<long>(g.size()), hi)};
}

inline double poisson_sample(double mean, const CounterRng& rng, std::uint64_t counter) {
  if (mean <= 0.0) return 0.0;
  if (mean > 64.0) return std::max(0.0, std::round(mean + std::sqrt(mean) * rng.normal(counter)));
  return static_cast<double>(rng.poisson(mean, counter));
}

}  // namespace detail

/// Physical-optics spot formation: each lenslet's sub-aperture field is
/// carried to its focal plane by a matrix Fourier transform sampled on the
/// camera pixels, so spot position tracks the mean phase gradient and
/// spots degrade naturally on dark or twisted sub-apertures.
inline SpotImage capture(const ComplexField& field, const LensletArray& geo, const SensorNoise& noise = {}) {
  geo.validate();
  const Grid& g = field.grid();
  require(g.extent() >= std::max(geo.count_x, geo.count_y) * geo.pitch * (1.0 - 1e-12), Errc::insufficient_sampling,
          "capture: field grid is smaller than the lenslet array");
  const int P = geo.pixels_per_lenslet;
  const double lf = field.wavelength() * geo.focal_length;
  SpotImage img{geo, field.wavelength(), {}};
  img.pixels.assign(img.width() * img.height(), 0.0);

  Eigen::VectorXd xi(P);
  for (int k = 0; k < P; ++k) xi[k] = geo.pixel_offset(k);
  const double scale = std::pow(g.cell_area() / lf, 2);

  for (int ly = 0; ly < geo.count_y; ++ly)
    for (int lx = 0; lx < geo.count_x; ++lx) {
      const Point c = geo.center(lx, ly);
      const auto [x0, x1] = detail::samples_in(g, c.x - 0.5 * geo.pitch, c.x + 0.5 * geo.pitch);
      const auto [y0, y1] = detail::samples_in(g, c.y - 0.5 * geo.pitch, c.y + 0.5 * geo.pitch);
      const long mx = x1 - x0, my = y1 - y0;
      require(mx >= 8 && my >= 8, Errc::insufficient_sampling,
              "capture: fewer than 8 field samples across a lenslet");
      Eigen::MatrixXcd U(my, mx);
      for (long iy = 0; iy < my; ++iy)
        for (long ix = 0; ix < mx; ++ix)
          U(iy, ix) = field.at(static_cast<std::size_t>(x0 + ix), static_cast<std::size_t>(y0 + iy));
      Eigen::MatrixXcd Ax(P, mx), Ay(P, my);
      for (int k = 0; k < P; ++k) {
        for (long ix = 0; ix < mx; ++ix)
          Ax(k, ix) = std::polar(1.0, -two_pi * xi[k] * (g.coord(static_cast<std::size_t>(x0 + ix)) - c.x) / lf);
        for (long iy = 0; iy < my; ++iy)
          Ay(k, iy) = std::polar(1.0, -two_pi * xi[k] * (g.coord(static_cast<std::size_t>(y0 + iy)) - c.y) / lf);
      }
      const Eigen::MatrixXcd E = Ay * U * Ax.transpose();
      for (int py = 0; py < P; ++py)
        for (int px = 0; px < P; ++px)
          img.pixels[static_cast<std::size_t>(ly * P + py) * img.width() + static_cast<std::size_t>(lx * P + px)] =
              std::norm(E(py, px)) * scale;
    }

  if (noise.photons > 0.0 || noise.read_noise > 0.0) {
    const CounterRng rng = CounterRng(noise.seed).split("sensor");
    double total = 0.0;
    for (double v : img.pixels) total += v;
    const double gain = (noise.photons > 0.0 && total > 0.0) ? noise.photons / total : 1.0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      double v = img.pixels[i] * gain;
      if (noise.photons > 0.0) v = detail::poisson_sample(v, rng.split(0), i);
      if (noise.read_noise > 0.0) v += noise.read_noise * rng.split(1).normal(i);
      img.pixels[i] = std::max(0.0, v);
    }
  }
  return img;
}

struct LensletSlope {
  /// Wavefront phase gradient in rad/m.
  double sx = 0.0;
  double sy = 0.0;
  bool valid = false;
};

/// Per-lenslet phase gradients. Dark lenslets are flagged, never zeroed.
struct SlopeField {
  LensletArray geometry;
  double wavelength = default_wavelength;
  std::vector<LensletSlope> slopes;

  std::size_t valid_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(slopes.begin(), slopes.end(), [](const auto& s) { return s.valid; }));
  }
  /// Geometric tilt angle (spot displacement over focal length).
  double angle_x(std::size_t i) const noexcept { return slopes[i].sx * wavelength / two_pi; }
  double angle_y(std::size_t i) const noexcept { return slopes[i].sy * wavelength / two_pi; }
};

/// Centre-of-mass centroiding. Lenslets whose energy is below
/// intensity_floor times the brightest lenslet are invalid. Before the
/// centroid, background_frac times the sub-image peak is subtracted and
/// negative pixels clipped.
inline SlopeField extract_slopes(const SpotImage& spots, double intensity_floor, double background_frac = 0.01) {
  require(intensity_floor >= 0.0 && intensity_floor < 1.0, Errc::invalid_argument,
          "extract_slopes: intensity floor must lie in [0, 1)");
  require(background_frac >= 0.0 && background_frac < 1.0, Errc::invalid_argument,
          "extract_slopes: background fraction must lie in [0, 1)");
  const LensletArray& geo = spots.geometry;
  const int P = geo.pixels_per_lenslet;
  SlopeField out{geo, spots.wavelength, std::vector<LensletSlope>(static_cast<std::size_t>(geo.lenslet_count()))};

  std::vector<double> energy(out.slopes.size(), 0.0);
  for (int ly = 0; ly < geo.count_y; ++ly)
    for (int lx = 0; lx < geo.count_x; ++lx) {
      double e = 0.0;
      for (int py = 0; py < P; ++py)
        for (int px = 0; px < P; ++px) e += spots.pixel(lx, ly, px, py);
      energy[geo.index(lx, ly)] = e;
    }
  const double e_max = *std::max_element(energy.begin(), energy.end());
  const double to_gradient = two_pi / (spots.wavelength * geo.focal_length);

  for (int ly = 0; ly < geo.count_y; ++ly)
    for (int lx = 0; lx < geo.count_x; ++lx) {
      const std::size_t li = geo.index(lx, ly);
      if (!(e_max > 0.0) || energy[li] <= 0.0 || energy[li] < intensity_floor * e_max) continue;
      double peak = 0.0;
      for (int py = 0; py < P; ++py)
        for (int px = 0; px < P; ++px) peak = std::max(peak, spots.pixel(lx, ly, px, py));
      const double bg = background_frac * peak;
      double s = 0.0, sx = 0.0, sy = 0.0;
      for (int py = 0; py < P; ++py)
        for (int px = 0; px < P; ++px) {
          const double w = std::max(0.0, spots.pixel(lx, ly, px, py) - bg);
          s += w;
          sx += w * geo.pixel_offset(px);
          sy += w * geo.pixel_offset(py);
        }
      if (s <= 0.0) continue;
      out.slopes[li] = {sx / s * to_gradient, sy / s * to_gradient, true};
    }
  require(out.valid_count() > 0, Errc::no_valid_lenslets, "extract_slopes: every lenslet is below the intensity floor");
  return out;
}

/// Radius of the largest array-centred disk that contains no dark lenslet
/// and stays inside the array.
inline double inscribed_aperture_radius(const SlopeField& slopes) {
  const LensletArray& geo = slopes.geometry;
  double r = 0.5 * std::min(geo.count_x, geo.count_y) * geo.pitch;
  for (int ly = 0; ly < geo.count_y; ++ly)
    for (int lx = 0; lx < geo.count_x; ++lx) {
      if (slopes.slopes[geo.index(lx, ly)].valid) continue;
      const Point c = geo.center(lx, ly);
      const double dx = std::max(0.0, std::abs(c.x) - 0.5 * geo.pitch);
      const double dy = std::max(0.0, std::abs(c.y) - 0.5 * geo.pitch);
      r = std::min(r, std::hypot(dx, dy));
    }
  return r;
}

/// Least-squares system relating modal coefficients (j = 2..j_max) to the
/// measured slopes. Each row is the sub-aperture average of a Zernike
/// gradient (4x4 Gauss-Legendre), which is what a centroid measures.
/// Only valid lenslets lying wholly inside the aperture contribute.
struct SlopeSystem {
  Eigen::MatrixXd basis;      // 2*lenslets x (j_max-1); x rows then y rows interleaved
  Eigen::VectorXd measured;   // rad/m
  std::vector<std::size_t> lenslets;
  int j_max = 0;
  double aperture_radius = 0.0;
};

inline SlopeSystem slope_system(const SlopeField& slopes, int j_max, double aperture_radius) {
  require(j_max >= 2, Errc::invalid_argument, "modal_fit: j_max must be >= 2");
  require(aperture_radius > 0.0, Errc::invalid_argument, "modal_fit: aperture radius must be positive");
  const LensletArray& geo = slopes.geometry;
  static constexpr std::array<double, 4> gl_x{-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                              0.8611363115940526};
  static constexpr std::array<double, 4> gl_w{0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                              0.3478548451374538};
  SlopeSystem sys;
  sys.j_max = j_max;
  sys.aperture_radius = aperture_radius;
  const double R = aperture_radius;
  const double h = 0.5 * geo.pitch;
  for (int ly = 0; ly < geo.count_y; ++ly)
    for (int lx = 0; lx < geo.count_x; ++lx) {
      const std::size_t li = geo.index(lx, ly);
      if (!slopes.slopes[li].valid) continue;
      const Point c = geo.center(lx, ly);
      if (std::hypot(std::abs(c.x) + h, std::abs(c.y) + h) > R * (1.0 + 1e-12)) continue;
      sys.lenslets.push_back(li);
    }
  const int modes = j_max - 1;
  require(static_cast<int>(sys.lenslets.size()) >= modes, Errc::rank_deficient,
          "modal_fit: fewer usable lenslets than fitted modes");

  std::vector<detail::Polynomial> polys;
  for (int j = 2; j <= j_max; ++j) polys.emplace_back(nm_from_index(j));
  const auto rows = static_cast<Eigen::Index>(2 * sys.lenslets.size());
  sys.basis.setZero(rows, modes);
  sys.measured.resize(rows);
  for (std::size_t k = 0; k < sys.lenslets.size(); ++k) {
    const std::size_t li = sys.lenslets[k];
    const Point c = geo.center(static_cast<int>(li % static_cast<std::size_t>(geo.count_x)),
                               static_cast<int>(li / static_cast<std::size_t>(geo.count_x)));
    const auto rx = static_cast<Eigen::Index>(2 * k), ry = rx + 1;
    for (int q = 0; q < modes; ++q) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b) {
          const double u = (c.x + h * gl_x[a]) / R, v = (c.y + h * gl_x[b]) / R;
          const auto e = polys[static_cast<std::size_t>(q)](u, v);
          const double w = 0.25 * gl_w[a] * gl_w[b];
          gx += w * e.dx;
          gy += w * e.dy;
        }
      sys.basis(rx, q) = gx / R;
      sys.basis(ry, q) = gy / R;
    }
    sys.measured[rx] = slopes.slopes[li].sx;
    sys.measured[ry] = slopes.slopes[li].sy;
  }
  return sys;
}

struct WfsResult {
  ZernikeSpectrum spectrum;
  /// RMS slope residual times the lenslet pitch: radians of phase across
  /// one sub-aperture.
  double residual_rms = 0.0;
  std::size_t n_valid_lenslets = 0;
  std::size_t n_fitted_lenslets = 0;
};

/// Modal least-squares fit of j = 2..j_max by column-pivoting Householder
/// QR. Piston is not observable from slopes and is never fitted.
inline WfsResult modal_fit(const SlopeField& slopes, int j_max, double aperture_radius) {
  const SlopeSystem sys = slope_system(slopes, j_max, aperture_radius);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sys.basis);
  qr.setThreshold(1e-10);
  require(qr.rank() == sys.basis.cols(), Errc::rank_deficient, "modal_fit: slope system is rank deficient");
  const Eigen::VectorXd a = qr.solve(sys.measured);
  const Eigen::VectorXd r = sys.measured - sys.basis * a;

  WfsResult out{ZernikeSpectrum(aperture_radius), 0.0, slopes.valid_count(), sys.lenslets.size()};
  for (int q = 0; q < a.size(); ++q) out.spectrum.set(q + 2, a[q]);
  out.residual_rms = std::sqrt(r.squaredNorm() / static_cast<double>(r.size())) * slopes.geometry.pitch;
  return out;
}

inline PhaseScreen reconstruct_wavefront(const WfsResult& result, const Grid& grid) {
  return phase_from_spectrum(result.spectrum, grid);
}

struct MeasureOptions {
  int j_max = 15;
  double intensity_floor = 0.05;
  /// Centroid background subtraction as a fraction of the sub-image peak;
  /// unset means 1% with sensor noise enabled, none without.
  std::optional<double> background_frac;
  /// Fit aperture; defaults to the inscribed disk of illuminated lenslets.
  std::optional<double> aperture_radius;
  /// Model-based correction passes after the linear fit; 0 gives the
  /// plain least-squares estimate.
  int refine_iterations = 2;
  SensorNoise noise;

  double background() const noexcept {
    return background_frac.value_or(noise.photons > 0.0 || noise.read_noise > 0.0 ? 0.01 : 0.0);
  }
};

/// capture -> extract_slopes -> modal_fit, optionally followed by
/// model-based refinement: the sensor is re-simulated for the current
/// estimate, using the measured per-lenslet irradiance, and the fit of the
/// slope difference is added to the estimate. This removes the
/// spot-truncation and spot-broadening bias of the centroid at large local
/// slopes, which a linear slope model cannot represent.
inline WfsResult measure_wavefront(const ComplexField& field, const LensletArray& geo, const MeasureOptions& opt = {}) {
  const double bg = opt.background();
  const SpotImage spots = capture(field, geo, opt.noise);
  const SlopeField slopes = extract_slopes(spots, opt.intensity_floor, bg);
  const double R = opt.aperture_radius.value_or(inscribed_aperture_radius(slopes));
  WfsResult fit = modal_fit(slopes, opt.j_max, R);
  if (opt.refine_iterations <= 0) return fit;

  // Lenslet irradiance model: uniform amplitude per sub-aperture scaled to
  // the captured energy.
  const Grid& g = field.grid();
  std::vector<double> lenslet_amp(static_cast<std::size_t>(geo.lenslet_count()), 0.0);
  {
    const int P = geo.pixels_per_lenslet;
    for (int ly = 0; ly < geo.count_y; ++ly)
      for (int lx = 0; lx < geo.count_x; ++lx) {
        double e = 0.0;
        for (int py = 0; py < P; ++py)
          for (int px = 0; px < P; ++px) e += spots.pixel(lx, ly, px, py);
        lenslet_amp[geo.index(lx, ly)] = std::sqrt(e);
      }
  }
  std::vector<double> amp(g.count(), 0.0);
  for (std::size_t iy = 0; iy < g.size(); ++iy)
    for (std::size_t ix = 0; ix < g.size(); ++ix) {
      const double fx = g.coord(ix) / geo.pitch + 0.5 * geo.count_x;
      const double fy = g.coord(iy) / geo.pitch + 0.5 * geo.count_y;
      if (fx < 0.0 || fy < 0.0 || fx >= geo.count_x || fy >= geo.count_y) continue;
      amp[g.index(ix, iy)] = lenslet_amp[geo.index(static_cast<int>(fx), static_cast<int>(fy))];
    }

  const SlopeSystem sys = slope_system(slopes, opt.j_max, R);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sys.basis);
  for (int it = 0; it < opt.refine_iterations; ++it) {
    const PhaseScreen est = phase_from_spectrum(fit.spectrum, g);
    ComplexField model(g, field.wavelength());
    for (std::size_t i = 0; i < g.count(); ++i) model.samples()[i] = std::polar(amp[i], est.phase[i]);
    const SlopeField predicted = extract_slopes(capture(model, geo), 0.0, bg);
    Eigen::VectorXd diff(sys.measured.size());
    for (std::size_t k = 0; k < sys.lenslets.size(); ++k) {
      const auto& m = predicted.slopes[sys.lenslets[k]];
      diff[static_cast<Eigen::Index>(2 * k)] = sys.measured[static_cast<Eigen::Index>(2 * k)] - m.sx;
      diff[static_cast<Eigen::Index>(2 * k + 1)] = sys.measured[static_cast<Eigen::Index>(2 * k + 1)] - m.sy;
    }
    const Eigen::VectorXd da = qr.solve(diff);
    for (int q = 0; q < da.size(); ++q) fit.spectrum.set(q + 2, fit.spectrum.coefficient(q + 2) + da[q]);
    fit.residual_rms = std::sqrt(diff.squaredNorm() / static_cast<double>(diff.size())) * geo.pitch;
  }
  return fit;
}

struct ModeStatistics {
  std::vector<int> j;
  std::vector<double> mean_abs;
  std::vector<double> stddev;
  std::vector<double> stderr_of_mean;
};

/// Per-mode mean of |a_j| over frames, with sample standard deviation and
/// standard error.
inline ModeStatistics average_magnitudes(std::span<const WfsResult> results) {
  require(!results.empty(), Errc::invalid_argument, "average_magnitudes: no results");
  ModeStatistics out;
  for (auto [j, a] : results.front().spectrum.coefficients()) out.j.push_back(j);
  for (const auto& r : results) {
    require(r.spectrum.size() == out.j.size(), Errc::invalid_argument, "average_magnitudes: j ranges differ");
    for (int j : out.j)
      require(r.spectrum.contains(j), Errc::invalid_argument, "average_magnitudes: j ranges differ");
  }
  for (int j : out.j) {
    SampleStats st;
    for (const auto& r : results) st.add(std::abs(r.spectrum.coefficient(j)));
    out.mean_abs.push_back(st.mean());
    out.stddev.push_back(st.stddev());
    out.stderr_of_mean.push_back(st.stderr_of_mean());
  }
  return out;
}

}  // namespace uwqc
