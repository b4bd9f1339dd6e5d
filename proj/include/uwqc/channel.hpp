#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uwqc/field.hpp"
#include "uwqc/fft.hpp"
#include "uwqc/rng.hpp"
#include "uwqc/screens.hpp"

namespace uwqc {

inline constexpr double water_refractive_index = 1.33;
inline constexpr double river_attenuation_db_per_m = 5.4;
inline constexpr double pure_water_attenuation_db_per_m = 0.13;
inline constexpr double jerlov_iii_attenuation_db_per_m = 1.3;
inline constexpr double river_link_length = 5.5;

/// Fraction of the Nyquist band above which angular-spectrum propagation
/// refuses a field, and the energy fraction it tolerates there.
inline constexpr double aliasing_band = 0.8;
inline constexpr double aliasing_tolerance = 1e-6;

/// Beer-Lambert power transmittance for a loss in dB/m.
inline double transmittance(double alpha_db_per_m, double length) {
  require(alpha_db_per_m >= 0.0 && length >= 0.0, Errc::invalid_argument,
          "transmittance: attenuation and length must be non-negative");
  return std::pow(10.0, -alpha_db_per_m * length / 10.0);
}

/// Scalar angular-spectrum propagation through a medium of index n,
/// H = exp(i 2 pi dz sqrt((n/lambda)^2 - fx^2 - fy^2)), evanescent
/// components decaying.
inline ComplexField angular_spectrum_propagate(const ComplexField& field, double dz,
                                               double refractive_index = water_refractive_index) {
  require(dz >= 0.0, Errc::invalid_argument, "propagate: dz must be non-negative");
  require(refractive_index >= 1.0, Errc::invalid_argument, "propagate: refractive index must be >= 1");
  if (dz == 0.0) return field;
  const Grid& g = field.grid();
  const std::size_t n = g.size();
  std::vector<cplx> spec(field.samples().begin(), field.samples().end());
  fft::transform(spec, n, fft::Direction::forward);

  const double cut = aliasing_band * g.nyquist();
  double hi = 0.0, total = 0.0;
  for (std::size_t ky = 0; ky < n; ++ky)
    for (std::size_t kx = 0; kx < n; ++kx) {
      const double p = std::norm(spec[g.index(kx, ky)]);
      total += p;
      if (std::abs(g.frequency(kx)) > cut || std::abs(g.frequency(ky)) > cut) hi += p;
    }
  require(total == 0.0 || hi <= aliasing_tolerance * total, Errc::aliasing,
          "propagate: field is not band-limited (" + std::to_string(hi / total) +
              " of energy above 80% Nyquist)");

  const double k2 = std::pow(refractive_index / field.wavelength(), 2);
  const double inv_n2 = 1.0 / static_cast<double>(n * n);
  for (std::size_t ky = 0; ky < n; ++ky) {
    const double fy = g.frequency(ky);
    for (std::size_t kx = 0; kx < n; ++kx) {
      const double fx = g.frequency(kx);
      const double arg = k2 - fx * fx - fy * fy;
      const cplx h = arg >= 0.0 ? std::polar(1.0, two_pi * dz * std::sqrt(arg))
                                : cplx(std::exp(-two_pi * dz * std::sqrt(-arg)), 0.0);
      spec[g.index(kx, ky)] *= h * inv_n2;
    }
  }
  fft::transform(spec, n, fft::Direction::backward);
  return ComplexField(g, field.wavelength(), std::move(spec));
}

/// Multiply by exp(i * phase).
inline ComplexField apply_phase_screen(const ComplexField& field, const PhaseScreen& screen) {
  require(field.grid() == screen.grid, Errc::grid_mismatch, "apply_phase_screen: grid mismatch");
  ComplexField out = field;
  auto s = out.samples();
  for (std::size_t i = 0; i < s.size(); ++i) s[i] *= std::polar(1.0, screen.phase[i]);
  return out;
}

inline ComplexField apply_attenuation(const ComplexField& field, double alpha_db_per_m, double dz) {
  require(alpha_db_per_m >= 0.0 && dz >= 0.0, Errc::invalid_argument,
          "apply_attenuation: attenuation and distance must be non-negative");
  if (alpha_db_per_m == 0.0 || dz == 0.0) return field;
  const double a = std::pow(10.0, -alpha_db_per_m * dz / 20.0);
  ComplexField out = field;
  for (auto& v : out.samples()) v *= a;
  return out;
}

/// Disk-shaped floating obstruction.
struct Occluder {
  Point center;
  double radius = 0.0;
  double opacity = 1.0;
  /// Standard deviation (m) of a random displacement of the centre drawn
  /// from the seed; 0 places it exactly.
  double position_jitter = 0.0;
};

inline ComplexField apply_occlusion(const ComplexField& field, const Occluder& occ, std::uint64_t seed = 0) {
  require(occ.opacity >= 0.0 && occ.opacity <= 1.0, Errc::invalid_argument,
          "apply_occlusion: opacity must lie in [0, 1]");
  require(occ.radius >= 0.0, Errc::invalid_argument, "apply_occlusion: radius must be non-negative");
  Point c = occ.center;
  if (occ.position_jitter > 0.0) {
    const CounterRng rng = CounterRng(seed).split("occluder");
    c.x += occ.position_jitter * rng.normal(0);
    c.y += occ.position_jitter * rng.normal(1);
  }
  ComplexField out = field;
  const Grid& g = field.grid();
  const double t = 1.0 - occ.opacity;
  const double r2 = occ.radius * occ.radius;
  for (std::size_t iy = 0; iy < g.size(); ++iy)
    for (std::size_t ix = 0; ix < g.size(); ++ix) {
      const double dx = g.coord(ix) - c.x, dy = g.coord(iy) - c.y;
      if (dx * dx + dy * dy <= r2) out.at(ix, iy) *= t;
    }
  return out;
}

enum class ScreenSource { none, modal, kolmogorov, explicit_list };

struct ModalTurbulence {
  ModalStatistics sigma;
  double aperture_radius = 0.0;
};

struct KolmogorovTurbulence {
  /// Fried parameter of each individual screen.
  double r0 = 0.0;
  KolmogorovOptions options{0.5};
};

/// Poisson-distributed floating occluders per channel realisation.
struct OcclusionProcess {
  double rate = 0.0;
  double radius = 0.0;
  double opacity = 1.0;
  /// Occluder centres are uniform over a disk of this radius.
  double placement_radius = 0.0;
};

struct ChannelConfig {
  double length = river_link_length;
  double refractive_index = water_refractive_index;
  double attenuation_db_per_m = river_attenuation_db_per_m;
  int n_screens = 0;
  ScreenSource screen_source = ScreenSource::none;
  ModalTurbulence modal;
  KolmogorovTurbulence kolmogorov;
  std::vector<PhaseScreen> explicit_screens;
  OcclusionProcess occlusion;
  std::uint64_t seed = 0;

  void validate() const {
    require(length > 0.0, Errc::validation, "channel: length must be positive");
    require(refractive_index >= 1.0, Errc::validation, "channel: refractive_index must be >= 1");
    require(attenuation_db_per_m >= 0.0, Errc::validation, "channel: attenuation must be >= 0");
    require(n_screens >= 0, Errc::validation, "channel: n_screens must be >= 0");
    require(occlusion.rate >= 0.0, Errc::validation, "channel: occlusion rate must be >= 0");
    require(occlusion.opacity >= 0.0 && occlusion.opacity <= 1.0, Errc::validation,
            "channel: occlusion opacity must lie in [0, 1]");
    if (n_screens > 0) {
      switch (screen_source) {
        case ScreenSource::none:
          break;
        case ScreenSource::modal:
          require(modal.aperture_radius > 0.0, Errc::validation, "channel: modal aperture_radius must be positive");
          break;
        case ScreenSource::kolmogorov:
          require(kolmogorov.r0 > 0.0, Errc::validation, "channel: kolmogorov r0 must be positive");
          break;
        case ScreenSource::explicit_list:
          require(explicit_screens.size() == static_cast<std::size_t>(n_screens), Errc::validation,
                  "channel: explicit screen count does not match n_screens");
          break;
      }
    }
  }
};

struct ChannelResult {
  ComplexField output_field;
  double transmittance = 1.0;
  std::vector<PhaseScreen> screens_used;
  std::optional<std::vector<ZernikeSpectrum>> ground_truth_spectra;
  std::vector<Occluder> occluders;
};

/// Phase screens for one realisation, in path order. Seeds are split per
/// screen index, so screen s is the same whatever n_screens is.
inline std::vector<PhaseScreen> channel_screens(const ChannelConfig& cfg, const Grid& grid,
                                                std::vector<ZernikeSpectrum>* spectra = nullptr) {
  std::vector<PhaseScreen> screens;
  if (cfg.n_screens == 0 || cfg.screen_source == ScreenSource::none) return screens;
  const CounterRng rng = CounterRng(cfg.seed).split("screen");
  for (int s = 0; s < cfg.n_screens; ++s) {
    const std::uint64_t sub = rng.split(static_cast<std::uint64_t>(s)).key();
    switch (cfg.screen_source) {
      case ScreenSource::modal: {
        auto m = sample_modal_screen(cfg.modal.sigma, cfg.modal.aperture_radius, grid, sub);
        if (spectra) spectra->push_back(m.spectrum);
        screens.push_back(std::move(m.screen));
        break;
      }
      case ScreenSource::kolmogorov:
        screens.push_back(kolmogorov_screen(cfg.kolmogorov.r0, grid, sub, cfg.kolmogorov.options));
        break;
      case ScreenSource::explicit_list:
        require(cfg.explicit_screens[static_cast<std::size_t>(s)].grid == grid, Errc::grid_mismatch,
                "channel: explicit screen grid does not match field grid");
        screens.push_back(cfg.explicit_screens[static_cast<std::size_t>(s)]);
        break;
      case ScreenSource::none:
        break;
    }
  }
  return screens;
}

/// Occluders for one realisation, each tagged with the substep after
/// which it is applied. A hard-edged footprint is not band-limited, so
/// occluders sit in the receiver plane where no propagation follows.
inline std::vector<std::pair<int, Occluder>> channel_occluders(const ChannelConfig& cfg) {
  std::vector<std::pair<int, Occluder>> out;
  const auto& oc = cfg.occlusion;
  if (oc.rate <= 0.0) return out;
  const CounterRng rng = CounterRng(cfg.seed).split("occlusion");
  const auto count = rng.poisson(oc.rate, 0);
  const int substeps = cfg.n_screens + 1;
  for (std::uint64_t k = 0; k < count; ++k) {
    const CounterRng r = rng.split(k + 1);
    const int plane = substeps - 1;
    const double rad = oc.placement_radius * std::sqrt(r.uniform(1));
    const double ang = two_pi * r.uniform(2);
    out.push_back({plane, Occluder{{rad * std::cos(ang), rad * std::sin(ang)}, oc.radius, oc.opacity, 0.0}});
  }
  return out;
}

/// Split-step link: n_screens + 1 equal substeps of propagation with
/// distributed attenuation, a phase screen after each substep but the
/// last, and occluders in the receiver plane.
inline ChannelResult run_channel(const ComplexField& input, const ChannelConfig& cfg) {
  cfg.validate();
  const double p_in = input.power();
  require(p_in > 0.0, Errc::zero_power, "run_channel: input field has zero power");
  std::vector<ZernikeSpectrum> spectra;
  auto screens = channel_screens(cfg, input.grid(), &spectra);
  const auto occluders = channel_occluders(cfg);

  const int substeps = cfg.n_screens + 1;
  const double dz = cfg.length / substeps;
  ComplexField f = input;
  std::vector<Occluder> placed;
  for (int s = 0; s < substeps; ++s) {
    f = angular_spectrum_propagate(f, dz, cfg.refractive_index);
    f = apply_attenuation(f, cfg.attenuation_db_per_m, dz);
    for (const auto& [plane, occ] : occluders)
      if (plane == s) {
        f = apply_occlusion(f, occ);
        placed.push_back(occ);
      }
    if (s < static_cast<int>(screens.size())) f = apply_phase_screen(f, screens[static_cast<std::size_t>(s)]);
  }
  ChannelResult r{f, f.power() / p_in, std::move(screens), std::nullopt, std::move(placed)};
  if (cfg.screen_source == ScreenSource::modal && cfg.n_screens > 0) r.ground_truth_spectra = std::move(spectra);
  return r;
}

}  // namespace uwqc
