#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uwqc/channel.hpp"
#include "uwqc/field.hpp"
#include "uwqc/polarization.hpp"
#include "uwqc/rng.hpp"
#include "uwqc/summation.hpp"

namespace uwqc {

/// |<a|b>|^2
inline double mub_overlap(const JonesVector& a, const JonesVector& b) noexcept { return std::norm(a.inner(b)); }

enum class PolarizationBasisId { rectilinear, diagonal };

struct PolarizationBasis {
  PolarizationBasisId id;
  JonesVector first;
  JonesVector second;

  static PolarizationBasis rectilinear() {
    return {PolarizationBasisId::rectilinear, JonesVector::horizontal(), JonesVector::vertical()};
  }
  static PolarizationBasis diagonal() {
    return {PolarizationBasisId::diagonal, JonesVector::antidiagonal(), JonesVector::diagonal()};
  }
};

/// Sent-versus-measured probabilities over all states of all bases.
/// Entry (s, m) is P(m | s, receiver measures in basis of m), so each
/// (sent, receiver-basis) block row sums to 1.
struct DetectionMatrix {
  std::vector<std::string> labels;
  std::vector<int> basis;  // basis id per label
  std::size_t dim = 0;     // states per basis
  std::vector<double> probability;
  std::vector<double> standard_error;

  std::size_t size() const noexcept { return labels.size(); }
  double p(std::size_t sent, std::size_t measured) const noexcept { return probability[sent * size() + measured]; }
  double& p(std::size_t sent, std::size_t measured) noexcept { return probability[sent * size() + measured]; }
  double se(std::size_t sent, std::size_t measured) const noexcept {
    return standard_error.empty() ? 0.0 : standard_error[sent * size() + measured];
  }
};

/// Residual polarisation error model: with probability 1 - q the state is
/// rotated by theta, otherwise the outcome is uniformly random.
struct PolarizationChannel {
  double theta = 0.0;
  double depolarization = 0.0;

  PolarizationChannel(double rotation = 0.0, double q = 0.0) : theta(rotation), depolarization(q) {
    require(q >= 0.0 && q <= 1.0, Errc::invalid_argument, "polarization channel: q must lie in [0, 1]");
  }

  /// Depolarisation reproducing a target QBER with no rotation.
  static PolarizationChannel calibrated(double qber) { return {0.0, 2.0 * qber}; }

  JonesVector transmit(const JonesVector& s) const {
    const double c = std::cos(theta), sn = std::sin(theta);
    return {c * s.h() - sn * s.v(), sn * s.h() + c * s.v()};
  }

  double probability(const JonesVector& sent, const JonesVector& measured) const {
    return (1.0 - depolarization) * mub_overlap(measured, transmit(sent)) + 0.5 * depolarization;
  }
};

inline DetectionMatrix detection_matrix_polarization(const PolarizationChannel& ch) {
  const auto rect = PolarizationBasis::rectilinear();
  const auto diag = PolarizationBasis::diagonal();
  const std::vector<JonesVector> states{rect.first, rect.second, diag.first, diag.second};
  DetectionMatrix m{{"H", "V", "A", "D"}, {0, 0, 1, 1}, 2, std::vector<double>(16, 0.0), {}};
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t k = 0; k < 4; ++k) m.p(s, k) = ch.probability(states[s], states[k]);
  return m;
}

/// Sifted error rate: mean over sent states of the wrong-outcome
/// probability when the receiver used the sender's basis.
inline double qber_from_matrix(const DetectionMatrix& m) {
  require(m.size() > 0 && m.probability.size() == m.size() * m.size(), Errc::invalid_argument,
          "qber_from_matrix: malformed matrix");
  CompensatedSum err;
  for (std::size_t s = 0; s < m.size(); ++s)
    for (std::size_t k = 0; k < m.size(); ++k)
      if (k != s && m.basis[k] == m.basis[s]) err += m.p(s, k);
  return err.value() / static_cast<double>(m.size());
}

inline double binary_entropy(double p) {
  require(p >= 0.0 && p <= 1.0, Errc::invalid_argument, "binary_entropy: p outside [0, 1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

/// Asymptotic BB84 secret fraction per sifted photon, max(0, 1 - 2 h(Q)).
inline double bb84_key_rate(double qber) {
  require(qber >= 0.0 && qber <= 0.5, Errc::invalid_argument, "bb84_key_rate: qber outside [0, 0.5]");
  return std::max(0.0, 1.0 - 2.0 * binary_entropy(qber));
}

/// Root of 1 - 2 h(Q) on (0, 0.5) by bisection.
inline double qber_threshold() {
  double lo = 1e-9, hi = 0.5 - 1e-9;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (1.0 - 2.0 * binary_entropy(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct QkdReport {
  double qber = 0.0;
  double key_rate = 0.0;
  /// threshold - qber; positive means a key can be distilled.
  double threshold_margin = 0.0;
  double sifted_fraction = 0.5;
  double qber_stderr = 0.0;

  static QkdReport from_qber(double qber, std::size_t n_bases = 2, double stderr_ = 0.0) {
    return {qber, bb84_key_rate(std::min(qber, 0.5)), qber_threshold() - qber, 1.0 / static_cast<double>(n_bases),
            stderr_};
  }
};

inline QkdReport analyze(const DetectionMatrix& m) {
  int n_bases = 0;
  for (int b : m.basis) n_bases = std::max(n_bases, b + 1);
  return QkdReport::from_qber(qber_from_matrix(m), static_cast<std::size_t>(n_bases));
}

struct OamSetup {
  Grid grid;
  double wavelength = default_wavelength;
  double waist = 0.0;
  int realizations = 1;
};

struct OamCrosstalk {
  DetectionMatrix matrix;
  double qber = 0.0;
  double qber_stderr = 0.0;
  /// Mean probability of a wrong outcome in a matched basis, averaged
  /// over matched-basis off-diagonal entries.
  double mean_offdiagonal = 0.0;
  double mean_offdiagonal_stderr = 0.0;
  double transmittance = 0.0;
  double transmittance_stderr = 0.0;
};

inline std::string oam_label(int ell) { return (ell >= 0 ? "l=+" : "l=") + std::to_string(ell); }

namespace detail {

struct OamBasisStates {
  std::vector<ComplexField> states;
  std::vector<std::string> labels;
  std::vector<int> basis;
};

// LG_{ell,0} for each ell, and with `fourier` the mutually unbiased
// Fourier basis (1/sqrt d) sum_j exp(2 pi i j k / d) |ell_j>.
inline OamBasisStates oam_states(std::span<const int> ells, bool fourier, const OamSetup& setup) {
  OamBasisStates out;
  std::vector<ComplexField> lg;
  for (int l : ells) lg.push_back(lg_mode(l, 0, setup.waist, setup.grid, setup.wavelength));
  for (std::size_t i = 0; i < ells.size(); ++i) {
    out.states.push_back(lg[i]);
    out.labels.push_back(oam_label(ells[i]));
    out.basis.push_back(0);
  }
  if (fourier) {
    const std::size_t d = ells.size();
    for (std::size_t k = 0; k < d; ++k) {
      std::vector<cplx> w(d);
      for (std::size_t j = 0; j < d; ++j)
        w[j] = std::polar(1.0 / std::sqrt(static_cast<double>(d)), two_pi * static_cast<double>(j * k) / static_cast<double>(d));
      out.states.push_back(superpose(std::span<const ComplexField>(lg), std::span<const cplx>(w)));
      out.labels.push_back(d == 2 ? (k == 0 ? "petal+" : "petal-") : "F" + std::to_string(k));
      out.basis.push_back(1);
    }
  }
  return out;
}

}  // namespace detail

/// Monte Carlo OAM detection matrix. Each realisation draws one channel
/// (screens and occluders from the realisation seed) and sends every basis
/// state through it; outcomes are ideal projections onto the basis states
/// propagated through the same link without turbulence or loss,
/// renormalised over the receiver's basis.
inline OamCrosstalk detection_matrix_oam(const ChannelConfig& cfg, std::span<const int> ells,
                                         bool include_superposition_basis, const OamSetup& setup) {
  require(!ells.empty(), Errc::invalid_argument, "detection_matrix_oam: no OAM values");
  for (std::size_t i = 0; i < ells.size(); ++i)
    for (std::size_t k = i + 1; k < ells.size(); ++k)
      require(ells[i] != ells[k], Errc::invalid_argument, "detection_matrix_oam: OAM values must be distinct");
  require(setup.realizations >= 1, Errc::invalid_argument, "detection_matrix_oam: realizations must be >= 1");
  int lmax = 0;
  for (int l : ells) lmax = std::max(lmax, std::abs(l));
  const double ring = setup.waist * std::sqrt(0.5 * lmax);
  require(lmax == 0 || two_pi * ring / setup.grid.spacing() >= 8.0 * lmax, Errc::resolution,
          "detection_matrix_oam: grid too coarse for |l| = " + std::to_string(lmax));
  require(setup.waist * (std::sqrt(lmax + 1.0) + 3.0) <= 0.5 * setup.grid.extent(), Errc::resolution,
          "detection_matrix_oam: grid too small for |l| = " + std::to_string(lmax));
  cfg.validate();

  const auto basis = detail::oam_states(ells, include_superposition_basis, setup);
  const std::size_t N = basis.states.size();

  ChannelConfig ideal;
  ideal.length = cfg.length;
  ideal.refractive_index = cfg.refractive_index;
  ideal.attenuation_db_per_m = 0.0;
  std::vector<ComplexField> refs;
  for (const auto& s : basis.states) refs.push_back(run_channel(s, ideal).output_field);

  std::vector<SampleStats> entry(N * N);
  SampleStats qber, offdiag, trans;
  const CounterRng rng = CounterRng(cfg.seed).split("oam-realization");
  for (int r = 0; r < setup.realizations; ++r) {
    ChannelConfig c = cfg;
    c.seed = rng.split(static_cast<std::uint64_t>(r)).key();
    DetectionMatrix m{basis.labels, basis.basis, ells.size(), std::vector<double>(N * N, 0.0), {}};
    CompensatedSum tr;
    for (std::size_t s = 0; s < N; ++s) {
      const ChannelResult out = run_channel(basis.states[s], c);
      tr += out.transmittance;
      std::vector<double> proj(N);
      for (std::size_t k = 0; k < N; ++k) proj[k] = std::norm(mode_overlap(out.output_field, refs[k]));
      for (std::size_t k = 0; k < N; ++k) {
        double norm = 0.0;
        for (std::size_t q = 0; q < N; ++q)
          if (basis.basis[q] == basis.basis[k]) norm += proj[q];
        m.p(s, k) = norm > 0.0 ? proj[k] / norm : 1.0 / static_cast<double>(ells.size());
      }
    }
    for (std::size_t i = 0; i < N * N; ++i) entry[i].add(m.probability[i]);
    const double q = qber_from_matrix(m);
    qber.add(q);
    CompensatedSum od;
    std::size_t n_od = 0;
    for (std::size_t s = 0; s < N; ++s)
      for (std::size_t k = 0; k < N; ++k)
        if (k != s && m.basis[k] == m.basis[s]) {
          od += m.p(s, k);
          ++n_od;
        }
    offdiag.add(n_od ? od.value() / static_cast<double>(n_od) : 0.0);
    trans.add(tr.value() / static_cast<double>(N));
  }

  OamCrosstalk out;
  out.matrix = {basis.labels, basis.basis, ells.size(), std::vector<double>(N * N), std::vector<double>(N * N)};
  for (std::size_t i = 0; i < N * N; ++i) {
    out.matrix.probability[i] = entry[i].mean();
    out.matrix.standard_error[i] = entry[i].stderr_of_mean();
  }
  out.qber = qber.mean();
  out.qber_stderr = qber.stderr_of_mean();
  out.mean_offdiagonal = offdiag.mean();
  out.mean_offdiagonal_stderr = offdiag.stderr_of_mean();
  out.transmittance = trans.mean();
  out.transmittance_stderr = trans.stderr_of_mean();
  return out;
}

}  // namespace uwqc
