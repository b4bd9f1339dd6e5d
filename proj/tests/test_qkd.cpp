#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "uwqc/qkd.hpp"
#include "uwqc/screens.hpp"

using namespace uwqc;

namespace {

// High-precision (40 digit) evaluations of h and of the root of 1 - 2h.
constexpr double entropy_at_qber_0401 = 0.2427504976314023;
constexpr double key_rate_at_qber_0401 = 0.5144990047371953;
constexpr double threshold_root = 0.1100278644383596;

Errc error_code(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no uwqc::Error thrown";
  return Errc::io;
}

void expect_conditionally_stochastic(const DetectionMatrix& m) {
  for (std::size_t s = 0; s < m.size(); ++s)
    for (int b = 0; b <= *std::max_element(m.basis.begin(), m.basis.end()); ++b) {
      double sum = 0.0;
      for (std::size_t k = 0; k < m.size(); ++k)
        if (m.basis[k] == b) {
          EXPECT_GE(m.p(s, k), 0.0);
          EXPECT_LE(m.p(s, k), 1.0);
          sum += m.p(s, k);
        }
      EXPECT_NEAR(sum, 1.0, 1e-9) << "sent " << m.labels[s] << " basis " << b;
    }
}

OamSetup small_setup(int realizations) { return {Grid(128, 50e-6), default_wavelength, 0.5e-3, realizations}; }

ChannelConfig short_link() {
  ChannelConfig cfg;
  cfg.length = 1.0;
  cfg.attenuation_db_per_m = 0.0;
  return cfg;
}

ChannelConfig turbulent_link(double sigma, std::uint64_t seed = 1) {
  ChannelConfig cfg = short_link();
  cfg.n_screens = 2;
  cfg.screen_source = ScreenSource::modal;
  cfg.modal = {uniform_modal_statistics(sigma, 10), 3.0e-3};
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(Mub, Overlaps) {
  const auto H = JonesVector::horizontal(), V = JonesVector::vertical();
  const auto A = JonesVector::antidiagonal(), D = JonesVector::diagonal();
  EXPECT_NEAR(mub_overlap(H, H), 1.0, 1e-12);
  EXPECT_NEAR(mub_overlap(H, D), 0.5, 1e-12);
  EXPECT_NEAR(mub_overlap(A, D), 0.0, 1e-12);
  for (const auto& b : {PolarizationBasis::rectilinear(), PolarizationBasis::diagonal()})
    EXPECT_LT(mub_overlap(b.first, b.second), 1e-12);
  for (const auto& x : {H, V})
    for (const auto& y : {A, D}) EXPECT_NEAR(mub_overlap(x, y), 0.5, 1e-12);
}

TEST(PolarizationChannel, IdentityChannel) {
  const auto m = detection_matrix_polarization(PolarizationChannel{});
  ASSERT_EQ(m.labels, (std::vector<std::string>{"H", "V", "A", "D"}));
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t k = 0; k < 4; ++k) {
      const double expected = m.basis[s] == m.basis[k] ? (s == k ? 1.0 : 0.0) : 0.5;
      EXPECT_NEAR(m.p(s, k), expected, 1e-12);
    }
  EXPECT_EQ(qber_from_matrix(m), 0.0);
  const auto r = analyze(m);
  EXPECT_EQ(r.qber, 0.0);
  EXPECT_EQ(r.key_rate, 1.0);
  EXPECT_DOUBLE_EQ(r.sifted_fraction, 0.5);
}

TEST(PolarizationChannel, CalibratedToMeasuredErrorRate) {
  const auto ch = PolarizationChannel::calibrated(0.0401);
  EXPECT_NEAR(ch.depolarization, 0.0802, 1e-15);
  const auto m = detection_matrix_polarization(ch);
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t k = 0; k < 4; ++k)
      if (m.basis[s] == m.basis[k]) EXPECT_NEAR(m.p(s, k), s == k ? 0.9599 : 0.0401, 1e-9);
      else EXPECT_NEAR(m.p(s, k), 0.5, 1e-12);
  EXPECT_NEAR(qber_from_matrix(m), 0.0401, 1e-9);
  const auto r = analyze(m);
  EXPECT_NEAR(r.key_rate, key_rate_at_qber_0401, 1e-9);
  EXPECT_NEAR(r.threshold_margin, threshold_root - 0.0401, 1e-6);
}

TEST(PolarizationChannel, QuarterTurnRandomisesRectilinearBasis) {
  const auto m = detection_matrix_polarization(PolarizationChannel{pi / 4, 0.0});
  EXPECT_NEAR(0.5 * (m.p(0, 1) + m.p(1, 0)), 0.5, 1e-12);
}

TEST(PolarizationChannel, HalfTurnSwapsHAndV) {
  const auto m = detection_matrix_polarization(PolarizationChannel{pi / 2, 0.0});
  EXPECT_NEAR(m.p(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(m.p(0, 1), 1.0, 1e-12);
  EXPECT_NEAR(m.p(1, 0), 1.0, 1e-12);
  EXPECT_NEAR(m.p(1, 1), 0.0, 1e-12);
}

TEST(PolarizationChannel, RejectsBadDepolarization) {
  EXPECT_EQ(error_code([] { PolarizationChannel(0.0, -0.1); }), Errc::invalid_argument);
  EXPECT_EQ(error_code([] { PolarizationChannel(0.0, 1.1); }), Errc::invalid_argument);
}

TEST(DetectionMatrix, ConditionallyStochastic) {
  for (double theta : {0.0, 0.3, 1.1, 2.5})
    for (double q : {0.0, 0.0802, 0.5, 1.0}) expect_conditionally_stochastic(detection_matrix_polarization({theta, q}));
}

TEST(DetectionMatrix, QberInvariantUnderConsistentRelabeling) {
  const auto m = detection_matrix_polarization(PolarizationChannel{0.2, 0.05});
  const std::vector<std::size_t> perm{1, 0, 3, 2};
  DetectionMatrix r = m;
  for (std::size_t s = 0; s < 4; ++s) {
    r.labels[s] = m.labels[perm[s]];
    r.basis[s] = m.basis[perm[s]];
    for (std::size_t k = 0; k < 4; ++k) r.p(s, k) = m.p(perm[s], perm[k]);
  }
  EXPECT_NEAR(qber_from_matrix(r), qber_from_matrix(m), 1e-15);
}

TEST(DetectionMatrix, UniformBlocksGiveHalfErrorRate) {
  DetectionMatrix m{{"H", "V", "A", "D"}, {0, 0, 1, 1}, 2, std::vector<double>(16, 0.5), {}};
  EXPECT_DOUBLE_EQ(qber_from_matrix(m), 0.5);
  EXPECT_EQ(analyze(m).key_rate, 0.0);
  DetectionMatrix bad{{"H"}, {0}, 1, {}, {}};
  EXPECT_EQ(error_code([&] { qber_from_matrix(bad); }), Errc::invalid_argument);
}

TEST(BinaryEntropy, Values) {
  EXPECT_EQ(binary_entropy(0.5), 1.0);
  EXPECT_EQ(binary_entropy(0.0), 0.0);
  EXPECT_EQ(binary_entropy(1.0), 0.0);
  EXPECT_NEAR(binary_entropy(0.0401), 0.2428, 1e-4);
  EXPECT_NEAR(binary_entropy(0.0401), entropy_at_qber_0401, 1e-12);
  EXPECT_NEAR(binary_entropy(0.3), binary_entropy(0.7), 1e-15);
  EXPECT_EQ(error_code([] { binary_entropy(-0.01); }), Errc::invalid_argument);
  EXPECT_EQ(error_code([] { binary_entropy(1.01); }), Errc::invalid_argument);
}

TEST(KeyRate, Values) {
  EXPECT_EQ(bb84_key_rate(0.0), 1.0);
  EXPECT_NEAR(bb84_key_rate(0.0401), 0.514, 1e-3);
  EXPECT_GE(bb84_key_rate(0.0401), 0.510);
  EXPECT_LE(bb84_key_rate(0.0401), 0.520);
  EXPECT_NEAR(bb84_key_rate(0.11), 0.0, 2e-3);
  EXPECT_EQ(bb84_key_rate(0.3), 0.0);
  EXPECT_EQ(error_code([] { bb84_key_rate(0.51); }), Errc::invalid_argument);
  EXPECT_EQ(error_code([] { bb84_key_rate(-0.01); }), Errc::invalid_argument);
}

TEST(KeyRate, MonotoneNonIncreasing) {
  double prev = bb84_key_rate(0.0);
  for (int i = 1; i <= 10000; ++i) {
    const double r = bb84_key_rate(0.5 * i / 10000.0);
    EXPECT_LE(r, prev);
    prev = r;
  }
}

TEST(Threshold, Value) {
  const double t = qber_threshold();
  EXPECT_GE(t, 0.1099);
  EXPECT_LE(t, 0.1101);
  EXPECT_NEAR(t, threshold_root, 1e-6);
  EXPECT_LT(std::abs(bb84_key_rate(t)), 1e-5);
}

TEST(Threshold, UniqueRoot) {
  const double t = qber_threshold();
  int sign_changes = 0;
  double prev = 1.0;
  for (int i = 1; i < 10000; ++i) {
    const double q = 0.5 * i / 10000.0;
    const double f = 1.0 - 2.0 * binary_entropy(q);
    EXPECT_LT(f, prev) << "q=" << q;
    if ((f > 0.0) != (prev > 0.0)) {
      ++sign_changes;
      EXPECT_NEAR(q, t, 0.5 / 10000.0);
    }
    prev = f;
  }
  EXPECT_EQ(sign_changes, 1);
}

TEST(OamMatrix, ZeroTurbulenceIsIdentity) {
  const std::vector<int> ells{-4, 4};
  const auto r = detection_matrix_oam(short_link(), ells, true, small_setup(1));
  const auto& m = r.matrix;
  ASSERT_EQ(m.size(), 4u);
  EXPECT_EQ(m.labels[2], "petal+");
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t k = 0; k < 4; ++k)
      if (m.basis[s] == m.basis[k]) EXPECT_NEAR(m.p(s, k), s == k ? 1.0 : 0.0, 1e-6) << s << "," << k;
  EXPECT_LT(r.qber, 1e-6);
  EXPECT_NEAR(bb84_key_rate(r.qber), 1.0, 1e-4);
  expect_conditionally_stochastic(m);
}

TEST(OamMatrix, LossyLinkStillIdentityAndReportsTransmittance) {
  const std::vector<int> ells{-1, 1};
  ChannelConfig cfg = short_link();
  cfg.attenuation_db_per_m = 5.4;
  const auto r = detection_matrix_oam(cfg, ells, true, small_setup(1));
  EXPECT_LT(r.qber, 1e-6);
  EXPECT_NEAR(r.transmittance, transmittance(5.4, 1.0), 1e-9);
}

TEST(OamMatrix, PetalBasisIsIdentity) {
  const std::vector<int> ells{-4, 4};
  const auto r = detection_matrix_oam(short_link(), ells, true, small_setup(1));
  EXPECT_NEAR(r.matrix.p(2, 2), 1.0, 1e-6);
  EXPECT_NEAR(r.matrix.p(3, 3), 1.0, 1e-6);
  EXPECT_NEAR(r.matrix.p(2, 0), 0.5, 1e-6);
  EXPECT_NEAR(r.matrix.p(0, 3), 0.5, 1e-6);
}

TEST(OamMatrix, CrosstalkGrowsWithTurbulence) {
  const std::vector<int> ells{-1, 1};
  std::vector<double> od;
  for (double sigma : {0.1, 0.3, 0.6}) {
    const auto r = detection_matrix_oam(turbulent_link(sigma), ells, true, small_setup(40));
    od.push_back(r.mean_offdiagonal);
    expect_conditionally_stochastic(r.matrix);
    EXPECT_GT(r.mean_offdiagonal_stderr, 0.0);
  }
  EXPECT_LT(od[0], od[1]);
  EXPECT_LT(od[1], od[2]);
}

TEST(OamMatrix, NeighbourLeakageIsSymmetric) {
  const std::vector<int> ells{-1, 0, 1};
  const auto r = detection_matrix_oam(turbulent_link(0.3, 9), ells, false, small_setup(100));
  const auto& m = r.matrix;
  const double up = m.p(1, 2), down = m.p(1, 0);
  const double se = std::hypot(m.se(1, 2), m.se(1, 0));
  EXPECT_GT(up, 0.0);
  EXPECT_LT(std::abs(up - down), 3 * se);
}

TEST(OamMatrix, Deterministic) {
  const std::vector<int> ells{-2, 2};
  const auto a = detection_matrix_oam(turbulent_link(0.3, 5), ells, true, small_setup(3));
  const auto b = detection_matrix_oam(turbulent_link(0.3, 5), ells, true, small_setup(3));
  EXPECT_EQ(a.matrix.probability, b.matrix.probability);
  EXPECT_EQ(a.qber, b.qber);
}

TEST(OamMatrix, ErrorCases) {
  const std::vector<int> dup{2, 2};
  EXPECT_EQ(error_code([&] { detection_matrix_oam(short_link(), dup, true, small_setup(1)); }), Errc::invalid_argument);
  const std::vector<int> high{-8, 8};
  const OamSetup coarse{Grid(64, 100e-6), default_wavelength, 0.5e-3, 1};
  EXPECT_EQ(error_code([&] { detection_matrix_oam(short_link(), high, true, coarse); }), Errc::resolution);
  const std::vector<int> huge{-20, 20};
  EXPECT_EQ(error_code([&] { detection_matrix_oam(short_link(), huge, true, small_setup(1)); }), Errc::resolution);
  EXPECT_EQ(error_code([&] { detection_matrix_oam(short_link(), std::vector<int>{}, true, small_setup(1)); }),
            Errc::invalid_argument);
}
