#pragma once

#include <cmath>
#include <complex>

#include "uwqc/error.hpp"
#include "uwqc/grid.hpp"

namespace uwqc {

/// Normalised two-component (H, V) polarisation state.
class JonesVector {
 public:
  JonesVector(cplx h, cplx v) {
    const double n = std::sqrt(std::norm(h) + std::norm(v));
    require(n > 0.0 && std::isfinite(n), Errc::invalid_argument, "jones vector: zero or non-finite norm");
    h_ = h / n;
    v_ = v / n;
  }

  cplx h() const noexcept { return h_; }
  cplx v() const noexcept { return v_; }

  /// <this|other>
  cplx inner(const JonesVector& other) const noexcept { return std::conj(h_) * other.h_ + std::conj(v_) * other.v_; }

  /// Linear polarisation at angle theta from horizontal.
  static JonesVector linear(double theta) { return {std::cos(theta), std::sin(theta)}; }
  static JonesVector horizontal() { return {1.0, 0.0}; }
  static JonesVector vertical() { return {0.0, 1.0}; }
  static JonesVector diagonal() { return {1.0, 1.0}; }
  static JonesVector antidiagonal() { return {1.0, -1.0}; }

 private:
  cplx h_;
  cplx v_;
};

}  // namespace uwqc
