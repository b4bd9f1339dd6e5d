#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "uwqc/field.hpp"

namespace uwqc {

struct Vortex {
  Point position;
  int charge = 0;
};

struct VortexOptions {
  /// Plaquettes are examined only where the brightest sample within
  /// `neighborhood` samples reaches this fraction of the peak intensity.
  double min_intensity_frac = 1e-4;
  /// Half-width of the brightness window; 0 selects max(4, n/32).
  std::size_t neighborhood = 0;
  /// A loop step larger than this (radians) means the phase is not
  /// resolved by the sampling and the loop must be enlarged.
  double max_loop_step = 2.0 * pi / 3.0;
  /// Limit on loop enlargement, in samples per side.
  std::size_t max_expansion = 32;
};

namespace detail {

inline double wrap_phase(double d) noexcept {
  d = std::remainder(d, two_pi);
  return d;
}

// Separable sliding maximum with half-width r, clamped at the edges.
inline std::vector<double> box_max(const std::vector<double>& v, std::size_t n, std::size_t r) {
  std::vector<double> tmp(v.size()), out(v.size());
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const std::size_t lo = x > r ? x - r : 0, hi = std::min(n - 1, x + r);
      double m = 0.0;
      for (std::size_t k = lo; k <= hi; ++k) m = std::max(m, v[y * n + k]);
      tmp[y * n + x] = m;
    }
  for (std::size_t y = 0; y < n; ++y) {
    const std::size_t lo = y > r ? y - r : 0, hi = std::min(n - 1, y + r);
    for (std::size_t x = 0; x < n; ++x) {
      double m = 0.0;
      for (std::size_t k = lo; k <= hi; ++k) m = std::max(m, tmp[k * n + x]);
      out[y * n + x] = m;
    }
  }
  return out;
}

struct Box {
  std::size_t x0, y0, x1, y1;  // inclusive node bounds, x1 > x0, y1 > y0
};

// Phase winding (in units of 2*pi, unrounded) around a node rectangle,
// counter-clockwise, with the largest single step.
struct LoopWinding {
  double turns = 0.0;
  double max_step = 0.0;
};

inline LoopWinding loop_winding(const std::vector<double>& phase, std::size_t n, const Box& b) {
  LoopWinding w;
  double sum = 0.0;
  auto step = [&](std::size_t xa, std::size_t ya, std::size_t xb, std::size_t yb) {
    const double d = wrap_phase(phase[yb * n + xb] - phase[ya * n + xa]);
    sum += d;
    w.max_step = std::max(w.max_step, std::abs(d));
  };
  for (std::size_t x = b.x0; x < b.x1; ++x) step(x, b.y0, x + 1, b.y0);
  for (std::size_t y = b.y0; y < b.y1; ++y) step(b.x1, y, b.x1, y + 1);
  for (std::size_t x = b.x1; x > b.x0; --x) step(x, b.y1, x - 1, b.y1);
  for (std::size_t y = b.y1; y > b.y0; --y) step(b.x0, y, b.x0, y - 1);
  w.turns = sum / two_pi;
  return w;
}

inline bool overlaps(const Box& a, const Box& b) noexcept {
  return a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 && b.y0 <= a.y1;
}

inline Box merge(const Box& a, const Box& b) noexcept {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1), std::max(a.y1, b.y1)};
}

}  // namespace detail

/// Locates phase singularities by summing wrapped phase differences
/// around each 2x2 plaquette. Where a plaquette's phase steps are too
/// large to be unambiguous (unresolved high-order cores, vortices close
/// to a sample edge), connected ambiguous plaquettes are grouped and the
/// charge is taken from the winding around the smallest enclosing
/// rectangle whose boundary is well resolved. Such a group is reported
/// as one vortex carrying the full enclosed charge.
inline std::vector<Vortex> find_vortices(const ComplexField& field, const VortexOptions& opt = {}) {
  require(opt.min_intensity_frac >= 0.0 && opt.min_intensity_frac < 1.0, Errc::invalid_argument,
          "find_vortices: min_intensity_frac must lie in [0, 1)");
  const Grid& g = field.grid();
  const std::size_t n = g.size();
  const std::size_t np = n - 1;  // plaquettes per side
  const auto intensity = field.intensity();
  const double peak = *std::max_element(intensity.begin(), intensity.end());
  if (peak <= 0.0) return {};

  std::vector<double> phase(g.count());
  for (std::size_t i = 0; i < phase.size(); ++i) phase[i] = std::arg(field.samples()[i]);

  const std::size_t r = opt.neighborhood ? opt.neighborhood : std::max<std::size_t>(4, n / 32);
  const auto bright = detail::box_max(intensity, n, r);
  const double floor = opt.min_intensity_frac * peak;

  auto eligible = [&](std::size_t px, std::size_t py) {
    const std::size_t i = py * n + px;
    return std::max({bright[i], bright[i + 1], bright[i + n], bright[i + n + 1]}) >= floor &&
           std::max({bright[i], bright[i + 1], bright[i + n], bright[i + n + 1]}) > 0.0;
  };

  // 0 = ineligible/no charge, otherwise winding; ambiguous tracked apart.
  std::vector<int> charge(np * np, 0);
  std::vector<char> ambiguous(np * np, 0);
  for (std::size_t py = 0; py < np; ++py)
    for (std::size_t px = 0; px < np; ++px) {
      if (!eligible(px, py)) continue;
      const auto w = detail::loop_winding(phase, n, {px, py, px + 1, py + 1});
      if (w.max_step > opt.max_loop_step)
        ambiguous[py * np + px] = 1;
      else
        charge[py * np + px] = static_cast<int>(std::lround(w.turns));
    }

  // Group ambiguous plaquettes into connected components (8-neighbour).
  std::vector<detail::Box> boxes;
  std::vector<char> seen(np * np, 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < np * np; ++start) {
    if (!ambiguous[start] || seen[start]) continue;
    detail::Box b{start % np, start / np, start % np + 1, start / np + 1};
    stack.push_back(start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t c = stack.back();
      stack.pop_back();
      const std::size_t cx = c % np, cy = c / np;
      b = detail::merge(b, {cx, cy, cx + 1, cy + 1});
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const long nx = static_cast<long>(cx) + dx, ny = static_cast<long>(cy) + dy;
          if (nx < 0 || ny < 0 || nx >= static_cast<long>(np) || ny >= static_cast<long>(np)) continue;
          const std::size_t k = static_cast<std::size_t>(ny) * np + static_cast<std::size_t>(nx);
          if (ambiguous[k] && !seen[k]) {
            seen[k] = 1;
            stack.push_back(k);
          }
        }
    }
    boxes.push_back(b);
  }

  // Enlarge each box until its boundary is resolved; merge on contact.
  auto resolve = [&](detail::Box b) {
    for (std::size_t e = 0; e <= opt.max_expansion; ++e) {
      if (detail::loop_winding(phase, n, b).max_step <= opt.max_loop_step) break;
      if (b.x0 == 0 && b.y0 == 0 && b.x1 == n - 1 && b.y1 == n - 1) break;
      b = {b.x0 ? b.x0 - 1 : 0, b.y0 ? b.y0 - 1 : 0, std::min(n - 1, b.x1 + 1), std::min(n - 1, b.y1 + 1)};
    }
    return b;
  };
  for (auto& b : boxes) b = resolve(b);
  for (bool merged = true; merged;) {
    merged = false;
    for (std::size_t a = 0; a < boxes.size() && !merged; ++a)
      for (std::size_t c = a + 1; c < boxes.size() && !merged; ++c)
        if (detail::overlaps(boxes[a], boxes[c])) {
          boxes[a] = resolve(detail::merge(boxes[a], boxes[c]));
          boxes.erase(boxes.begin() + static_cast<long>(c));
          merged = true;
        }
  }

  std::vector<Vortex> out;
  std::vector<char> consumed(np * np, 0);
  for (const auto& b : boxes) {
    for (std::size_t py = b.y0; py < b.y1; ++py)
      for (std::size_t px = b.x0; px < b.x1; ++px) consumed[py * np + px] = 1;
    const int q = static_cast<int>(std::lround(detail::loop_winding(phase, n, b).turns));
    if (q == 0) continue;
    // Report at the darkest plaquette inside the box.
    double best = -1.0;
    Point where{};
    for (std::size_t py = b.y0; py < b.y1; ++py)
      for (std::size_t px = b.x0; px < b.x1; ++px) {
        const std::size_t i = py * n + px;
        const double m = intensity[i] + intensity[i + 1] + intensity[i + n] + intensity[i + n + 1];
        if (best < 0.0 || m < best) {
          best = m;
          where = {0.5 * (g.coord(px) + g.coord(px + 1)), 0.5 * (g.coord(py) + g.coord(py + 1))};
        }
      }
    out.push_back({where, q});
  }
  for (std::size_t py = 0; py < np; ++py)
    for (std::size_t px = 0; px < np; ++px) {
      const std::size_t k = py * np + px;
      if (consumed[k] || charge[k] == 0) continue;
      out.push_back({{0.5 * (g.coord(px) + g.coord(px + 1)), 0.5 * (g.coord(py) + g.coord(py + 1))},
                     charge[k]});
    }
  return out;
}

inline std::vector<Vortex> find_vortices(const ComplexField& field, double min_intensity_frac) {
  VortexOptions opt;
  opt.min_intensity_frac = min_intensity_frac;
  return find_vortices(field, opt);
}

inline int total_charge(const std::vector<Vortex>& vs) noexcept {
  int q = 0;
  for (const auto& v : vs) q += v.charge;
  return q;
}

}  // namespace uwqc
