#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "uwqc/grid.hpp"
#include "uwqc/qkd.hpp"
#include "uwqc/shack_hartmann.hpp"
#include "uwqc/zernike.hpp"

namespace uwqc::io {

/// Shortest round-trip decimal form of a double.
inline std::string number(double v) {
  if (v == 0.0) return "0";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string number(long long v) { return std::to_string(v); }
inline std::string number(int v) { return std::to_string(v); }
inline std::string number(std::size_t v) { return std::to_string(v); }

/// RFC 4180 field quoting.
inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Accumulates a CSV document in memory; rows end with CRLF.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) { row(header); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += quote(cells[i]);
    }
    text_ += "\r\n";
  }

  const std::string& str() const noexcept { return text_; }

 private:
  std::string text_;
};

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), Errc::io, "failed writing " + path.string());
}

/// Binary 16-bit PGM (P5, big-endian), values scaled so the maximum maps
/// to 65535. No comment or timestamp is written.
inline std::string pgm16(std::span<const double> values, std::size_t width, std::size_t height) {
  require(values.size() == width * height, Errc::invalid_argument, "pgm16: size mismatch");
  double hi = 0.0;
  for (double v : values) hi = std::max(hi, v);
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
  out.reserve(out.size() + 2 * values.size());
  for (double v : values) {
    const auto q = static_cast<std::uint16_t>(hi > 0.0 ? std::lround(std::clamp(v / hi, 0.0, 1.0) * 65535.0) : 0);
    out += static_cast<char>(q >> 8);
    out += static_cast<char>(q & 0xff);
  }
  return out;
}

inline std::string intensity_pgm(const ComplexField& f) {
  const auto I = f.intensity();
  return pgm16(I, f.grid().size(), f.grid().size());
}

/// Phase rescaled from [min, max] to the 16-bit range.
inline std::string phase_pgm(const PhaseScreen& s) {
  const auto [lo, hi] = std::minmax_element(s.phase.begin(), s.phase.end());
  std::vector<double> v(s.phase.size());
  const double span = *hi - *lo;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = span > 0.0 ? (s.phase[i] - *lo) / span : 0.0;
  return pgm16(v, s.grid.size(), s.grid.size());
}

inline std::string spots_pgm(const SpotImage& img) { return pgm16(img.pixels, img.width(), img.height()); }

/// x_index, y_index, re, im
inline std::string field_csv(const ComplexField& f) {
  CsvWriter w({"x_index", "y_index", "re", "im"});
  const std::size_t n = f.grid().size();
  for (std::size_t iy = 0; iy < n; ++iy)
    for (std::size_t ix = 0; ix < n; ++ix) {
      const cplx v = f.at(ix, iy);
      w.row({number(ix), number(iy), number(v.real()), number(v.imag())});
    }
  return w.str();
}

inline std::string screen_csv(const PhaseScreen& s) {
  CsvWriter w({"x_index", "y_index", "phase_rad"});
  const std::size_t n = s.grid.size();
  for (std::size_t iy = 0; iy < n; ++iy)
    for (std::size_t ix = 0; ix < n; ++ix) w.row({number(ix), number(iy), number(s.at(ix, iy))});
  return w.str();
}

/// j, n, m, a_j_radians
inline std::string spectrum_csv(const ZernikeSpectrum& spec) {
  CsvWriter w({"j", "n", "m", "a_j_radians"});
  for (auto [j, a] : spec.coefficients()) {
    const auto idx = nm_from_index(j);
    w.row({number(j), number(idx.n), number(idx.m), number(a)});
  }
  return w.str();
}

/// frame_id, j, n, m, a_j
inline std::string frames_csv(std::span<const WfsResult> frames) {
  CsvWriter w({"frame_id", "j", "n", "m", "a_j"});
  for (std::size_t f = 0; f < frames.size(); ++f)
    for (auto [j, a] : frames[f].spectrum.coefficients()) {
      const auto idx = nm_from_index(j);
      w.row({number(f), number(j), number(idx.n), number(idx.m), number(a)});
    }
  return w.str();
}

/// j, mean_abs, std (plus the standard error of the mean)
inline std::string averaged_csv(const ModeStatistics& st) {
  CsvWriter w({"j", "mean_abs", "std", "stderr"});
  for (std::size_t i = 0; i < st.j.size(); ++i)
    w.row({number(st.j[i]), number(st.mean_abs[i]), number(st.stddev[i]), number(st.stderr_of_mean[i])});
  return w.str();
}

namespace detail {
inline std::string matrix_csv(const DetectionMatrix& m, bool errors) {
  std::vector<std::string> header{"sent"};
  for (const auto& l : m.labels) header.push_back(l);
  CsvWriter w(header);
  for (std::size_t s = 0; s < m.size(); ++s) {
    std::vector<std::string> row{m.labels[s]};
    for (std::size_t k = 0; k < m.size(); ++k) row.push_back(number(errors ? m.se(s, k) : m.p(s, k)));
    w.row(row);
  }
  return w.str();
}
}  // namespace detail

/// Labelled square matrix, rows = sent, columns = measured.
inline std::string detection_matrix_csv(const DetectionMatrix& m) { return detail::matrix_csv(m, false); }
inline std::string detection_matrix_stderr_csv(const DetectionMatrix& m) { return detail::matrix_csv(m, true); }

inline std::string qkd_report_csv(const QkdReport& r) {
  CsvWriter w({"qber", "qber_stderr", "key_rate", "threshold", "threshold_margin", "sifted_fraction"});
  w.row({number(r.qber), number(r.qber_stderr), number(r.key_rate), number(qber_threshold()),
         number(r.threshold_margin), number(r.sifted_fraction)});
  return w.str();
}

inline std::string qkd_report_text(const QkdReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "QBER                : %.4f %%\n"
                "key rate            : %.4f bits per sifted photon\n"
                "QBER threshold      : %.4f %%\n"
                "margin to threshold : %.4f %%\n"
                "sifted fraction     : %.3f\n"
                "verdict             : %s\n",
                100.0 * r.qber, r.key_rate, 100.0 * qber_threshold(), 100.0 * r.threshold_margin,
                r.sifted_fraction, r.threshold_margin > 0.0 ? "key distillable" : "above threshold, no key");
  return buf;
}

}  // namespace uwqc::io
