#pragma once

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "uwqc/channel.hpp"
#include "uwqc/io.hpp"
#include "uwqc/qkd.hpp"
#include "uwqc/scenario.hpp"
#include "uwqc/shack_hartmann.hpp"
#include "uwqc/vortex.hpp"

#ifndef UWQC_VERSION
#define UWQC_VERSION "0.0.0"
#endif

namespace uwqc {

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  require(EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) == 1, Errc::io,
          "sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ArtifactRecord {
  std::string path;
  std::size_t bytes = 0;
  std::string sha256;
};

struct RunResult {
  std::filesystem::path output_dir;
  std::vector<ArtifactRecord> files;
  double wall_time_seconds = 0.0;
  std::string summary;
};

/// One row of a sweep summary.
struct SweepRow {
  double value = 0.0;
  OamCrosstalk crosstalk;
  double key_rate = 0.0;
};

inline ComplexField make_mode(const ModeSpec& m, double waist, const Grid& grid, double wavelength) {
  if (m.type == "gaussian") return lg_mode(0, 0, waist, grid, wavelength);
  if (m.type == "lg") return lg_mode(m.ell, m.p, waist, grid, wavelength);
  require(m.type == "petal", Errc::validation, "unknown mode type '" + m.type + "'");
  require(m.ell != 0, Errc::validation, "petal mode needs ell != 0");
  const double w = 1.0 / std::sqrt(2.0);
  return superpose({lg_mode(m.ell, m.p, waist, grid, wavelength), lg_mode(-m.ell, m.p, waist, grid, wavelength)},
                   {cplx(w), cplx(w)});
}

/// Channel seed of frame k.
inline std::uint64_t frame_seed(std::uint64_t seed, int k) {
  return CounterRng(seed).split("frame").split(static_cast<std::uint64_t>(k)).key();
}

inline OamCrosstalk run_oam(const Scenario& s, const ChannelSpec& ch, double sigma_scale = 1.0) {
  OamSetup setup{s.grid.grid(), s.wavelength, s.waist, s.frames};
  return detection_matrix_oam(ch.config(s.seed, sigma_scale), s.qkd.ells, s.qkd.superposition, setup);
}

/// Evaluates the OAM analysis at each sweep value, with the same seed so
/// that every row sees the same underlying random draws.
inline std::vector<SweepRow> run_sweep(const Scenario& s) {
  std::vector<SweepRow> rows;
  for (double v : s.sweep.values) {
    ChannelSpec ch = s.channel;
    double scale = 1.0;
    if (s.sweep.parameter == "sigma_scale") {
      require(v >= 0.0, Errc::validation, "sweep: sigma_scale must be >= 0");
      scale = v;
    } else if (s.sweep.parameter == "r0") {
      ch.r0 = v;
    } else if (s.sweep.parameter == "attenuation") {
      ch.attenuation = v;
    } else if (s.sweep.parameter == "length") {
      ch.length = v;
    } else {
      throw Error(Errc::validation, "sweep: unknown parameter '" + s.sweep.parameter + "'");
    }
    SweepRow row{v, run_oam(s, ch, scale), 0.0};
    row.key_rate = bb84_key_rate(row.crosstalk.qber);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string sweep_csv(const std::string& parameter, const std::vector<SweepRow>& rows) {
  io::CsvWriter w({"parameter", "value", "qber", "qber_stderr", "key_rate", "transmittance", "transmittance_stderr",
                   "crosstalk_mean", "crosstalk_stderr"});
  for (const auto& r : rows)
    w.row({parameter, io::number(r.value), io::number(r.crosstalk.qber), io::number(r.crosstalk.qber_stderr),
           io::number(r.key_rate), io::number(r.crosstalk.transmittance),
           io::number(r.crosstalk.transmittance_stderr), io::number(r.crosstalk.mean_offdiagonal),
           io::number(r.crosstalk.mean_offdiagonal_stderr)});
  return w.str();
}

namespace detail {

class ArtifactSink {
 public:
  explicit ArtifactSink(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    require(!ec, Errc::io, "cannot create output directory " + dir_.string() + ": " + ec.message());
  }
  void write(const std::string& name, const std::string& bytes) {
    io::write_file(dir_ / name, bytes);
    records_.push_back({name, bytes.size(), sha256_hex(bytes)});
  }
  const std::vector<ArtifactRecord>& records() const { return records_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<ArtifactRecord> records_;
};

inline std::string frame_tag(int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", k);
  return buf;
}

inline std::string run_wavefront(const Scenario& s, ArtifactSink& out) {
  const Grid grid = s.grid.grid();
  const ComplexField beam = make_mode(s.source, s.waist, grid, s.wavelength);
  std::vector<WfsResult> results;
  io::CsvWriter truth({"frame_id", "screen", "j", "n", "m", "a_j"});
  for (int k = 0; k < s.frames; ++k) {
    const std::uint64_t fs = frame_seed(s.seed, k);
    const ChannelResult ch = run_channel(beam, s.channel.config(fs));
    MeasureOptions opt;
    opt.j_max = s.sensor.j_max;
    opt.intensity_floor = s.sensor.intensity_floor;
    opt.aperture_radius = s.sensor.aperture_radius;
    opt.refine_iterations = s.sensor.refine_iterations;
    opt.noise = {s.sensor.photons, s.sensor.read_noise, CounterRng(fs).split("sensor").key()};
    results.push_back(measure_wavefront(ch.output_field, s.sensor.geometry, opt));
    if (ch.ground_truth_spectra)
      for (std::size_t sc = 0; sc < ch.ground_truth_spectra->size(); ++sc)
        for (auto [j, a] : (*ch.ground_truth_spectra)[sc].coefficients()) {
          const auto idx = nm_from_index(j);
          truth.row({io::number(k), io::number(sc), io::number(j), io::number(idx.n), io::number(idx.m),
                     io::number(a)});
        }
    if (k == 0 && s.sensor.save_images) {
      out.write("spots_000.pgm", io::spots_pgm(capture(ch.output_field, s.sensor.geometry, opt.noise)));
      out.write("intensity_000.pgm", io::intensity_pgm(ch.output_field));
      out.write("wavefront_000.pgm", io::phase_pgm(reconstruct_wavefront(results.back(), grid)));
    }
  }
  out.write("frames.csv", io::frames_csv(results));
  const ModeStatistics st = average_magnitudes(results);
  out.write("averaged.csv", io::averaged_csv(st));
  if (s.sensor.report_units != "radians") {
    const bool waves = s.sensor.report_units == "waves";
    auto conv = [&](double a) { return waves ? radians_to_waves(a) : radians_to_microns(a, s.wavelength); };
    ModeStatistics scaled = st;
    for (std::size_t i = 0; i < st.j.size(); ++i) {
      scaled.mean_abs[i] = conv(st.mean_abs[i]);
      scaled.stddev[i] = conv(st.stddev[i]);
      scaled.stderr_of_mean[i] = conv(st.stderr_of_mean[i]);
    }
    out.write("averaged_" + s.sensor.report_units + ".csv", io::averaged_csv(scaled));
  }
  if (s.channel.screen_source == "modal" && s.channel.n_screens > 0) out.write("ground_truth.csv", truth.str());

  std::string summary = "frames " + std::to_string(s.frames) + ", j <= " + std::to_string(s.sensor.j_max) +
                        ", valid lenslets " + std::to_string(results.front().n_valid_lenslets) + "\n";
  for (std::size_t i = 0; i < st.j.size(); ++i) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "  a%-3d mean |a| = %.4f rad (std %.4f)\n", st.j[i], st.mean_abs[i], st.stddev[i]);
    summary += buf;
  }
  return summary;
}

inline std::string run_qkd_pol(const Scenario& s, ArtifactSink& out) {
  const PolarizationChannel ch(s.qkd.rotation, 2.0 * s.qkd.qber);
  const DetectionMatrix m = detection_matrix_polarization(ch);
  const QkdReport r = analyze(m);
  out.write("detection_matrix.csv", io::detection_matrix_csv(m));
  out.write("qkd_report.csv", io::qkd_report_csv(r));
  out.write("qkd_report.txt", io::qkd_report_text(r));
  return io::qkd_report_text(r);
}

inline std::string run_qkd_oam(const Scenario& s, ArtifactSink& out) {
  const OamCrosstalk x = run_oam(s, s.channel);
  QkdReport r = QkdReport::from_qber(x.qber, s.qkd.superposition ? 2 : 1, x.qber_stderr);
  out.write("detection_matrix.csv", io::detection_matrix_csv(x.matrix));
  out.write("detection_matrix_stderr.csv", io::detection_matrix_stderr_csv(x.matrix));
  out.write("qkd_report.csv", io::qkd_report_csv(r));
  io::CsvWriter w({"qber", "qber_stderr", "crosstalk_mean", "crosstalk_stderr", "transmittance",
                   "transmittance_stderr", "realizations"});
  w.row({io::number(x.qber), io::number(x.qber_stderr), io::number(x.mean_offdiagonal),
         io::number(x.mean_offdiagonal_stderr), io::number(x.transmittance), io::number(x.transmittance_stderr),
         io::number(s.frames)});
  out.write("crosstalk.csv", w.str());
  return io::qkd_report_text(r);
}

inline std::string run_imaging(const Scenario& s, ArtifactSink& out) {
  const Grid grid = s.grid.grid();
  io::CsvWriter frames({"mode", "frame_id", "transmittance", "centroid_x", "centroid_y", "radius", "vortex_count",
                        "total_charge"});
  io::CsvWriter vort({"mode", "frame_id", "x", "y", "charge"});
  std::string summary;
  for (const auto& mode : s.imaging.modes) {
    const ComplexField beam = make_mode(mode, s.waist, grid, s.wavelength);
    const std::string label = mode.label();
    for (int k = 0; k < s.frames; ++k) {
      const ChannelResult ch = run_channel(beam, s.channel.config(frame_seed(s.seed, k)));
      const Point c = centroid(ch.output_field);
      const auto vs = find_vortices(ch.output_field);
      frames.row({label, io::number(k), io::number(ch.transmittance), io::number(c.x), io::number(c.y),
                  io::number(second_moment_radius(ch.output_field)), io::number(vs.size()),
                  io::number(total_charge(vs))});
      for (const auto& v : vs)
        vort.row({label, io::number(k), io::number(v.position.x), io::number(v.position.y), io::number(v.charge)});
      std::vector<double> exposure = ch.output_field.intensity();
      for (int e = 1; e < s.imaging.exposure_realizations; ++e) {
        const auto extra = run_channel(
            beam, s.channel.config(CounterRng(frame_seed(s.seed, k)).split("exposure").split(e).key()));
        const auto I = extra.output_field.intensity();
        for (std::size_t i = 0; i < I.size(); ++i) exposure[i] += I[i];
      }
      out.write("intensity_" + label + "_" + frame_tag(k) + ".pgm", io::pgm16(exposure, grid.size(), grid.size()));
    }
    summary += label + ": " + std::to_string(s.frames) + " frames\n";
  }
  out.write("frames.csv", frames.str());
  out.write("vortices.csv", vort.str());
  return summary;
}

inline std::string manifest_text(const Scenario& s, const RunResult& r) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "manifest_version" << YAML::Value << 1;
  e << YAML::Key << "program" << YAML::Value << "uwqc";
  e << YAML::Key << "version" << YAML::Value << UWQC_VERSION;
  e << YAML::Key << "scenario" << YAML::Value << s.name;
  e << YAML::Key << "analysis" << YAML::Value << to_string(s.analysis);
  e << YAML::Key << "seed" << YAML::Value << std::to_string(s.seed);
  e << YAML::Key << "wall_time_seconds" << YAML::Value << io::number(r.wall_time_seconds);
  e << YAML::Key << "config" << YAML::Value << to_yaml(s);
  e << YAML::Key << "files" << YAML::Value << YAML::BeginSeq;
  for (const auto& f : r.files) {
    e << YAML::BeginMap;
    e << YAML::Key << "path" << YAML::Value << f.path;
    e << YAML::Key << "bytes" << YAML::Value << f.bytes;
    e << YAML::Key << "sha256" << YAML::Value << f.sha256;
    e << YAML::EndMap;
  }
  e << YAML::EndSeq << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace detail

/// Runs a scenario, writing its artifacts and manifest.yaml into
/// s.output_dir. Artifacts depend only on the scenario; the manifest
/// additionally records the wall time.
inline RunResult run_scenario(const Scenario& s) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::ArtifactSink out(s.output_dir);
  RunResult r;
  r.output_dir = out.dir();
  switch (s.analysis) {
    case Analysis::wavefront:
      r.summary = detail::run_wavefront(s, out);
      break;
    case Analysis::qkd_pol:
      r.summary = detail::run_qkd_pol(s, out);
      break;
    case Analysis::qkd_oam:
      r.summary = detail::run_qkd_oam(s, out);
      break;
    case Analysis::imaging:
      r.summary = detail::run_imaging(s, out);
      break;
    case Analysis::sweep: {
      const auto rows = run_sweep(s);
      out.write("sweep.csv", sweep_csv(s.sweep.parameter, rows));
      for (const auto& row : rows) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s = %-10g QBER %.4f +- %.4f  key rate %.4f  transmittance %.4g\n",
                      s.sweep.parameter.c_str(), row.value, row.crosstalk.qber, row.crosstalk.qber_stderr,
                      row.key_rate, row.crosstalk.transmittance);
        r.summary += buf;
      }
      break;
    }
  }
  r.files = out.records();
  r.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  io::write_file(out.dir() / "manifest.yaml", detail::manifest_text(s, r));
  return r;
}

struct Manifest {
  Scenario scenario;
  std::vector<ArtifactRecord> files;
};

inline Manifest parse_manifest(const std::string& text) {
  const YAML::Node root = detail::load_yaml(text);
  require(root.IsMap() && root["config"] && root["files"], Errc::validation,
          "manifest: missing config or files section");
  Manifest m{parse_scenario(root["config"]), {}};
  for (const auto& f : root["files"])
    m.files.push_back({f["path"].as<std::string>(), f["bytes"].as<std::size_t>(), f["sha256"].as<std::string>()});
  return m;
}

struct RerunReport {
  RunResult run;
  std::vector<std::string> mismatches;
  bool identical() const { return mismatches.empty(); }
};

/// Re-executes the configuration recorded in a manifest into output_dir
/// and compares every artifact digest with the recorded one.
inline RerunReport rerun_manifest(const std::filesystem::path& manifest_path, const std::string& output_dir) {
  Manifest m = parse_manifest(read_file(manifest_path));
  m.scenario.output_dir = output_dir;
  RerunReport rep{run_scenario(m.scenario), {}};
  for (const auto& want : m.files) {
    const auto it = std::find_if(rep.run.files.begin(), rep.run.files.end(),
                                 [&](const ArtifactRecord& a) { return a.path == want.path; });
    if (it == rep.run.files.end())
      rep.mismatches.push_back(want.path + ": not produced");
    else if (it->sha256 != want.sha256)
      rep.mismatches.push_back(want.path + ": digest differs");
  }
  for (const auto& got : rep.run.files)
    if (std::none_of(m.files.begin(), m.files.end(), [&](const ArtifactRecord& a) { return a.path == got.path; }))
      rep.mismatches.push_back(got.path + ": not in manifest");
  return rep;
}

}  // namespace uwqc
