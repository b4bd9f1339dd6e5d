#pragma once

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "uwqc/channel.hpp"
#include "uwqc/error.hpp"
#include "uwqc/field.hpp"
#include "uwqc/io.hpp"
#include "uwqc/shack_hartmann.hpp"

namespace uwqc {

/// Seed used when a scenario does not set one.
inline constexpr std::uint64_t default_seed = 20240601;

enum class Analysis { wavefront, qkd_pol, qkd_oam, imaging, sweep };

inline const std::vector<std::pair<Analysis, std::string>>& analysis_names() {
  static const std::vector<std::pair<Analysis, std::string>> names = {{Analysis::wavefront, "wavefront"},
                                                                      {Analysis::qkd_pol, "qkd-pol"},
                                                                      {Analysis::qkd_oam, "qkd-oam"},
                                                                      {Analysis::imaging, "imaging"},
                                                                      {Analysis::sweep, "sweep"}};
  return names;
}

inline std::string to_string(Analysis a) {
  for (const auto& [k, v] : analysis_names())
    if (k == a) return v;
  return "?";
}

/// Transverse mode: gaussian, lg (LG_{ell,p}) or petal ((LG_{ell,p} + LG_{-ell,p}) / sqrt 2).
struct ModeSpec {
  std::string type = "gaussian";
  int ell = 0;
  int p = 0;

  std::string label() const {
    if (type == "gaussian") return "gaussian";
    return type + std::to_string(ell) + (p ? "p" + std::to_string(p) : "");
  }
  bool operator==(const ModeSpec&) const = default;
};

struct GridSpec {
  int size = 256;
  double spacing = 15e-6;
  Grid grid() const { return Grid(static_cast<std::size_t>(size), spacing); }
  bool operator==(const GridSpec&) const = default;
};

struct ChannelSpec {
  double length = river_link_length;
  double refractive_index = water_refractive_index;
  double attenuation = river_attenuation_db_per_m;
  int n_screens = 0;
  std::string screen_source = "none";
  double modal_sigma = 0.0;
  int modal_j_max = 15;
  std::map<int, double> modal_sigmas;
  double modal_aperture_radius = 1e-3;
  double r0 = 0.0;
  int subharmonic_levels = KolmogorovOptions{}.subharmonic_levels;
  double cutoff_fraction = 0.5;
  OcclusionProcess occlusion;

  /// Channel for one realisation; sigma_scale multiplies every modal sigma.
  ChannelConfig config(std::uint64_t seed, double sigma_scale = 1.0) const {
    ChannelConfig c;
    c.length = length;
    c.refractive_index = refractive_index;
    c.attenuation_db_per_m = attenuation;
    c.n_screens = n_screens;
    c.seed = seed;
    c.occlusion = occlusion;
    if (screen_source == "modal") {
      c.screen_source = ScreenSource::modal;
      c.modal.sigma = uniform_modal_statistics(modal_sigma, modal_j_max);
      for (auto [j, s] : modal_sigmas) c.modal.sigma[j] = s;
      for (auto& [j, s] : c.modal.sigma) s *= sigma_scale;
      c.modal.aperture_radius = modal_aperture_radius;
    } else if (screen_source == "kolmogorov") {
      c.screen_source = ScreenSource::kolmogorov;
      c.kolmogorov.r0 = r0;
      c.kolmogorov.options.cutoff_fraction = cutoff_fraction;
      c.kolmogorov.options.subharmonic_levels = subharmonic_levels;
    }
    return c;
  }
};

struct SensorSpec {
  LensletArray geometry;
  int j_max = 15;
  double intensity_floor = 0.05;
  int refine_iterations = 2;
  double photons = 0.0;
  double read_noise = 0.0;
  std::optional<double> aperture_radius;
  bool save_images = true;
  /// Extra averaged table in waves or microns ("radians" writes none).
  std::string report_units = "radians";
};

struct QkdSpec {
  double qber = 0.0401;
  double rotation = 0.0;
  std::vector<int> ells;
  bool superposition = true;
};

struct ImagingSpec {
  std::vector<ModeSpec> modes;
  /// Independent channel realisations averaged into each intensity frame
  /// (camera integration); 1 images a single realisation.
  int exposure_realizations = 1;
};

struct SweepSpec {
  std::string parameter;
  std::vector<double> values;
};

struct Scenario {
  std::string name = "unnamed";
  Analysis analysis = Analysis::wavefront;
  std::uint64_t seed = default_seed;
  int frames = 1;
  std::string output_dir = "out";
  GridSpec grid;
  double wavelength = default_wavelength;
  ModeSpec source;
  double waist = 0.9e-3;
  ChannelSpec channel;
  SensorSpec sensor;
  QkdSpec qkd;
  ImagingSpec imaging;
  SweepSpec sweep;
};

inline const std::vector<std::string>& sweepable_parameters() {
  static const std::vector<std::string> p = {"sigma_scale", "r0", "attenuation", "length"};
  return p;
}

/// One documented scenario key, as listed in the generated reference.
struct SchemaEntry {
  std::string path;
  std::string type;
  std::string default_value;
  std::string description;
};

namespace detail {

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::string position(const YAML::Mark& m) {
  if (m.is_null()) return "";
  return std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": ";
}

[[noreturn]] inline void fail(const YAML::Mark& m, const std::string& path, const std::string& msg) {
  throw Error(Errc::validation, position(m) + path + ": " + msg);
}

template <class T>
std::string type_name() {
  if constexpr (std::is_same_v<T, double>) return "number";
  else if constexpr (std::is_same_v<T, bool>) return "boolean";
  else if constexpr (std::is_same_v<T, std::string>) return "string";
  else if constexpr (std::is_same_v<T, std::uint64_t>) return "unsigned integer";
  else return "integer";
}

template <class T>
std::string show(const T& v) {
  if constexpr (std::is_same_v<T, double>) return io::number(v);
  else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
  else if constexpr (std::is_same_v<T, std::string>) return v;
  else return std::to_string(v);
}

template <class T>
T convert(const YAML::Node& n, const std::string& path) {
  if (!n.IsScalar()) fail(n.Mark(), path, "expected a " + type_name<T>());
  try {
    if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!n.Scalar().empty() && n.Scalar()[0] == '-') throw YAML::Exception(n.Mark(), "negative");
      return n.as<std::uint64_t>();
    } else if constexpr (std::is_same_v<T, int>) {
      const auto v = n.as<long long>();
      if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw YAML::Exception(n.Mark(), "range");
      return static_cast<int>(v);
    } else {
      return n.as<T>();
    }
  } catch (const YAML::Exception&) {
    fail(n.Mark(), path, "expected a " + type_name<T>() + ", got '" + n.Scalar() + "'");
  }
}

/// Reads one mapping of the scenario document. Every key requested is
/// recorded (for unknown-key detection and for the generated reference);
/// finish() rejects keys that were never requested.
class Section {
 public:
  Section(YAML::Node node, std::string path, YAML::Mark parent_mark, std::vector<SchemaEntry>* docs)
      : node_(std::move(node)), path_(std::move(path)), mark_(parent_mark), docs_(docs) {
    if (node_ && !node_.IsNull()) {
      if (!node_.IsMap()) fail(node_.Mark(), path_.empty() ? "document" : path_, "expected a mapping");
      mark_ = node_.Mark();
    }
  }

  YAML::Mark mark() const { return mark_; }
  const std::string& path() const { return path_; }

  YAML::Node raw(const std::string& key) {
    known_.insert(key);
    if (!node_ || !node_.IsMap()) return YAML::Node();
    return node_[key];
  }

  bool has(const std::string& key) {
    const auto n = raw(key);
    return n && !n.IsNull();
  }

  template <class T>
  T get(const std::string& key, T def, const std::string& doc,
        const std::function<std::string(const T&)>& check = {}) {
    record(key, type_name<T>(), show(def), doc);
    const auto n = raw(key);
    if (!n || n.IsNull()) return def;
    T v = convert<T>(n, sub(key));
    if (check) {
      const std::string msg = check(v);
      if (!msg.empty()) fail(n.Mark(), sub(key), msg);
    }
    return v;
  }

  std::string choice(const std::string& key, const std::string& def, const std::vector<std::string>& options,
                     const std::string& doc) {
    std::string alts;
    for (const auto& o : options) alts += (alts.empty() ? "" : " | ") + o;
    record(key, alts, def, doc);
    const auto n = raw(key);
    if (!n || n.IsNull()) return def;
    const auto v = convert<std::string>(n, sub(key));
    if (std::find(options.begin(), options.end(), v) == options.end())
      fail(n.Mark(), sub(key), "'" + v + "' is not one of " + alts);
    return v;
  }

  template <class T>
  std::vector<T> list(const std::string& key, const std::string& doc) {
    record(key, "list of " + type_name<T>(), "[]", doc);
    const auto n = raw(key);
    std::vector<T> out;
    if (!n || n.IsNull()) return out;
    if (!n.IsSequence()) fail(n.Mark(), sub(key), "expected a list");
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(convert<T>(n[i], sub(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  Section child(const std::string& key, const std::string& doc) {
    record(key, "mapping", "", doc);
    return Section(raw(key), sub(key), mark_, docs_);
  }

  void record(const std::string& key, const std::string& type, const std::string& def, const std::string& doc) {
    if (!docs_) return;
    const std::string p = sub(key);
    for (const auto& e : *docs_)
      if (e.path == p) return;
    docs_->push_back({p, type, def, doc});
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      const auto key = it->first.as<std::string>();
      if (known_.count(key)) continue;
      std::string best;
      std::size_t best_d = std::numeric_limits<std::size_t>::max();
      for (const auto& k : known_) {
        const auto d = edit_distance(key, k);
        if (d < best_d) best_d = d, best = k;
      }
      std::string msg = "unknown key '" + key + "'";
      if (!best.empty() && best_d <= std::max<std::size_t>(2, key.size() / 3)) msg += "; did you mean '" + best + "'?";
      fail(it->first.Mark(), path_.empty() ? "document" : path_, msg);
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  YAML::Mark mark_;
  std::vector<SchemaEntry>* docs_;
  std::set<std::string> known_;
};

inline std::function<std::string(const double&)> positive() {
  return [](const double& v) { return v > 0.0 ? "" : "must be > 0"; };
}
inline std::function<std::string(const double&)> non_negative() {
  return [](const double& v) { return v >= 0.0 ? "" : "must be >= 0"; };
}
inline std::function<std::string(const int&)> at_least(int lo) {
  return [lo](const int& v) { return v >= lo ? "" : "must be >= " + std::to_string(lo); };
}
inline std::function<std::string(const double&)> within(double lo, double hi) {
  return [lo, hi](const double& v) {
    return v >= lo && v <= hi ? "" : "must lie in [" + io::number(lo) + ", " + io::number(hi) + "]";
  };
}

inline ModeSpec parse_mode(Section& s, const ModeSpec& def) {
  ModeSpec m;
  m.type = s.choice("type", def.type, {"gaussian", "lg", "petal"}, "Transverse mode family.");
  m.ell = s.get<int>("ell", def.ell, "Azimuthal index (topological charge) for lg and petal modes.");
  m.p = s.get<int>("p", def.p, "Radial index for lg and petal modes.", at_least(0));
  if (m.type == "petal" && m.ell == 0) fail(s.mark(), s.sub("ell"), "petal mode needs ell != 0");
  s.finish();
  return m;
}

inline Scenario parse_document(const YAML::Node& root, std::vector<SchemaEntry>* docs) {
  Section top(root, "", YAML::Mark::null_mark(), docs);
  Scenario s;
  s.name = top.get<std::string>("name", s.name, "Scenario name; used in the manifest and listings.");
  std::vector<std::string> analyses;
  for (const auto& [k, v] : analysis_names()) analyses.push_back(v);
  const auto analysis = top.choice("analysis", "wavefront", analyses,
                                   "Experiment to run: sensor measurement series, polarization or OAM "
                                   "detection matrix, intensity image series, or parameter sweep.");
  for (const auto& [k, v] : analysis_names())
    if (v == analysis) s.analysis = k;
  s.seed = top.get<std::uint64_t>("seed", s.seed, "Master seed; every random draw is split from it.");
  s.frames = top.get<int>("frames", s.frames,
                          "Measurement frames (wavefront, imaging) or Monte Carlo realisations (qkd-oam, sweep).",
                          at_least(1));
  s.output_dir = top.get<std::string>("output_dir", s.output_dir, "Directory receiving artifacts and the manifest.");
  s.wavelength = top.get<double>("wavelength", s.wavelength, "Vacuum wavelength in meters.", positive());

  {
    auto g = top.child("grid", "Simulation grid.");
    s.grid.size = g.get<int>("size", s.grid.size, "Samples per side (even, >= 16).", [](const int& v) {
      return v >= 16 && v % 2 == 0 ? "" : "must be even and >= 16";
    });
    s.grid.spacing = g.get<double>("spacing", s.grid.spacing, "Sample spacing in meters.", positive());
    g.finish();
  }
  {
    auto src = top.child("source", "Transmitted beam.");
    s.source = parse_mode(src, s.source);
  }
  s.waist = top.get<double>("waist", s.waist, "Beam waist w0 of every transmitted mode, meters.", positive());

  {
    auto c = top.child("channel", "Underwater link.");
    auto& ch = s.channel;
    ch.length = c.get<double>("length", ch.length, "Link length in meters.", positive());
    ch.refractive_index =
        c.get<double>("refractive_index", ch.refractive_index, "Refractive index of the water.",
                      [](const double& v) { return v >= 1.0 ? "" : "must be >= 1"; });
    ch.attenuation = c.get<double>("attenuation", ch.attenuation, "Attenuation coefficient in dB/m.", non_negative());
    ch.n_screens = c.get<int>("n_screens", ch.n_screens, "Phase screens spaced evenly along the link.", at_least(0));
    ch.screen_source = c.choice("screen_source", ch.screen_source, {"none", "modal", "kolmogorov"},
                                "Origin of the phase screens.");
    {
      auto m = c.child("modal", "Random Zernike screens.");
      ch.modal_sigma = m.get<double>("sigma", ch.modal_sigma, "Coefficient standard deviation for j = 2..j_max, radians.",
                                     non_negative());
      ch.modal_j_max = m.get<int>("j_max", ch.modal_j_max, "Highest randomised mode index.", at_least(2));
      ch.modal_aperture_radius = m.get<double>("aperture_radius", ch.modal_aperture_radius,
                                               "Radius of the unit disk of the Zernike basis, meters.", positive());
      m.record("sigmas", "mapping of j to number", "{}", "Per-mode standard deviations overriding sigma.");
      const auto sig = m.raw("sigmas");
      if (sig && !sig.IsNull()) {
        if (!sig.IsMap()) fail(sig.Mark(), m.sub("sigmas"), "expected a mapping of j to sigma");
        for (auto it = sig.begin(); it != sig.end(); ++it) {
          const int j = convert<int>(it->first, m.sub("sigmas"));
          if (j < 2) fail(it->first.Mark(), m.sub("sigmas"), "j must be >= 2 (piston is not randomised)");
          const double v = convert<double>(it->second, m.sub("sigmas") + "." + std::to_string(j));
          if (v < 0.0) fail(it->second.Mark(), m.sub("sigmas") + "." + std::to_string(j), "must be >= 0");
          ch.modal_sigmas[j] = v;
        }
      }
      m.finish();
    }
    {
      auto k = c.child("kolmogorov", "Kolmogorov screens.");
      ch.r0 = k.get<double>("r0", ch.r0, "Fried parameter of each screen, meters.", non_negative());
      ch.subharmonic_levels = k.get<int>("subharmonic_levels", ch.subharmonic_levels,
                                         "Levels of low-frequency subharmonic compensation.", at_least(0));
      ch.cutoff_fraction = k.get<double>("cutoff_fraction", ch.cutoff_fraction,
                                         "Spectral cutoff as a fraction of the Nyquist frequency.", within(0.0, 1.0));
      k.finish();
    }
    {
      auto o = c.child("occlusion", "Floating occluders (bubbles, particles, fish).");
      auto& oc = ch.occlusion;
      oc.rate = o.get<double>("rate", oc.rate, "Mean occluders per realisation.", non_negative());
      oc.radius = o.get<double>("radius", oc.radius, "Occluder radius, meters.", non_negative());
      oc.opacity = o.get<double>("opacity", oc.opacity, "Fraction of amplitude blocked.", within(0.0, 1.0));
      oc.placement_radius = o.get<double>("placement_radius", oc.placement_radius,
                                          "Occluder centres are uniform over a disk of this radius, meters.",
                                          non_negative());
      o.finish();
    }
    c.finish();
    if (ch.screen_source == "kolmogorov" && ch.n_screens > 0 && !(ch.r0 > 0.0))
      fail(c.mark(), "channel.kolmogorov.r0", "required and > 0 when screen_source is kolmogorov");
  }

  {
    auto se = top.child("sensor", "Shack-Hartmann wavefront sensor.");
    auto& geo = s.sensor.geometry;
    geo.count_x = se.get<int>("lenslets_x", geo.count_x, "Lenslets across.", at_least(1));
    geo.count_y = se.get<int>("lenslets_y", geo.count_y, "Lenslets down.", at_least(1));
    geo.pitch = se.get<double>("lenslet_pitch", geo.pitch, "Lenslet pitch, meters.", positive());
    geo.focal_length = se.get<double>("focal_length", geo.focal_length, "Lenslet focal length, meters.", positive());
    geo.pixel_size = se.get<double>("pixel_size", geo.pixel_size, "Camera pixel size, meters.", positive());
    geo.pixels_per_lenslet =
        se.get<int>("pixels_per_lenslet", geo.pixels_per_lenslet, "Camera pixels across one lenslet.", at_least(1));
    s.sensor.j_max = se.get<int>("j_max", s.sensor.j_max, "Highest fitted mode index.", at_least(2));
    s.sensor.intensity_floor = se.get<double>("intensity_floor", s.sensor.intensity_floor,
                                              "Lenslets below this fraction of the brightest are invalid.",
                                              within(0.0, 1.0));
    s.sensor.refine_iterations = se.get<int>("refine_iterations", s.sensor.refine_iterations,
                                             "Model-based correction passes after the linear fit.", at_least(0));
    s.sensor.photons = se.get<double>("photons", s.sensor.photons, "Photo-electrons per frame; 0 disables shot noise.",
                                      non_negative());
    s.sensor.read_noise =
        se.get<double>("read_noise", s.sensor.read_noise, "Gaussian read noise per pixel.", non_negative());
    se.record("aperture_radius", "number", "inscribed", "Fit aperture radius, meters; defaults to the inscribed disk.");
    if (se.has("aperture_radius")) {
      const auto n = se.raw("aperture_radius");
      const double r = convert<double>(n, se.sub("aperture_radius"));
      if (!(r > 0.0)) fail(n.Mark(), se.sub("aperture_radius"), "must be > 0");
      s.sensor.aperture_radius = r;
    }
    s.sensor.save_images = se.get<bool>("save_images", s.sensor.save_images, "Write spot and phase images.");
    s.sensor.report_units = se.choice("report_units", s.sensor.report_units, {"radians", "waves", "microns"},
                                      "Also write averaged coefficients in these units.");
    se.finish();
  }

  {
    auto q = top.child("qkd", "Key distribution analysis.");
    s.qkd.qber = q.get<double>("qber", s.qkd.qber,
                               "Polarization channel calibration: error rate of the depolarizing channel.",
                               within(0.0, 0.5));
    s.qkd.rotation = q.get<double>("rotation", s.qkd.rotation, "Polarization rotation of the channel, radians.");
    s.qkd.ells = q.list<int>("ells", "OAM values of the computational basis (qkd-oam, sweep).");
    s.qkd.superposition =
        q.get<bool>("superposition", s.qkd.superposition, "Add the mutually unbiased superposition basis.");
    q.finish();
    if (s.analysis == Analysis::qkd_oam || s.analysis == Analysis::sweep) {
      if (s.qkd.ells.size() < 2) fail(q.mark(), "qkd.ells", "at least two OAM values are required");
      const std::set<int> u(s.qkd.ells.begin(), s.qkd.ells.end());
      if (u.size() != s.qkd.ells.size()) fail(q.mark(), "qkd.ells", "OAM values must be distinct");
    }
  }

  {
    auto im = top.child("imaging", "Intensity image series.");
    im.record("modes", "list of mode mappings", "[]", "Modes imaged after the channel, each with type, ell and p.");
    const auto modes = im.raw("modes");
    if (modes && !modes.IsNull()) {
      if (!modes.IsSequence()) fail(modes.Mark(), "imaging.modes", "expected a list");
      for (std::size_t i = 0; i < modes.size(); ++i) {
        Section ms(modes[i], "imaging.modes[" + std::to_string(i) + "]", modes.Mark(), nullptr);
        if (!modes[i].IsMap()) fail(modes[i].Mark(), "imaging.modes[" + std::to_string(i) + "]", "expected a mapping");
        s.imaging.modes.push_back(parse_mode(ms, ModeSpec{}));
      }
    }
    s.imaging.exposure_realizations =
        im.get<int>("exposure_realizations", s.imaging.exposure_realizations,
                    "Channel realisations averaged into each intensity frame.", at_least(1));
    im.finish();
    if (s.analysis == Analysis::imaging && s.imaging.modes.empty())
      fail(im.mark(), "imaging.modes", "required for the imaging analysis");
  }

  {
    auto sw = top.child("sweep", "Parameter sweep over the qkd-oam analysis.");
    s.sweep.parameter = sw.get<std::string>("parameter", "", "One of sigma_scale, r0, attenuation, length.");
    s.sweep.values = sw.list<double>("values", "Values of the swept parameter.");
    sw.finish();
    if (s.analysis == Analysis::sweep) {
      const auto& ps = sweepable_parameters();
      if (std::find(ps.begin(), ps.end(), s.sweep.parameter) == ps.end())
        fail(sw.mark(), "sweep.parameter", "'" + s.sweep.parameter + "' is not a sweepable parameter");
      if (s.sweep.values.empty()) fail(sw.mark(), "sweep.values", "at least one value is required");
      if (s.sweep.parameter == "sigma_scale" && s.channel.screen_source != "modal")
        fail(sw.mark(), "sweep.parameter", "sigma_scale needs channel.screen_source: modal");
      if (s.sweep.parameter == "r0" && s.channel.screen_source != "kolmogorov")
        fail(sw.mark(), "sweep.parameter", "r0 needs channel.screen_source: kolmogorov");
    }
  }
  top.finish();
  return s;
}

inline YAML::Node load_yaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw Error(Errc::validation, position(e.mark) + "syntax error: " + e.msg);
  }
}

}  // namespace detail

inline Scenario parse_scenario(const YAML::Node& root) { return detail::parse_document(root, nullptr); }

/// Parses and validates a scenario document. Every failure is an
/// Error(Errc::validation) whose message starts with "line:column: ".
inline Scenario parse_scenario(const std::string& text) { return parse_scenario(detail::load_yaml(text)); }

/// Applies "a.b.c=value" overrides to a document before validation, so
/// flag values get the same checks and diagnostics as file values.
inline void apply_override(YAML::Node& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, Errc::validation, "override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq);
  YAML::Node value = detail::load_yaml(assignment.substr(eq + 1));
  std::vector<std::string> keys;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    keys.push_back(path.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    YAML::Node next = chain.back()[keys[i]];
    if (!next || next.IsNull()) {
      chain.back()[keys[i]] = YAML::Node(YAML::NodeType::Map);
      next = chain.back()[keys[i]];
    }
    require(next.IsMap(), Errc::validation, "override '" + path + "': '" + keys[i] + "' is not a mapping");
    chain.push_back(next);
  }
  chain.back()[keys.back()] = value;
}

/// Reference of every scenario key, produced by the parser itself.
inline std::vector<SchemaEntry> schema() {
  std::vector<SchemaEntry> docs;
  detail::parse_document(YAML::Node(YAML::NodeType::Map), &docs);
  std::vector<SchemaEntry> mode;
  {
    detail::Section s(YAML::Node(YAML::NodeType::Map), "imaging.modes[]", YAML::Mark::null_mark(), &mode);
    detail::parse_mode(s, ModeSpec{});
  }
  docs.insert(docs.end(), mode.begin(), mode.end());
  return docs;
}

inline std::string schema_markdown() {
  std::string out =
      "# Scenario file reference\n\n"
      "Scenario files are YAML mappings. Unknown keys are rejected. Command-line flags override file values, "
      "which override the defaults below.\n\n"
      "| key | type | default | description |\n|---|---|---|---|\n";
  for (const auto& e : schema())
    if (e.type != "mapping")
      out += "| `" + e.path + "` | " + e.type + " | " + (e.default_value.empty() ? "" : "`" + e.default_value + "`") +
             " | " + e.description + " |\n";
  return out;
}

/// Fully resolved scenario as a document that parses back to the same
/// scenario; numbers are written in shortest round-trip form.
inline YAML::Node to_yaml(const Scenario& s) {
  auto num = [](double v) { return YAML::Node(io::number(v)); };
  auto mode = [](const ModeSpec& m) {
    YAML::Node n;
    n["type"] = m.type;
    n["ell"] = m.ell;
    n["p"] = m.p;
    return n;
  };
  YAML::Node r;
  r["name"] = s.name;
  r["analysis"] = to_string(s.analysis);
  r["seed"] = std::to_string(s.seed);
  r["frames"] = s.frames;
  r["output_dir"] = s.output_dir;
  r["wavelength"] = num(s.wavelength);
  r["grid"]["size"] = s.grid.size;
  r["grid"]["spacing"] = num(s.grid.spacing);
  r["source"] = mode(s.source);
  r["waist"] = num(s.waist);
  YAML::Node c;
  c["length"] = num(s.channel.length);
  c["refractive_index"] = num(s.channel.refractive_index);
  c["attenuation"] = num(s.channel.attenuation);
  c["n_screens"] = s.channel.n_screens;
  c["screen_source"] = s.channel.screen_source;
  c["modal"]["sigma"] = num(s.channel.modal_sigma);
  c["modal"]["j_max"] = s.channel.modal_j_max;
  c["modal"]["aperture_radius"] = num(s.channel.modal_aperture_radius);
  if (!s.channel.modal_sigmas.empty())
    for (auto [j, v] : s.channel.modal_sigmas) c["modal"]["sigmas"][std::to_string(j)] = num(v);
  c["kolmogorov"]["r0"] = num(s.channel.r0);
  c["kolmogorov"]["subharmonic_levels"] = s.channel.subharmonic_levels;
  c["kolmogorov"]["cutoff_fraction"] = num(s.channel.cutoff_fraction);
  c["occlusion"]["rate"] = num(s.channel.occlusion.rate);
  c["occlusion"]["radius"] = num(s.channel.occlusion.radius);
  c["occlusion"]["opacity"] = num(s.channel.occlusion.opacity);
  c["occlusion"]["placement_radius"] = num(s.channel.occlusion.placement_radius);
  r["channel"] = c;
  YAML::Node se;
  const auto& g = s.sensor.geometry;
  se["lenslets_x"] = g.count_x;
  se["lenslets_y"] = g.count_y;
  se["lenslet_pitch"] = num(g.pitch);
  se["focal_length"] = num(g.focal_length);
  se["pixel_size"] = num(g.pixel_size);
  se["pixels_per_lenslet"] = g.pixels_per_lenslet;
  se["j_max"] = s.sensor.j_max;
  se["intensity_floor"] = num(s.sensor.intensity_floor);
  se["refine_iterations"] = s.sensor.refine_iterations;
  se["photons"] = num(s.sensor.photons);
  se["read_noise"] = num(s.sensor.read_noise);
  if (s.sensor.aperture_radius) se["aperture_radius"] = num(*s.sensor.aperture_radius);
  se["save_images"] = s.sensor.save_images;
  se["report_units"] = s.sensor.report_units;
  r["sensor"] = se;
  YAML::Node q;
  q["qber"] = num(s.qkd.qber);
  q["rotation"] = num(s.qkd.rotation);
  q["ells"] = YAML::Node(YAML::NodeType::Sequence);
  for (int l : s.qkd.ells) q["ells"].push_back(l);
  q["superposition"] = s.qkd.superposition;
  r["qkd"] = q;
  r["imaging"]["modes"] = YAML::Node(YAML::NodeType::Sequence);
  for (const auto& m : s.imaging.modes) r["imaging"]["modes"].push_back(mode(m));
  r["imaging"]["exposure_realizations"] = s.imaging.exposure_realizations;
  r["sweep"]["parameter"] = s.sweep.parameter;
  r["sweep"]["values"] = YAML::Node(YAML::NodeType::Sequence);
  for (double v : s.sweep.values) r["sweep"]["values"].push_back(num(v));
  return r;
}

inline std::string to_yaml_text(const Scenario& s) {
  YAML::Emitter e;
  e << to_yaml(s);
  return std::string(e.c_str()) + "\n";
}

}  // namespace uwqc
