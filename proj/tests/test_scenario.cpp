#include <gtest/gtest.h>

#include <filesystem>
#include <algorithm>
#include <cmath>
#include <regex>
#include <set>
#include <string>

#include "uwqc/bundled_scenarios.hpp"
#include "uwqc/io.hpp"
#include "uwqc/runner.hpp"
#include "uwqc/scenario.hpp"

using namespace uwqc;
namespace fs = std::filesystem;

namespace {

std::string diagnostic(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::validation);
    return e.what();
  }
  ADD_FAILURE() << "accepted:\n" << text;
  return {};
}

bool positioned(const std::string& msg) { return std::regex_search(msg, std::regex("^[0-9]+:[0-9]+: ")); }

fs::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path p = fs::temp_directory_path() / ("uwqc_" + std::string(info->test_suite_name()) + "_" + info->name());
  fs::remove_all(p);
  return p;
}

std::string bundled_text(std::string_view name) {
  for (const auto& b : bundled_scenarios)
    if (b.name == name) return std::string(b.text);
  ADD_FAILURE() << "no bundled scenario " << name;
  return {};
}

const char* small_oam_sweep = R"(
analysis: sweep
frames: 30
grid: {size: 128, spacing: 50.0e-6}
waist: 0.5e-3
channel:
  length: 1.0
  attenuation: 0
  n_screens: 2
  screen_source: modal
  modal: {sigma: 0.1, j_max: 10, aperture_radius: 3.0e-3}
qkd: {ells: [-1, 1]}
sweep: {parameter: sigma_scale, values: [1, 2, 4]}
)";

}  // namespace

TEST(ParseScenario, MinimalWavefrontGetsSensorDefaults) {
  const auto s = parse_scenario("analysis: wavefront\n");
  EXPECT_EQ(s.analysis, Analysis::wavefront);
  EXPECT_EQ(s.sensor.geometry.count_x, 23);
  EXPECT_EQ(s.sensor.geometry.count_y, 23);
  EXPECT_DOUBLE_EQ(s.sensor.geometry.pitch, 150e-6);
  EXPECT_DOUBLE_EQ(s.sensor.geometry.focal_length, 5.2e-3);
  EXPECT_EQ(s.sensor.geometry.pixels_per_lenslet, 30);
  EXPECT_DOUBLE_EQ(s.sensor.geometry.pixel_size, 5e-6);
  EXPECT_EQ(s.sensor.j_max, 15);
  EXPECT_EQ(s.frames, 1);
  EXPECT_EQ(s.seed, default_seed);
  EXPECT_DOUBLE_EQ(s.channel.length, 5.5);
  EXPECT_DOUBLE_EQ(s.channel.attenuation, 5.4);
  EXPECT_DOUBLE_EQ(s.channel.refractive_index, 1.33);
  EXPECT_EQ(parse_scenario("").analysis, Analysis::wavefront);
}

TEST(ParseScenario, FramesZeroIsARangeError) {
  const auto msg = diagnostic("analysis: wavefront\nframes: 0\n");
  EXPECT_TRUE(positioned(msg)) << msg;
  EXPECT_EQ(msg.rfind("2:9: frames:", 0), 0u) << msg;
  EXPECT_NE(msg.find(">= 1"), std::string::npos) << msg;
}

TEST(ParseScenario, MisspelledKeySuggestsCorrection) {
  const auto msg = diagnostic("sensor:\n  lenslet_pich: 1.5e-4\n");
  EXPECT_EQ(msg.rfind("2:3: ", 0), 0u) << msg;
  EXPECT_NE(msg.find("unknown key 'lenslet_pich'"), std::string::npos) << msg;
  EXPECT_NE(msg.find("did you mean 'lenslet_pitch'"), std::string::npos) << msg;
  const auto far = diagnostic("zzzzzzzz: 1\n");
  EXPECT_EQ(far.find("did you mean"), std::string::npos) << far;
}

TEST(ParseScenario, SyntaxErrorIsPositioned) {
  const auto msg = diagnostic("name: x\ngrid: [1, 2\n");
  EXPECT_TRUE(positioned(msg)) << msg;
  EXPECT_NE(msg.find("syntax error"), std::string::npos) << msg;
}

TEST(ParseScenario, TypeErrors) {
  const auto a = diagnostic("frames: many\n");
  EXPECT_TRUE(positioned(a)) << a;
  EXPECT_NE(a.find("got 'many'"), std::string::npos) << a;
  const auto b = diagnostic("grid: 5\n");
  EXPECT_NE(b.find("expected a mapping"), std::string::npos) << b;
  const auto c = diagnostic("seed: -4\n");
  EXPECT_NE(c.find("seed"), std::string::npos) << c;
  const auto d = diagnostic("grid: {size: 33}\n");
  EXPECT_NE(d.find("even"), std::string::npos) << d;
}

TEST(ParseScenario, AnalysisSpecificRequirements) {
  EXPECT_NE(diagnostic("analysis: qkd-oam\n").find("qkd.ells"), std::string::npos);
  EXPECT_NE(diagnostic("analysis: qkd-oam\nqkd: {ells: [1, 1]}\n").find("distinct"), std::string::npos);
  EXPECT_NE(diagnostic("analysis: imaging\n").find("imaging.modes"), std::string::npos);
  EXPECT_NE(diagnostic("analysis: sweep\nqkd: {ells: [-1, 1]}\nsweep: {parameter: wind, values: [1]}\n")
                .find("'wind' is not a sweepable parameter"),
            std::string::npos);
  EXPECT_NE(diagnostic("analysis: sweep\nqkd: {ells: [-1, 1]}\nsweep: {parameter: length}\n").find("sweep.values"),
            std::string::npos);
  EXPECT_NE(diagnostic("analysis: sweep\nqkd: {ells: [-1, 1]}\nsweep: {parameter: sigma_scale, values: [1]}\n")
                .find("modal"),
            std::string::npos);
  EXPECT_NE(diagnostic("channel: {n_screens: 1, screen_source: kolmogorov}\n").find("r0"), std::string::npos);
  EXPECT_NE(diagnostic("analysis: holography\n").find("wavefront | qkd-pol"), std::string::npos);
  EXPECT_NE(diagnostic("channel: {modal: {sigmas: {1: 0.2}}}\n").find("piston"), std::string::npos);
  EXPECT_NE(diagnostic("imaging: {modes: [{type: petal}]}\nanalysis: imaging\n").find("ell"), std::string::npos);
  EXPECT_NE(diagnostic("channel: {occlusion: {opacity: 1.5}}\n").find("opacity"), std::string::npos);
}

TEST(ParseScenario, FullDocument) {
  const auto s = parse_scenario(R"(
name: demo
analysis: imaging
seed: 7
frames: 3
grid: {size: 128, spacing: 2.0e-5}
source: {type: lg, ell: 2, p: 1}
channel:
  n_screens: 2
  screen_source: modal
  modal: {sigma: 0.2, j_max: 10, aperture_radius: 1.2e-3, sigmas: {4: 0.5}}
  occlusion: {rate: 0.5, radius: 1.0e-4, placement_radius: 5.0e-4}
imaging:
  modes: [{type: petal, ell: 3}, {type: gaussian}]
  exposure_realizations: 2
)");
  EXPECT_EQ(s.name, "demo");
  EXPECT_EQ(s.seed, 7u);
  EXPECT_EQ(s.source, (ModeSpec{"lg", 2, 1}));
  ASSERT_EQ(s.imaging.modes.size(), 2u);
  EXPECT_EQ(s.imaging.modes[0].label(), "petal3");
  const auto cfg = s.channel.config(11, 2.0);
  EXPECT_EQ(cfg.screen_source, ScreenSource::modal);
  EXPECT_DOUBLE_EQ(cfg.modal.sigma.at(4), 1.0);
  EXPECT_DOUBLE_EQ(cfg.modal.sigma.at(5), 0.4);
  EXPECT_EQ(cfg.modal.sigma.size(), 9u);
  EXPECT_DOUBLE_EQ(cfg.occlusion.rate, 0.5);
  EXPECT_EQ(cfg.seed, 11u);
}

TEST(ParseScenario, YamlRoundTrip) {
  for (const auto& b : bundled_scenarios) {
    const auto s = parse_scenario(std::string(b.text));
    const auto text = to_yaml_text(s);
    const auto again = parse_scenario(text);
    EXPECT_EQ(to_yaml_text(again), text) << b.name;
    EXPECT_EQ(again.grid, s.grid);
    EXPECT_EQ(again.channel.modal_sigmas, s.channel.modal_sigmas);
    EXPECT_EQ(again.sweep.values, s.sweep.values);
    EXPECT_EQ(again.wavelength, s.wavelength);
  }
}

TEST(Overrides, TakePrecedenceOverFileValues) {
  auto root = detail::load_yaml("frames: 3\nchannel: {length: 2.0}\n");
  apply_override(root, "frames=7");
  apply_override(root, "channel.modal.sigma=0.25");
  apply_override(root, "qkd.ells=[-2, 2]");
  const auto s = parse_scenario(root);
  EXPECT_EQ(s.frames, 7);
  EXPECT_DOUBLE_EQ(s.channel.length, 2.0);
  EXPECT_DOUBLE_EQ(s.channel.modal_sigma, 0.25);
  EXPECT_EQ(s.qkd.ells, (std::vector<int>{-2, 2}));

  auto bad = detail::load_yaml("frames: 3\n");
  apply_override(bad, "frames=0");
  EXPECT_THROW(parse_scenario(bad), Error);
  EXPECT_THROW(apply_override(bad, "frames"), Error);
  EXPECT_THROW(apply_override(bad, "frames.x=1"), Error);
  auto empty = detail::load_yaml("");
  apply_override(empty, "grid.size=64");
  EXPECT_EQ(parse_scenario(empty).grid.size, 64);
}

TEST(Schema, ListsEveryKeyWithDefaults) {
  const auto docs = schema();
  auto find = [&](const std::string& p) -> const SchemaEntry* {
    for (const auto& e : docs)
      if (e.path == p) return &e;
    return nullptr;
  };
  for (const char* p : {"name", "analysis", "seed", "frames", "output_dir", "grid.size", "channel.length",
                        "channel.modal.sigmas", "channel.kolmogorov.r0", "channel.occlusion.rate",
                        "sensor.lenslet_pitch", "sensor.aperture_radius", "qkd.ells", "imaging.modes",
                        "imaging.modes[].type", "sweep.parameter", "sweep.values"})
    EXPECT_NE(find(p), nullptr) << p;
  EXPECT_EQ(find("sensor.lenslet_pitch")->default_value, "0.00015");
  EXPECT_EQ(find("frames")->default_value, "1");
  EXPECT_EQ(find("seed")->default_value, std::to_string(default_seed));
  for (const auto& e : docs) EXPECT_FALSE(e.description.empty()) << e.path;
  const auto md = schema_markdown();
  EXPECT_NE(md.find("| `sensor.focal_length` | number | `0.0052` |"), std::string::npos);
}

TEST(Bundled, MatchScenarioFilesAndParse) {
  std::set<std::string> names;
  for (const auto& b : bundled_scenarios) {
    names.insert(std::string(b.name));
    EXPECT_EQ(read_file(fs::path(UWQC_SCENARIO_DIR) / (std::string(b.name) + ".yaml")), std::string(b.text));
    const auto s = parse_scenario(std::string(b.text));
    EXPECT_EQ(s.name, b.name);
  }
  for (const auto& e : fs::directory_iterator(UWQC_SCENARIO_DIR))
    if (e.path().extension() == ".yaml") EXPECT_TRUE(names.count(e.path().stem().string())) << e.path();
  for (const char* n : {"fig2-polarization", "fig3-wavefront", "fig4-oam"}) EXPECT_TRUE(names.count(n)) << n;
  const auto fig3 = parse_scenario(bundled_text("fig3-wavefront"));
  EXPECT_EQ(fig3.frames, 30);
  EXPECT_EQ(fig3.sensor.j_max, 15);
  const auto fig4 = parse_scenario(bundled_text("fig4-oam"));
  ASSERT_EQ(fig4.imaging.modes.size(), 4u);
  EXPECT_EQ(fig4.imaging.modes[0].label(), "lg0");
  EXPECT_EQ(fig4.imaging.modes[1].label(), "petal4");
  EXPECT_EQ(fig4.imaging.modes[2].label(), "lg4");
  EXPECT_EQ(fig4.imaging.modes[3].label(), "lg9");
}

TEST(Sweep, AttenuationTransmittances) {
  const auto rows = run_sweep(parse_scenario(bundled_text("attenuation-sweep")));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NEAR(rows[0].crosstalk.transmittance, 0.848, 5e-4);
  EXPECT_NEAR(rows[1].crosstalk.transmittance, 0.193, 5e-4);
  EXPECT_NEAR(rows[2].crosstalk.transmittance, 1.07e-3, 1e-5);
  for (const auto& r : rows) EXPECT_LT(r.crosstalk.qber, 1e-12);
}

TEST(Sweep, ZeroTurbulenceGivesZeroQber) {
  auto root = detail::load_yaml(small_oam_sweep);
  apply_override(root, "sweep.values=[0, 0]");
  apply_override(root, "frames=3");
  const auto rows = run_sweep(parse_scenario(root));
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_LT(r.crosstalk.qber, 1e-12);
    EXPECT_NEAR(r.key_rate, 1.0, 1e-9);
  }
}

TEST(Sweep, QberNonDecreasingInTurbulence) {
  const auto rows = run_sweep(parse_scenario(small_oam_sweep));
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double se = std::hypot(rows[i].crosstalk.qber_stderr, rows[i - 1].crosstalk.qber_stderr);
    EXPECT_GE(rows[i].crosstalk.qber, rows[i - 1].crosstalk.qber - 2 * se) << i;
  }
  EXPECT_GT(rows[2].crosstalk.qber, rows[0].crosstalk.qber);
  const auto csv = sweep_csv("sigma_scale", rows);
  EXPECT_EQ(csv.rfind("parameter,value,qber,qber_stderr,key_rate,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(RunScenario, ManifestListsEveryFileWithDigest) {
  const auto dir = scratch_dir();
  auto root = detail::load_yaml(bundled_text("fig3-wavefront"));
  apply_override(root, "frames=2");
  apply_override(root, "output_dir=" + dir.string());
  const auto s = parse_scenario(root);
  const auto r = run_scenario(s);
  std::set<std::string> listed;
  for (const auto& f : r.files) {
    listed.insert(f.path);
    const auto bytes = read_file(dir / f.path);
    EXPECT_EQ(f.bytes, bytes.size());
    EXPECT_EQ(f.sha256, sha256_hex(bytes));
  }
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename() != "manifest.yaml") EXPECT_TRUE(listed.count(e.path().filename().string())) << e.path();
  for (const char* f : {"frames.csv", "averaged.csv", "ground_truth.csv", "spots_000.pgm"})
    EXPECT_TRUE(listed.count(f)) << f;
  const auto m = parse_manifest(read_file(dir / "manifest.yaml"));
  EXPECT_EQ(m.files.size(), r.files.size());
  EXPECT_EQ(to_yaml_text(m.scenario), to_yaml_text(s));
  const auto frames = read_file(dir / "frames.csv");
  EXPECT_EQ(frames.rfind("frame_id,j,n,m,a_j\r\n", 0), 0u);
  EXPECT_EQ(read_file(dir / "averaged.csv").rfind("j,mean_abs,std", 0), 0u);
}

TEST(RunScenario, RerunFromManifestIsByteIdentical) {
  const auto dir = scratch_dir();
  auto root = detail::load_yaml(bundled_text("fig2-polarization"));
  apply_override(root, "output_dir=" + (dir / "a").string());
  run_scenario(parse_scenario(root));
  const auto rep = rerun_manifest(dir / "a" / "manifest.yaml", (dir / "b").string());
  EXPECT_TRUE(rep.identical());
  for (const auto& f : rep.run.files) EXPECT_EQ(read_file(dir / "a" / f.path), read_file(dir / "b" / f.path));
  const auto report = read_file(dir / "a" / "qkd_report.csv");
  EXPECT_NE(report.find("0.0401"), std::string::npos) << report;
}

TEST(RunScenario, RerunDetectsTamperedDigest) {
  const auto dir = scratch_dir();
  auto root = detail::load_yaml(bundled_text("fig2-polarization"));
  apply_override(root, "output_dir=" + (dir / "a").string());
  const auto r = run_scenario(parse_scenario(root));
  auto text = read_file(dir / "a" / "manifest.yaml");
  const auto pos = text.find(r.files[0].sha256);
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 4, "0000");
  io::write_file(dir / "a" / "manifest.yaml", text);
  const auto rep = rerun_manifest(dir / "a" / "manifest.yaml", (dir / "b").string());
  ASSERT_EQ(rep.mismatches.size(), 1u);
  EXPECT_NE(rep.mismatches[0].find(r.files[0].path), std::string::npos);
}

TEST(RunScenario, ImagingWritesFrameSeries) {
  const auto dir = scratch_dir();
  const auto s = parse_scenario(R"(
analysis: imaging
frames: 2
output_dir: )" + dir.string() + R"(
grid: {size: 128, spacing: 25.0e-6}
waist: 0.3e-3
channel: {length: 1.0}
imaging: {modes: [{type: lg, ell: 2}, {type: petal, ell: 2}]}
)");
  const auto r = run_scenario(s);
  std::set<std::string> names;
  for (const auto& f : r.files) names.insert(f.path);
  for (const char* f : {"intensity_lg2_000.pgm", "intensity_lg2_001.pgm", "intensity_petal2_000.pgm",
                        "intensity_petal2_001.pgm", "frames.csv", "vortices.csv"})
    EXPECT_TRUE(names.count(f)) << f;
  const auto pgm = read_file(dir / "intensity_lg2_000.pgm");
  EXPECT_EQ(pgm.rfind("P5\n128 128\n65535\n", 0), 0u);
  EXPECT_EQ(pgm.size(), std::string("P5\n128 128\n65535\n").size() + 2u * 128 * 128);
}

TEST(Io, CsvQuotingAndLineEndings) {
  EXPECT_EQ(io::quote("plain"), "plain");
  EXPECT_EQ(io::quote("a,b"), "\"a,b\"");
  EXPECT_EQ(io::quote("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(io::quote("two\nlines"), "\"two\nlines\"");
  io::CsvWriter w({"x", "label"});
  w.row({"1", "l=+1,petal"});
  EXPECT_EQ(w.str(), "x,label\r\n1,\"l=+1,petal\"\r\n");
}

TEST(Io, Pgm16HeaderAndScaling) {
  const std::vector<double> v{0.0, 0.5, 1.0, 2.0, 1.0, 0.0};
  const auto p = io::pgm16(v, 3, 2);
  const std::string header = "P5\n3 2\n65535\n";
  ASSERT_EQ(p.size(), header.size() + 12);
  EXPECT_EQ(p.substr(0, header.size()), header);
  auto px = [&](std::size_t i) {
    return (static_cast<unsigned char>(p[header.size() + 2 * i]) << 8) |
           static_cast<unsigned char>(p[header.size() + 2 * i + 1]);
  };
  EXPECT_EQ(px(0), 0);
  EXPECT_EQ(px(3), 65535);
  EXPECT_EQ(px(2), 32768);
  EXPECT_THROW(io::pgm16(v, 4, 2), Error);
}

TEST(Io, NumbersRoundTrip) {
  const CounterRng rng(1);
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const double v = (rng.uniform(2 * i) - 0.5) * std::pow(10.0, 40 * rng.uniform(2 * i + 1) - 20);
    EXPECT_EQ(std::strtod(io::number(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(io::number(0.1), "0.1");
  EXPECT_EQ(io::number(0.0), "0");
  EXPECT_EQ(io::number(1.5e-4), "0.00015");
}

TEST(Io, Sha256KnownDigest) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
