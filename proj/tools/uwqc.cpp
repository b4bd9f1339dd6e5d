// uwqc: scenario-driven front end for the underwater link simulator.
//
// Exit codes: 0 success, 1 validation, 2 runtime, 3 I/O.
// Value precedence: command-line flags > scenario file > built-in defaults.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "uwqc/bundled_scenarios.hpp"
#include "uwqc/runner.hpp"
#include "uwqc/scenario.hpp"

namespace {

enum Exit { ok = 0, validation = 1, runtime = 2, io_error = 3 };

struct ScenarioArgs {
  std::string source;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> frames;
  std::optional<std::string> output_dir;
};

void add_scenario_args(CLI::App* cmd, ScenarioArgs& a, bool required = true) {
  auto* opt = cmd->add_option("scenario", a.source, "Scenario file, or the name of a bundled scenario");
  if (required) opt->required();
  cmd->add_option("--set", a.sets, "Override a value, e.g. --set channel.attenuation=1.3 (repeatable)");
  cmd->add_option("--seed", a.seed, "Master seed");
  cmd->add_option("--frames", a.frames, "Frames or Monte Carlo realisations");
  cmd->add_option("-o,--output-dir", a.output_dir, "Output directory");
}

std::string scenario_text(const std::string& source) {
  for (const auto& b : uwqc::bundled_scenarios)
    if (b.name == source) return std::string(b.text);
  if (std::filesystem::exists(source)) return uwqc::read_file(source);
  throw uwqc::Error(uwqc::Errc::io, "no scenario file or bundled scenario named '" + source + "'");
}

uwqc::Scenario load(const ScenarioArgs& a, const std::vector<std::string>& extra = {}) {
  YAML::Node root = uwqc::detail::load_yaml(scenario_text(a.source));
  for (const auto& s : a.sets) uwqc::apply_override(root, s);
  for (const auto& s : extra) uwqc::apply_override(root, s);
  if (a.seed) uwqc::apply_override(root, "seed=" + std::to_string(*a.seed));
  if (a.frames) uwqc::apply_override(root, "frames=" + std::to_string(*a.frames));
  if (a.output_dir) uwqc::apply_override(root, "output_dir=" + *a.output_dir);
  return uwqc::parse_scenario(root);
}

void report(const uwqc::RunResult& r) {
  std::cout << r.summary;
  std::cout << "wrote " << r.files.size() << " files and manifest.yaml to " << r.output_dir.string() << " in ";
  std::printf("%.2f s\n", r.wall_time_seconds);
  std::fflush(stdout);
}

int run(const uwqc::Scenario& s) {
  report(uwqc::run_scenario(s));
  return ok;
}

int exit_code(uwqc::Errc c) {
  switch (c) {
    case uwqc::Errc::validation:
    case uwqc::Errc::invalid_argument:
      return validation;
    case uwqc::Errc::io:
      return io_error;
    default:
      return runtime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Underwater quantum channel simulator"};
  app.set_version_flag("--version", std::string(UWQC_VERSION));
  app.require_subcommand(1);

  ScenarioArgs sim_args, wfs_args, qkd_args, sweep_args;
  auto* sim = app.add_subcommand("simulate", "Run any scenario and write its artifacts");
  add_scenario_args(sim, sim_args);

  auto* wfs = app.add_subcommand("wfs", "Run a wavefront-sensing scenario");
  add_scenario_args(wfs, wfs_args);

  auto* qkd = app.add_subcommand("qkd", "Run a QKD scenario, or report on a given QBER");
  add_scenario_args(qkd, qkd_args, false);
  std::optional<double> qber;
  qkd->add_option("--qber", qber, "Print the BB84 report for this error rate and exit")->check(CLI::Range(0.0, 0.5));

  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter of an OAM QKD scenario");
  add_scenario_args(sweep, sweep_args);
  std::string param;
  std::vector<double> values;
  sweep->add_option("--param", param, "sigma_scale, r0, attenuation or length");
  sweep->add_option("--values", values, "Comma-separated values")->delimiter(',');

  auto* scen = app.add_subcommand("scenarios", "Bundled scenarios");
  scen->require_subcommand(1);
  scen->add_subcommand("list", "List bundled scenarios");
  auto* show = scen->add_subcommand("show", "Print a bundled scenario");
  std::string show_name;
  show->add_option("name", show_name)->required();

  auto* schema = app.add_subcommand("schema", "Print the scenario file reference (Markdown)");
  std::string schema_out;
  schema->add_option("-o,--output", schema_out, "Write to a file instead of stdout");

  auto* rerun = app.add_subcommand("rerun", "Re-execute a run manifest and verify every artifact digest");
  std::string manifest;
  std::string rerun_dir;
  rerun->add_option("manifest", manifest, "manifest.yaml of a previous run")->required();
  rerun->add_option("-o,--output-dir", rerun_dir, "Output directory for the rerun")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : validation;
  }

  try {
    if (*sim) return run(load(sim_args));
    if (*wfs) {
      const auto s = load(wfs_args);
      uwqc::require(s.analysis == uwqc::Analysis::wavefront, uwqc::Errc::validation,
                    "wfs: scenario analysis is " + uwqc::to_string(s.analysis) + ", not wavefront");
      return run(s);
    }
    if (*qkd) {
      if (qber) {
        std::cout << uwqc::io::qkd_report_text(uwqc::QkdReport::from_qber(*qber));
        return ok;
      }
      uwqc::require(!qkd_args.source.empty(), uwqc::Errc::validation, "qkd: give a scenario or --qber");
      const auto s = load(qkd_args);
      uwqc::require(s.analysis == uwqc::Analysis::qkd_pol || s.analysis == uwqc::Analysis::qkd_oam,
                    uwqc::Errc::validation, "qkd: scenario analysis is " + uwqc::to_string(s.analysis));
      return run(s);
    }
    if (*sweep) {
      std::vector<std::string> extra{"analysis=sweep"};
      if (!param.empty()) extra.push_back("sweep.parameter=" + param);
      if (!values.empty()) {
        std::string list = "[";
        for (std::size_t i = 0; i < values.size(); ++i) list += (i ? "," : "") + uwqc::io::number(values[i]);
        extra.push_back("sweep.values=" + list + "]");
      }
      return run(load(sweep_args, extra));
    }
    if (*scen) {
      if (*show) {
        for (const auto& b : uwqc::bundled_scenarios)
          if (b.name == show_name) {
            std::cout << b.text;
            return ok;
          }
        std::cerr << "error: no bundled scenario named '" << show_name << "'\n";
        return validation;
      }
      for (const auto& b : uwqc::bundled_scenarios) {
        const auto s = uwqc::parse_scenario(std::string(b.text));
        std::printf("%-24s %-10s frames=%d\n", std::string(b.name).c_str(), uwqc::to_string(s.analysis).c_str(),
                    s.frames);
      }
      return ok;
    }
    if (*schema) {
      if (schema_out.empty())
        std::cout << uwqc::schema_markdown();
      else
        uwqc::io::write_file(schema_out, uwqc::schema_markdown());
      return ok;
    }
    if (*rerun) {
      const auto rep = uwqc::rerun_manifest(manifest, rerun_dir);
      report(rep.run);
      if (rep.identical()) {
        std::cout << "all " << rep.run.files.size() << " artifacts identical to the manifest\n";
        return ok;
      }
      for (const auto& m : rep.mismatches) std::cerr << "mismatch: " << m << "\n";
      return runtime;
    }
  } catch (const uwqc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const YAML::Exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return validation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return runtime;
  }
  return ok;
}
