// Command-line front end: experiment runner over the two-tier nulling /
// offloading library. Each subcommand loads a flat key=value config (plus
// optional overrides), sweeps one axis, and writes a CSV with a companion
// gnuplot script, or a JSON validation report.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hetin/experiment.hpp"

namespace {

struct CommonArgs {
  std::string configPath;
  std::string experimentPath;
  std::vector<std::string> overrides;
  std::string methods;
  std::string axis;
  std::string grid;
  std::string outDir;  // empty = keep the recipe's (or spec default) out dir
  std::string name;
  std::uint64_t seed = 0;
  long long drops = 0;
  bool seedSet = false, dropsSet = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.configPath, "flat key=value config file");
  cmd->add_option("--experiment", a.experimentPath,
                  "experiment recipe file (overrides --config)");
  cmd->add_option("--set", a.overrides,
                  "config override key=value (repeatable)");
  cmd->add_option("--methods", a.methods,
                  "comma list from full,mla,mc");
  cmd->add_option("--axis", a.axis, "sweep axis: tau|u|eta|bias|beta");
  cmd->add_option("--grid", a.grid,
                  "grid: lin:lo:hi:n | geom:lo:hi:n | v1,v2,...");
  cmd->add_option("--out", a.outDir, "output directory");
  cmd->add_option("--name", a.name, "experiment name (output basename)");
  cmd->add_option("--seed", a.seed, "Monte Carlo master seed")
      ->each([&a](const std::string&) { a.seedSet = true; });
  cmd->add_option("--drops", a.drops, "Monte Carlo drops")
      ->each([&a](const std::string&) { a.dropsSet = true; });
}

hetin::ExperimentSpec build_spec(const CommonArgs& a,
                                 const std::string& defaultName,
                                 hetin::SweepAxis defaultAxis,
                                 const std::string& defaultGrid) {
  hetin::ExperimentSpec spec;
  if (!a.experimentPath.empty()) {
    spec = hetin::parse_experiment_file(a.experimentPath);
  } else {
    if (a.configPath.empty()) {
      throw std::invalid_argument("need --config or --experiment");
    }
    spec.cfg = hetin::load_config_file(a.configPath);
    spec.configPath = a.configPath;
    spec.name = defaultName;
    spec.axis = defaultAxis;
    spec.grid = hetin::parse_grid(defaultGrid);
  }
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got '" + kv +
                                  "'");
    }
    hetin::config_set(spec.cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!a.axis.empty()) spec.axis = hetin::parse_axis(a.axis);
  if (!a.grid.empty()) spec.grid = hetin::parse_grid(a.grid);
  if (!a.methods.empty()) spec.methods = hetin::parse_methods(a.methods);
  if (!a.name.empty()) spec.name = a.name;
  if (!a.outDir.empty()) spec.outDir = a.outDir;
  if (a.seedSet) spec.cfg.num.rngSeed = a.seed;
  if (a.dropsSet) spec.cfg.num.mcDrops = a.drops;
  spec.require_valid();
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Rate-coverage analysis of inter-tier nulling and offloading in "
      "two-tier downlink networks"};
  app.require_subcommand(1);

  CommonArgs aCurve, aOptU, aOptEta, aCompare, aPmf, aValidate;
  CLI::App* cCurve = app.add_subcommand(
      "coverage-curve", "rate/SIR coverage sweep (CSV + plot script)");
  add_common(cCurve, aCurve);
  CLI::App* cOptU = app.add_subcommand(
      "optimize-u", "optimal nulling budget U*(tau) staircase");
  add_common(cOptU, aOptU);
  CLI::App* cOptEta = app.add_subcommand(
      "optimize-eta", "resource-partitioning share sweep / optimum");
  add_common(cOptEta, aOptEta);
  CLI::App* cCompare = app.add_subcommand(
      "compare-schemes",
      "bias sweep: nulling at U*, plain offloading, partitioning at eta*");
  add_common(cCompare, aCompare);
  CLI::App* cPmf = app.add_subcommand(
      "pmf", "offloaded-count and load distributions");
  add_common(cPmf, aPmf);
  CLI::App* cValidate = app.add_subcommand(
      "validate", "analytic-vs-simulation agreement report (JSON)");
  add_common(cValidate, aValidate);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cCurve->parsed()) {
      const auto spec = build_spec(aCurve, "coverage_curve",
                                   hetin::SweepAxis::Tau, "geom:1e4:1e7:25");
      std::printf("wrote %s\n", hetin::run_coverage_curve(spec).c_str());
    } else if (cOptU->parsed()) {
      const auto spec = build_spec(aOptU, "optimize_u", hetin::SweepAxis::Tau,
                                   "geom:1e3:1e6:16");
      std::printf("wrote %s\n", hetin::run_optimize_u(spec).c_str());
    } else if (cOptEta->parsed()) {
      const auto spec = build_spec(aOptEta, "optimize_eta",
                                   hetin::SweepAxis::Eta, "lin:0.01:0.99:50");
      std::printf("wrote %s\n", hetin::run_optimize_eta(spec).c_str());
    } else if (cCompare->parsed()) {
      const auto spec = build_spec(aCompare, "compare_schemes",
                                   hetin::SweepAxis::Bias, "lin:0:14:29");
      std::printf("wrote %s\n", hetin::run_compare_schemes(spec).c_str());
    } else if (cPmf->parsed()) {
      const auto spec =
          build_spec(aPmf, "pmf", hetin::SweepAxis::Tau, "1");
      std::printf("wrote %s\n", hetin::run_pmf(spec).c_str());
    } else if (cValidate->parsed()) {
      const auto spec = build_spec(aValidate, "validation",
                                   hetin::SweepAxis::Tau, "geom:1e5:2e6:6");
      const auto report = hetin::run_validate(spec);
      const auto path = hetin::write_validation_report(report, spec);
      for (const auto& c : report.checks) {
        std::printf("%-36s measured=%.6g threshold=%.6g  %s\n",
                    c.name.c_str(), c.measured, c.threshold,
                    c.pass ? "pass" : "FAIL");
      }
      std::printf("wrote %s\n", path.c_str());
      return report.all_pass() ? 0 : 2;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
