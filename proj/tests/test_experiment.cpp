#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hetin/experiment.hpp"

using namespace hetin;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

// Small equal-exponent network with offloading enabled; numerics tuned for
// test runtime (loose quadrature, few drops -- individual cases override).
Config base_config() {
  SystemParams sys;
  sys.lambda1 = 1e-4;
  sys.lambda2 = 5e-4;
  sys.lambdaU = 0.01;
  sys.p1 = 10.0;
  sys.p2 = 1.0;
  sys.alpha1 = 4.0;
  sys.alpha2 = 4.0;
  sys.n1 = 8;
  sys.n2 = 4;
  sys.biasB = std::pow(10.0, 0.5);  // 5 dB
  sys.bandwidthW = 1e7;
  SchemeParams sch;
  sch.scheme = Scheme::IN;
  sch.inDof = 2;
  sch.rateThresholdTau = 5e5;
  NumericsParams num;
  num.quadRelTol = 1e-5;
  num.mcDrops = 600;
  num.rngSeed = 20260816ull;
  return make_config(sys, sch, num);
}

std::string fresh_dir(const std::string& leaf) {
  const fs::path p = fs::temp_directory_path() / ("hetin_exp_" + leaf);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  // getline drops one trailing empty field when the line ends with ','.
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

struct CsvData {
  std::vector<std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvData read_csv(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  CsvData d;
  std::string line;
  bool headerSeen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '#') {
      d.meta.push_back(line);
      continue;
    }
    if (line.empty()) continue;
    if (!headerSeen) {
      d.header = split_csv(line);
      headerSeen = true;
    } else {
      d.rows.push_back(split_csv(line));
    }
  }
  return d;
}

std::string meta_value(const CsvData& d, const std::string& key) {
  const std::string prefix = "# " + key + " = ";
  for (const auto& m : d.meta) {
    if (m.rfind(prefix, 0) == 0) return m.substr(prefix.size());
  }
  return "";
}

bool has_config_line(const CsvData& d, const std::string& needle) {
  for (const auto& m : d.meta) {
    if (m.rfind("# config: ", 0) == 0 &&
        m.find(needle) != std::string::npos) {
      return true;
    }
  }
  return false;
}

double to_d(const std::string& cell) {
  REQUIRE(!cell.empty());
  return std::stod(cell);
}

}  // namespace

TEST_CASE("sweep axes parse and name consistently") {
  CHECK(parse_axis("tau") == SweepAxis::Tau);
  CHECK(parse_axis("u") == SweepAxis::InDof);
  CHECK(parse_axis("eta") == SweepAxis::Eta);
  CHECK(parse_axis("bias") == SweepAxis::Bias);
  CHECK(parse_axis("beta") == SweepAxis::Beta);
  CHECK(std::string(axis_name(SweepAxis::Tau)) == "tau_bps");
  CHECK(std::string(axis_name(SweepAxis::InDof)) == "u");
  CHECK(std::string(axis_name(SweepAxis::Eta)) == "eta");
  CHECK(std::string(axis_name(SweepAxis::Bias)) == "bias_db");
  CHECK(std::string(axis_name(SweepAxis::Beta)) == "beta_db");
  CHECK_THROWS_AS(parse_axis("gamma"), std::invalid_argument);
  CHECK_THROWS_AS(parse_axis(""), std::invalid_argument);
}

TEST_CASE("grid parsing covers linear, geometric, and list forms") {
  const auto lin = parse_grid("lin:0:10:5");
  REQUIRE(lin.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(lin[i] == Approx(2.5 * static_cast<double>(i)).margin(1e-12));
  }

  const auto geo = parse_grid("geom:1:100:3");
  REQUIRE(geo.size() == 3);
  CHECK(geo[0] == Approx(1.0).epsilon(1e-12));
  CHECK(geo[1] == Approx(10.0).epsilon(1e-12));
  CHECK(geo[2] == Approx(100.0).epsilon(1e-12));

  const auto list = parse_grid("0.5,1.5,3");
  REQUIRE(list.size() == 3);
  CHECK(list[0] == 0.5);
  CHECK(list[2] == 3.0);

  CHECK(parse_grid("lin:5:9:1") == std::vector<double>{5.0});
  CHECK(parse_grid("geom:2:8:1") == std::vector<double>{2.0});

  CHECK_THROWS_AS(parse_grid(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_grid(",,"), std::invalid_argument);
  CHECK_THROWS_AS(parse_grid("lin:0:1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_grid("lin:0:1:0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_grid("geom:0:10:4"), std::invalid_argument);
  CHECK_THROWS_AS(parse_grid("geom:1:-2:4"), std::invalid_argument);
  CHECK_THROWS_AS(parse_grid("3,2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_grid("1,1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_grid("a,b"), std::invalid_argument);
  CHECK_THROWS_AS(parse_grid("lin:1:x:3"), std::invalid_argument);
}

TEST_CASE("method lists parse") {
  const auto one = parse_methods("full");
  REQUIRE(one.size() == 1);
  CHECK(one[0] == Method::Full);

  const auto three = parse_methods("full,mla,mc");
  REQUIRE(three.size() == 3);
  CHECK(three[0] == Method::Full);
  CHECK(three[1] == Method::Mla);
  CHECK(three[2] == Method::MonteCarlo);

  const auto sparse = parse_methods("mc,,");
  REQUIRE(sparse.size() == 1);
  CHECK(sparse[0] == Method::MonteCarlo);

  CHECK_THROWS_AS(parse_methods("fast"), std::invalid_argument);
  CHECK_THROWS_AS(parse_methods(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_methods(",,"), std::invalid_argument);
}

TEST_CASE("experiment spec validation rejects empty parts") {
  ExperimentSpec spec;
  spec.cfg = base_config();
  spec.grid = {1e5};
  spec.methods = {Method::Full};
  CHECK_NOTHROW(spec.require_valid());

  ExperimentSpec noGrid = spec;
  noGrid.grid.clear();
  CHECK_THROWS_AS(noGrid.require_valid(), std::invalid_argument);

  ExperimentSpec noMethods = spec;
  noMethods.methods.clear();
  CHECK_THROWS_AS(noMethods.require_valid(), std::invalid_argument);

  ExperimentSpec badCfg = spec;
  badCfg.cfg.sys.alpha1 = 1.5;  // path-loss exponent must exceed 2
  CHECK_THROWS_AS(badCfg.require_valid(), std::invalid_argument);
}

TEST_CASE("csv writer stages in memory and commits atomically") {
  const std::string dir = fresh_dir("writer");
  const std::string path = (fs::path(dir) / "w.csv").string();
  CsvWriter w(path);
  w.meta("k", "v");
  w.header({"a", "b"});
  w.row({"1", "2"});
  CHECK_THROWS_AS(w.row({"only-one"}), std::logic_error);

  // Nothing on disk until commit; afterwards no temp file remains.
  CHECK_FALSE(fs::exists(path));
  w.commit();
  REQUIRE(fs::exists(path));
  CHECK_FALSE(fs::exists(path + ".tmp"));
  CHECK(slurp(path) == "# k = v\na,b\n1,2\n");

  // commit() creates missing output directories.
  const std::string nested = (fs::path(dir) / "sub" / "dir" / "n.csv").string();
  CsvWriter w2(nested);
  w2.header({"x"});
  w2.row({"0"});
  w2.commit();
  CHECK(fs::exists(nested));
}

TEST_CASE("experiment recipes load with overrides and relative paths") {
  const std::string dir = fresh_dir("recipe");
  save_config_file(base_config(), (fs::path(dir) / "base.conf").string());

  const std::string recipe = (fs::path(dir) / "sweep.exp").string();
  {
    std::ofstream out(recipe);
    out << "# a comment line\n"
        << "\n"
        << "name = tau_sweep\n"
        << "config = base.conf\n"
        << "axis = tau   # inline comment\n"
        << "grid = geom:1e4:1e6:3\n"
        << "methods = full,mla\n"
        << "out = results\n"
        << "override.numerics.mc_drops = 123\n"
        << "override.in_dof = 3\n";
  }
  const ExperimentSpec spec = parse_experiment_file(recipe);
  CHECK(spec.name == "tau_sweep");
  CHECK(spec.configPath == "base.conf");
  CHECK(spec.axis == SweepAxis::Tau);
  REQUIRE(spec.grid.size() == 3);
  CHECK(spec.grid.front() == Approx(1e4).epsilon(1e-12));
  CHECK(spec.grid.back() == Approx(1e6).epsilon(1e-12));
  REQUIRE(spec.methods.size() == 2);
  CHECK(spec.methods[1] == Method::Mla);
  // Relative output dirs resolve against the recipe's directory.
  CHECK(spec.outDir == (fs::path(dir) / "results").lexically_normal().string());
  CHECK(spec.cfg.num.mcDrops == 123);
  CHECK(spec.cfg.sch.inDof == 3);
  // Non-overridden keys come from the config file.
  CHECK(spec.cfg.sys.n1 == 8);
  CHECK(spec.cfg.sys.biasB == Approx(std::pow(10.0, 0.5)).epsilon(1e-9));
}

TEST_CASE("experiment recipe errors are diagnosed") {
  const std::string dir = fresh_dir("recipe_err");
  save_config_file(base_config(), (fs::path(dir) / "base.conf").string());
  const auto write = [&](const std::string& leaf, const std::string& text) {
    const std::string p = (fs::path(dir) / leaf).string();
    std::ofstream out(p);
    out << text;
    return p;
  };

  CHECK_THROWS_WITH(
      parse_experiment_file((fs::path(dir) / "missing.exp").string()),
      ContainsSubstring("cannot open"));
  CHECK_THROWS_WITH(parse_experiment_file(write("a.exp", "just words\n")),
                    ContainsSubstring("expected key=value"));
  CHECK_THROWS_WITH(
      parse_experiment_file(write("b.exp", "frobnicate = 1\n")),
      ContainsSubstring("unknown key"));
  CHECK_THROWS_WITH(parse_experiment_file(write("c.exp", "grid = 1,2\n")),
                    ContainsSubstring("missing 'config'"));
  CHECK_THROWS_WITH(
      parse_experiment_file(write("d.exp", "config = base.conf\n")),
      ContainsSubstring("missing 'grid'"));
  // Unknown override keys surface the config parser's diagnostic.
  CHECK_THROWS_WITH(
      parse_experiment_file(write("e.exp",
                                  "config = base.conf\n"
                                  "grid = 1,2\n"
                                  "override.bogus = 3\n")),
      ContainsSubstring("unknown key"));
  // Overrides that break config invariants fail spec validation.
  CHECK_THROWS_AS(
      parse_experiment_file(write("f.exp",
                                  "config = base.conf\n"
                                  "grid = 1,2\n"
                                  "override.alpha1 = 1.5\n")),
      std::invalid_argument);
}

TEST_CASE("coverage curve sweeps tau with analytic methods") {
  ExperimentSpec spec;
  spec.name = "curve";
  spec.cfg = base_config();
  spec.axis = SweepAxis::Tau;
  spec.grid = {1e5, 2e6};
  spec.methods = {Method::Full, Method::Mla};
  spec.outDir = fresh_dir("curve");

  const std::string path = run_coverage_curve(spec);
  CHECK(path == (fs::path(spec.outDir) / "curve.csv").string());
  REQUIRE(fs::exists(path));

  const CsvData d = read_csv(path);
  REQUIRE(d.header.size() == 17);
  CHECK(d.header[0] == "tau_bps");
  CHECK(d.header[1] == "scheme");
  CHECK(d.header[2] == "method");
  CHECK(d.header[3] == "overall");
  CHECK(d.header.back() == "tail_error");
  REQUIRE(d.rows.size() == 4);  // 2 grid points x 2 methods
  for (const auto& r : d.rows) REQUIRE(r.size() == 17);

  CHECK(meta_value(d, "experiment") == "curve");
  CHECK(meta_value(d, "kind") == "coverage-curve");
  CHECK(meta_value(d, "axis") == "tau_bps");
  CHECK(meta_value(d, "seed") == "20260816");
  CHECK(!meta_value(d, "git_revision").empty());
  CHECK(has_config_line(d, "lambda1"));
  CHECK(has_config_line(d, "scheme"));

  // Rows are grid-major with methods in request order.
  CHECK(to_d(d.rows[0][0]) == Approx(1e5));
  CHECK(d.rows[0][2] == "full");
  CHECK(d.rows[1][2] == "mla");
  CHECK(to_d(d.rows[2][0]) == Approx(2e6));
  for (const auto& r : d.rows) {
    CHECK(r[1] == "in");
    CHECK(r[4].empty());  // analytic rows carry no confidence interval
    const double overall = to_d(r[3]);
    CHECK(overall > 0.0);
    CHECK(overall <= 1.0);
  }
  // Coverage decreases with the rate threshold. The mean-load
  // approximation tracks the full analysis tightly at low tau but drifts
  // at high tau by design, so only the low-tau row gets a tight bound.
  CHECK(to_d(d.rows[0][3]) > to_d(d.rows[2][3]));
  CHECK(std::abs(to_d(d.rows[0][3]) - to_d(d.rows[1][3])) < 0.035);
  CHECK(std::abs(to_d(d.rows[2][3]) - to_d(d.rows[3][3])) < 0.15);

  // Companion plot script references the CSV by filename only.
  const std::string script = path + ".gnuplot";
  REQUIRE(fs::exists(script));
  const std::string body = slurp(script);
  CHECK(body.find("'curve.csv' using 1:4") != std::string::npos);
  CHECK(body.find(spec.outDir) == std::string::npos);
  CHECK(body.find("set logscale x") != std::string::npos);
}

TEST_CASE("beta-axis curve mixes analytic and simulated rows and reruns "
          "byte-identically") {
  ExperimentSpec spec;
  spec.name = "sir_curve";
  spec.cfg = base_config();
  spec.cfg.num.mcDrops = 600;
  spec.axis = SweepAxis::Beta;
  spec.grid = {-5.0, 0.0, 5.0};
  spec.methods = {Method::Full, Method::MonteCarlo};
  spec.outDir = fresh_dir("sir_curve");

  const std::string path = run_coverage_curve(spec);
  const std::string first = slurp(path);
  const CsvData d = read_csv(path);
  REQUIRE(d.rows.size() == 6);
  for (std::size_t i = 0; i < d.rows.size(); i += 2) {
    const auto& analytic = d.rows[i];
    const auto& mc = d.rows[i + 1];
    REQUIRE(analytic[2] == "full");
    REQUIRE(mc[2] == "mc");
    CHECK(analytic[4].empty());
    const double ci = to_d(mc[4]);
    CHECK(ci > 0.0);
    CHECK(std::abs(to_d(analytic[3]) - to_d(mc[3])) <
          std::max(0.08, 4.0 * ci));
  }
  // SIR coverage decreases with the threshold.
  CHECK(to_d(d.rows[0][3]) > to_d(d.rows[4][3]));

  // Same spec, same path, same bytes.
  const std::string again = run_coverage_curve(spec);
  CHECK(again == path);
  CHECK(slurp(path) == first);
}

TEST_CASE("u-axis curve forces the nulling scheme") {
  ExperimentSpec spec;
  spec.name = "dof_curve";
  spec.cfg = base_config();
  spec.cfg.sch.scheme = Scheme::SimpleOffload;  // axis overrides this
  spec.axis = SweepAxis::InDof;
  spec.grid = {0.0, 3.0};
  spec.methods = {Method::Mla};
  spec.outDir = fresh_dir("dof_curve");

  const CsvData d = read_csv(run_coverage_curve(spec));
  REQUIRE(d.rows.size() == 2);
  CHECK(d.header[0] == "u");
  for (const auto& r : d.rows) CHECK(r[1] == "in");
  CHECK(to_d(d.rows[0][3]) > 0.0);
  CHECK(to_d(d.rows[1][3]) > 0.0);
}

TEST_CASE("a failing sweep point leaves no partial output") {
  ExperimentSpec spec;
  spec.name = "broken";
  spec.cfg = base_config();
  spec.axis = SweepAxis::InDof;
  spec.grid = {2.0, 50.0};  // second point exceeds the nulling budget
  spec.methods = {Method::Mla};
  spec.outDir = fresh_dir("broken");

  CHECK_THROWS_AS(run_coverage_curve(spec), std::domain_error);
  CHECK(fs::is_empty(spec.outDir));
}

TEST_CASE("single-point eta sweep yields one row") {
  ExperimentSpec spec;
  spec.name = "one";
  spec.cfg = base_config();
  spec.axis = SweepAxis::Eta;
  spec.grid = {0.3};
  spec.methods = {Method::Mla};
  spec.outDir = fresh_dir("one");

  const std::string path = run_coverage_curve(spec);
  const CsvData d = read_csv(path);
  REQUIRE(d.rows.size() == 1);
  CHECK(d.header[0] == "eta");
  CHECK(d.rows[0][1] == "abs");
  CHECK(to_d(d.rows[0][3]) > 0.0);
  CHECK(fs::exists(path + ".gnuplot"));
}

TEST_CASE("bias-axis curve re-models per point") {
  ExperimentSpec spec;
  spec.name = "bias_curve";
  spec.cfg = base_config();
  spec.axis = SweepAxis::Bias;
  spec.grid = {2.0, 5.0};
  spec.methods = {Method::Mla};
  spec.outDir = fresh_dir("bias_curve");

  const CsvData d = read_csv(run_coverage_curve(spec));
  REQUIRE(d.rows.size() == 2);
  CHECK(d.header[0] == "bias_db");
  CHECK(d.rows[0][1] == "in");
  // A 3 dB bias change moves the association split, so coverage moves too.
  CHECK(std::abs(to_d(d.rows[0][3]) - to_d(d.rows[1][3])) > 1e-6);
}

TEST_CASE("pmf tables serialize analytic and simulated columns") {
  ExperimentSpec spec;
  spec.name = "pmf_check";
  spec.cfg = base_config();
  spec.cfg.num.mcDrops = 1200;
  spec.cfg.num.rngSeed = 11;
  spec.axis = SweepAxis::InDof;
  spec.grid = {1.0};  // unused by the pmf runner, but must be non-empty
  spec.methods = {Method::Full, Method::MonteCarlo};
  spec.outDir = fresh_dir("pmf");

  const std::string path = run_pmf(spec);
  const std::string first = slurp(path);
  const CsvData d = read_csv(path);

  const std::vector<std::string> expect = {
      "n",
      "active_offloaded",
      "active_offloaded_nearest",
      "in_dof",
      "load_pico",
      "mc_active_offloaded",
      "mc_active_offloaded_ci",
      "mc_active_offloaded_nearest",
      "mc_active_offloaded_nearest_ci"};
  CHECK(d.header == expect);
  REQUIRE(d.rows.size() >= 5);
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    REQUIRE(d.rows[i].size() == 9);
    CHECK(d.rows[i][0] == std::to_string(i));
  }

  // Analytic columns reproduce the pmf engines directly.
  const auto st = assoc_stats(spec.cfg.sys, spec.cfg.num);
  const auto active = pmf_active_offloaded(st, spec.cfg.num);
  const auto dof = pmf_in_dof(st, spec.cfg.sch.inDof, spec.cfg.num);
  double sumActive = 0.0, sumDof = 0.0, sumLoad = 0.0;
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const int n = static_cast<int>(i);
    CHECK(to_d(d.rows[i][1]) ==
          Approx(active.prob(n)).margin(1e-12).epsilon(1e-9));
    CHECK(to_d(d.rows[i][3]) ==
          Approx(dof.prob(n)).margin(1e-12).epsilon(1e-9));
    sumActive += to_d(d.rows[i][1]);
    sumDof += to_d(d.rows[i][3]);
    sumLoad += to_d(d.rows[i][4]);
  }
  CHECK(sumActive == Approx(1.0).margin(1e-4));
  CHECK(sumDof == Approx(1.0).margin(1e-6));
  CHECK(sumLoad == Approx(1.0).margin(1e-4));

  CHECK(meta_value(d, "kind") == "pmf");
  CHECK(to_d(meta_value(d, "rho")) == Approx(st.rho).epsilon(1e-9));
  CHECK(to_d(meta_value(d, "in_probability")) ==
        Approx(in_probability(st, spec.cfg.sch.inDof)).epsilon(1e-9));
  CHECK(!meta_value(d, "mc_in_probability").empty());
  CHECK(std::stoll(meta_value(d, "mc_macro_conditioned")) > 0);
  CHECK(std::stoll(meta_value(d, "mc_offload_conditioned")) > 0);

  // Simulated columns: populated near the origin, blank past the sampled
  // support; an active-at-typ's-own-macro count of zero is structural.
  CHECK(!d.rows[0][5].empty());
  CHECK(to_d(d.rows[0][7]) == 0.0);
  CHECK(d.rows.back()[5].empty());

  CHECK(fs::exists(path + ".gnuplot"));
  run_pmf(spec);
  CHECK(slurp(path) == first);
}

TEST_CASE("optimize-u sweep reports the argmax and the net gains") {
  ExperimentSpec spec;
  spec.name = "ustar";
  spec.cfg = base_config();
  spec.axis = SweepAxis::Tau;
  spec.grid = {2e4, 2e5};
  spec.methods = {Method::Mla};
  spec.outDir = fresh_dir("ustar");

  const std::string path = run_optimize_u(spec);
  const CsvData d = read_csv(path);
  REQUIRE(d.header.size() == 3 + 7);  // n1 - 1 net columns
  CHECK(d.header[0] == "tau_bps");
  CHECK(d.header[1] == "u_star");
  CHECK(d.header[3] == "net_u1");
  CHECK(d.header.back() == "net_u7");
  REQUIRE(d.rows.size() == 2);
  CHECK(meta_value(d, "kind") == "optimize-u");

  for (const auto& r : d.rows) {
    const double uStar = to_d(r[1]);
    CHECK(uStar == Approx(std::round(uStar)).margin(1e-12));
    CHECK(uStar >= 0.0);
    CHECK(uStar <= 7.0);
    CHECK(to_d(r[2]) > 0.0);
    // The running sum of the per-step nets peaks at the reported argmax
    // (up to quadrature noise between the two evaluation paths).
    double cum = 0.0, best = 0.0, atStar = 0.0;
    for (int u = 1; u <= 7; ++u) {
      cum += to_d(r[2 + static_cast<std::size_t>(u)]);
      best = std::max(best, cum);
      if (u == static_cast<int>(std::lround(uStar))) atStar = cum;
    }
    if (std::lround(uStar) == 0) atStar = 0.0;
    CHECK(atStar >= best - 2e-4);
  }

  ExperimentSpec wrong = spec;
  wrong.axis = SweepAxis::Eta;
  CHECK_THROWS_WITH(run_optimize_u(wrong), ContainsSubstring("tau axis"));
}

TEST_CASE("optimize-eta sweep writes curves and the bisection optimum") {
  ExperimentSpec spec;
  spec.name = "etastar";
  spec.cfg = base_config();
  spec.axis = SweepAxis::Eta;
  spec.grid = {0.15, 0.45};
  spec.methods = {Method::Mla, Method::MonteCarlo};  // mc is skipped
  spec.outDir = fresh_dir("etastar");

  const std::string path = run_optimize_eta(spec);
  const CsvData d = read_csv(path);
  CHECK(d.header == std::vector<std::string>{"eta", "method", "overall",
                                             "macro", "pico_unoffloaded",
                                             "offloaded"});
  REQUIRE(d.rows.size() == 2);
  for (const auto& r : d.rows) {
    CHECK(r[1] == "mla");
    for (std::size_t c = 2; c < r.size(); ++c) {
      const double v = to_d(r[c]);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  const double etaStar = to_d(meta_value(d, "eta_star"));
  CHECK(etaStar >= 1e-3);
  CHECK(etaStar <= 1.0 - 1e-3);
  CHECK(to_d(meta_value(d, "eta_star_value")) > 0.0);

  // The tau-axis variant emits one optimum per threshold.
  ExperimentSpec byTau = spec;
  byTau.name = "etastar_tau";
  byTau.axis = SweepAxis::Tau;
  byTau.grid = {2e5};
  byTau.methods = {Method::Mla};
  const CsvData t = read_csv(run_optimize_eta(byTau));
  CHECK(t.header ==
        std::vector<std::string>{"tau_bps", "eta_star", "opt_value"});
  REQUIRE(t.rows.size() == 1);
  CHECK(to_d(t.rows[0][1]) >= 1e-3);
  CHECK(to_d(t.rows[0][2]) > 0.0);

  ExperimentSpec wrong = spec;
  wrong.axis = SweepAxis::Bias;
  CHECK_THROWS_WITH(run_optimize_eta(wrong),
                    ContainsSubstring("eta or tau axis"));
}

TEST_CASE("compare-schemes sweep emits the main table and the breakdown") {
  ExperimentSpec spec;
  spec.name = "cmp";
  spec.cfg = base_config();
  spec.axis = SweepAxis::Bias;
  spec.grid = {2.0, 5.0};
  spec.methods = {Method::Mla};
  spec.outDir = fresh_dir("cmp");

  const std::string path = run_compare_schemes(spec);
  const CsvData d = read_csv(path);
  CHECK(d.header == std::vector<std::string>{"bias_db", "u_star", "eta_star",
                                             "in_at_u_star", "simple_offload",
                                             "abs_at_eta_star"});
  REQUIRE(d.rows.size() == 2);
  CHECK(meta_value(d, "kind") == "compare-schemes");
  CHECK(meta_value(d, "method") == "mla");

  struct Design {
    double uStar = 0.0, etaStar = 0.0;
  };
  std::map<double, Design> designs;
  for (const auto& r : d.rows) {
    const double uStar = to_d(r[1]);
    CHECK(uStar == Approx(std::round(uStar)).margin(1e-12));
    CHECK(uStar >= 0.0);
    CHECK(uStar <= 7.0);
    const double etaStar = to_d(r[2]);
    CHECK(etaStar >= 1e-3);
    CHECK(etaStar <= 1.0 - 1e-3);
    // The nulling optimum can always fall back to U = 0, which is exactly
    // plain offloading.
    CHECK(to_d(r[3]) >= to_d(r[4]) - 1e-9);
    designs[to_d(r[0])] = {uStar, etaStar};
  }

  const std::string brkPath =
      (fs::path(spec.outDir) / "cmp_breakdown.csv").string();
  REQUIRE(fs::exists(brkPath));
  const CsvData b = read_csv(brkPath);
  CHECK(b.header == std::vector<std::string>{"scheme", "bias_db_star",
                                             "design_parameter", "class",
                                             "class_weight", "rate_coverage"});
  CHECK(meta_value(b, "kind") == "compare-schemes-breakdown");
  REQUIRE(b.rows.size() >= 9);

  const std::vector<std::string> classes = {"macro", "pico_unoffloaded",
                                            "offloaded_nulled",
                                            "offloaded_exposed", "offloaded"};
  std::map<std::string, int> schemeRows;
  for (const auto& r : b.rows) {
    schemeRows[r[0]]++;
    const double bias = to_d(r[1]);
    REQUIRE(designs.count(bias) == 1);
    CHECK(std::find(classes.begin(), classes.end(), r[3]) != classes.end());
    if (!r[4].empty()) {
      CHECK(to_d(r[4]) >= 0.0);
      CHECK(to_d(r[4]) <= 1.0);
    }
    CHECK(to_d(r[5]) >= 0.0);
    CHECK(to_d(r[5]) <= 1.0);
    const double design = to_d(r[2]);
    if (r[0] == "in") {
      CHECK(design == Approx(designs[bias].uStar).margin(1e-12));
    } else if (r[0] == "simple_offload") {
      CHECK(design == 0.0);
    } else {
      REQUIRE(r[0] == "abs");
      CHECK(design == Approx(designs[bias].etaStar).margin(1e-12));
    }
  }
  CHECK(schemeRows["in"] >= 3);
  CHECK(schemeRows["simple_offload"] >= 3);
  CHECK(schemeRows["abs"] >= 3);

  ExperimentSpec wrong = spec;
  wrong.axis = SweepAxis::Tau;
  CHECK_THROWS_WITH(run_compare_schemes(wrong),
                    ContainsSubstring("bias axis"));
}

TEST_CASE("validation reports round-trip through json") {
  ValidationReport rep;
  rep.checks.push_back({"alpha", 0.5, 0.25, true});
  rep.checks.push_back({"beta", 0.1, 0.3, false});
  CHECK_FALSE(rep.all_pass());

  const nlohmann::json j = to_json(rep);
  CHECK(j.at("all_pass").get<bool>() == false);
  REQUIRE(j.at("checks").size() == 2);

  const ValidationReport rt = validation_report_from_json(j);
  REQUIRE(rt.checks.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(rt.checks[i].name == rep.checks[i].name);
    CHECK(rt.checks[i].threshold == rep.checks[i].threshold);
    CHECK(rt.checks[i].measured == rep.checks[i].measured);
    CHECK(rt.checks[i].pass == rep.checks[i].pass);
  }

  rep.checks[1].pass = true;
  CHECK(rep.all_pass());
  CHECK(to_json(rep).at("all_pass").get<bool>() == true);
}

TEST_CASE("validate passes on a matched configuration") {
  ExperimentSpec spec;
  spec.name = "validate_clean";
  spec.cfg = base_config();
  spec.cfg.sys.biasB = 10.0;  // balances the two pmf conditioning counts
  spec.cfg = make_config(spec.cfg.sys, spec.cfg.sch, spec.cfg.num);
  spec.cfg.num.mcDrops = 8000;
  spec.axis = SweepAxis::Tau;
  spec.grid = {2e5, 8e5};
  spec.methods = {Method::Full, Method::MonteCarlo};
  spec.outDir = fresh_dir("validate");

  const ValidationReport rep = run_validate(spec);
  REQUIRE(rep.checks.size() == 5);
  CHECK(rep.checks[0].name == "pmf_sup_norm_active_offloaded");
  CHECK(rep.checks[1].name == "pmf_sup_norm_active_nearest");
  CHECK(rep.checks[2].name == "in_probability_deviation");
  CHECK(rep.checks[3].name == "rate_coverage_sup_deviation");
  CHECK(rep.checks[4].name == "laplace_functional_3sigma_ratio");
  for (const auto& c : rep.checks) {
    INFO(c.name << ": measured " << c.measured << " vs threshold "
                << c.threshold);
    CHECK(c.threshold > 0.0);
    CHECK(c.measured >= 0.0);
    CHECK(c.pass);
  }

  const std::string jsonPath = write_validation_report(rep, spec);
  CHECK(jsonPath == (fs::path(spec.outDir) / "validate_clean.json").string());
  REQUIRE(fs::exists(jsonPath));
  const nlohmann::json j = nlohmann::json::parse(slurp(jsonPath));
  CHECK(j.at("all_pass").get<bool>() == rep.all_pass());
  const ValidationReport rt = validation_report_from_json(j);
  REQUIRE(rt.checks.size() == rep.checks.size());
  for (std::size_t i = 0; i < rt.checks.size(); ++i) {
    CHECK(rt.checks[i].name == rep.checks[i].name);
    CHECK(rt.checks[i].measured == rep.checks[i].measured);
    CHECK(rt.checks[i].pass == rep.checks[i].pass);
  }
}

TEST_CASE("validate flags a mismatched simulation") {
  ExperimentSpec spec;
  spec.name = "validate_bad";
  spec.cfg = base_config();
  spec.cfg.num.mcDrops = 1500;
  spec.axis = SweepAxis::Tau;
  spec.grid = {5e5};
  spec.methods = {Method::Full, Method::MonteCarlo};
  spec.outDir = fresh_dir("validate_bad");

  SystemParams sim = spec.cfg.sys;
  sim.alpha1 = 3.0;
  sim.alpha2 = 3.0;
  const ValidationReport rep = run_validate(spec, &sim);
  REQUIRE(rep.checks.size() == 5);
  CHECK_FALSE(rep.all_pass());
  // The interference functional is the sharpest mismatch detector: its
  // analytic side keeps the configured exponent while the samples decay
  // with the corrupted one.
  CHECK_FALSE(rep.checks[4].pass);
  CHECK(rep.checks[4].measured > 1.0);
}
