#pragma once
// Experiment orchestration: sweep specifications, deterministic CSV emission
// with full-config metadata, companion gnuplot scripts, and the
// analytic-vs-simulation validation harness.

#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hetin/config.hpp"
#include "hetin/coverage.hpp"
#include "hetin/montecarlo.hpp"
#include "hetin/optimize.hpp"

namespace hetin {

// ---------------------------------------------------------------------------
// Sweep specification.

enum class SweepAxis { Tau, InDof, Eta, Bias, Beta };

inline const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::Tau: return "tau_bps";
    case SweepAxis::InDof: return "u";
    case SweepAxis::Eta: return "eta";
    case SweepAxis::Bias: return "bias_db";
    case SweepAxis::Beta: return "beta_db";
  }
  return "?";
}

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "tau") return SweepAxis::Tau;
  if (s == "u") return SweepAxis::InDof;
  if (s == "eta") return SweepAxis::Eta;
  if (s == "bias") return SweepAxis::Bias;
  if (s == "beta") return SweepAxis::Beta;
  throw std::invalid_argument("unknown sweep axis '" + s +
                              "' (expected tau|u|eta|bias|beta)");
}

// Grid syntax: "lin:lo:hi:n", "geom:lo:hi:n", or a comma-separated list.
inline std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> g;
  const auto parts = [](const std::string& str, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(str);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    return out;
  };
  const auto num = [](const std::string& t) {
    std::size_t pos = 0;
    const double v = std::stod(t, &pos);
    if (pos != t.size()) {
      throw std::invalid_argument("grid: bad number '" + t + "'");
    }
    return v;
  };
  if (s.rfind("lin:", 0) == 0 || s.rfind("geom:", 0) == 0) {
    const bool geom = s.front() == 'g';
    const auto f = parts(s.substr(s.find(':') + 1), ':');
    if (f.size() != 3) {
      throw std::invalid_argument("grid: expected <kind>:lo:hi:n");
    }
    const double lo = num(f[0]), hi = num(f[1]);
    const long n = std::lround(num(f[2]));
    if (n < 1) throw std::invalid_argument("grid: need n >= 1");
    if (n == 1) {
      g.push_back(lo);
    } else if (geom) {
      if (!(lo > 0.0) || !(hi > 0.0)) {
        throw std::invalid_argument("grid: geometric grid needs lo, hi > 0");
      }
      const double r = std::log(hi / lo) / static_cast<double>(n - 1);
      for (long i = 0; i < n; ++i) {
        g.push_back(lo * std::exp(r * static_cast<double>(i)));
      }
    } else {
      const double step = (hi - lo) / static_cast<double>(n - 1);
      for (long i = 0; i < n; ++i) {
        g.push_back(lo + step * static_cast<double>(i));
      }
    }
  } else {
    for (const auto& t : parts(s, ',')) {
      if (!t.empty()) g.push_back(num(t));
    }
  }
  if (g.empty()) throw std::invalid_argument("grid: empty");
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (!(g[i] > g[i - 1])) {
      throw std::invalid_argument("grid: must be strictly increasing");
    }
  }
  return g;
}

inline std::vector<Method> parse_methods(const std::string& s) {
  std::vector<Method> ms;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) {
    if (cur == "full") ms.push_back(Method::Full);
    else if (cur == "mla") ms.push_back(Method::Mla);
    else if (cur == "mc") ms.push_back(Method::MonteCarlo);
    else if (!cur.empty()) {
      throw std::invalid_argument("unknown method '" + cur +
                                  "' (expected full|mla|mc)");
    }
  }
  if (ms.empty()) throw std::invalid_argument("methods: empty");
  return ms;
}

struct ExperimentSpec {
  std::string name = "experiment";
  std::string configPath;  // informational (echoed in metadata)
  Config cfg;
  SweepAxis axis = SweepAxis::Tau;
  std::vector<double> grid;
  std::vector<Method> methods{Method::Full};
  std::string outDir = ".";

  void require_valid() const {
    if (grid.empty()) throw std::invalid_argument("experiment: empty grid");
    if (methods.empty()) {
      throw std::invalid_argument("experiment: empty method set");
    }
    const auto v = validate(cfg.sys, cfg.sch, cfg.num);
    if (!v.ok()) {
      throw std::invalid_argument("experiment: invalid config: " +
                                  v.violations.front());
    }
  }
};

// Experiment recipe files share the flat key=value syntax of config files.
// Recognized keys: name, config, axis, grid, methods, out; any key of the
// form override.<config key> is applied on top of the loaded config.
inline ExperimentSpec parse_experiment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open experiment file " + path);
  ExperimentSpec spec;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::string gridStr, line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto notWs = line.find_first_not_of(" \t\r");
    if (notWs == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(lineNo) +
                               ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{}
                                    : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "name") spec.name = value;
    else if (key == "config") spec.configPath = value;
    else if (key == "axis") spec.axis = parse_axis(value);
    else if (key == "grid") gridStr = value;
    else if (key == "methods") spec.methods = parse_methods(value);
    else if (key == "out") spec.outDir = value;
    else if (key.rfind("override.", 0) == 0) {
      overrides.emplace_back(key.substr(9), value);
    } else {
      throw std::runtime_error(path + ":" + std::to_string(lineNo) +
                               ": unknown key '" + key + "'");
    }
  }
  if (spec.configPath.empty()) {
    throw std::runtime_error(path + ": missing 'config' key");
  }
  // Config and output paths are resolved relative to the experiment file.
  namespace fs = std::filesystem;
  fs::path cp(spec.configPath);
  if (cp.is_relative()) cp = fs::path(path).parent_path() / cp;
  spec.cfg = load_config_file(cp.string());
  fs::path op(spec.outDir);
  if (op.is_relative()) {
    spec.outDir = (fs::path(path).parent_path() / op).lexically_normal()
                      .string();
    if (spec.outDir.empty()) spec.outDir = ".";
  }
  for (const auto& [k, v] : overrides) config_set(spec.cfg, k, v);
  if (gridStr.empty()) throw std::runtime_error(path + ": missing 'grid'");
  spec.grid = parse_grid(gridStr);
  spec.require_valid();
  return spec;
}

// ---------------------------------------------------------------------------
// CSV emission. Files are staged in memory and renamed into place, so an
// aborted experiment leaves no partial output.

namespace detail {

inline std::string csv_num(double v) {
  if (std::isnan(v)) return "";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string git_revision() {
  FILE* p = ::popen("git rev-parse --short HEAD 2>/dev/null", "r");
  if (p == nullptr) return "unknown";
  char buf[128] = {0};
  std::string out;
  while (std::fgets(buf, sizeof buf, p) != nullptr) out += buf;
  ::pclose(p);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) {
    out.pop_back();
  }
  return out.empty() ? "unknown" : out;
}

}  // namespace detail

class CsvWriter {
 public:
  explicit CsvWriter(std::string path) : path_(std::move(path)) {}

  void meta(const std::string& key, const std::string& value) {
    buf_ << "# " << key << " = " << value << "\n";
  }
  void meta_config(const Config& cfg) {
    std::istringstream is(serialize_config(cfg));
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty()) buf_ << "# config: " << line << "\n";
    }
  }
  void header(const std::vector<std::string>& cols) {
    columns_ = cols;
    write_row(cols);
  }
  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size()) {
      throw std::logic_error("CSV row width mismatch");
    }
    write_row(cells);
  }
  const std::vector<std::string>& columns() const { return columns_; }

  // Atomically writes the staged content.
  void commit() const {
    namespace fs = std::filesystem;
    const fs::path target(path_);
    if (target.has_parent_path()) {
      fs::create_directories(target.parent_path());
    }
    const fs::path tmp = target.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
      out << buf_.str();
      if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
  }

  const std::string& path() const { return path_; }

 private:
  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) buf_ << ',';
      buf_ << cells[i];
    }
    buf_ << "\n";
  }

  std::string path_;
  std::vector<std::string> columns_;
  std::ostringstream buf_;
};

namespace detail {

// Companion gnuplot script: references only the CSV it accompanies.
inline void write_plot_script(const std::string& csvPath,
                              const std::string& title,
                              const std::string& xlabel,
                              const std::vector<std::string>& cols,
                              const std::vector<int>& yCols, bool logX) {
  namespace fs = std::filesystem;
  const fs::path csv(csvPath);
  const fs::path script = csv.string() + ".gnuplot";
  const fs::path tmp = script.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << "# gnuplot script generated alongside " << csv.filename().string()
        << "\n";
    out << "set datafile separator ','\n";
    out << "set datafile commentschars '#'\n";
    out << "set key outside\n";
    out << "set title '" << title << "'\n";
    out << "set xlabel '" << xlabel << "'\n";
    out << "set ylabel 'probability'\n";
    if (logX) out << "set logscale x\n";
    out << "set grid\n";
    out << "plot ";
    bool first = true;
    for (int c : yCols) {
      if (!first) out << ", \\\n     ";
      first = false;
      out << "'" << csv.filename().string() << "' using 1:" << c
          << " skip 1 with linespoints title '"
          << cols[static_cast<std::size_t>(c - 1)] << "'";
    }
    out << "\n";
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, script);
}

inline std::string method_cell(Method m) { return method_name(m); }

inline void append_report_cells(std::vector<std::string>& cells,
                                const CoverageReport& rep, bool withCi) {
  const auto classCell = [&](UserClass k) {
    const auto it = rep.perClass.find(k);
    return it == rep.perClass.end() ? std::string{} : csv_num(it->second);
  };
  const auto classCi = [&](UserClass k) {
    const auto it = rep.perClassCi.find(k);
    return it == rep.perClassCi.end() ? std::string{} : csv_num(it->second);
  };
  cells.push_back(csv_num(rep.overall));
  cells.push_back(withCi && rep.ci.has_value() ? csv_num(*rep.ci)
                                               : std::string{});
  for (UserClass k :
       {UserClass::Macro, UserClass::PicoUnoffloaded, UserClass::OffloadNulled,
        UserClass::OffloadExposed, UserClass::Offloaded}) {
    cells.push_back(classCell(k));
    cells.push_back(withCi ? classCi(k) : std::string{});
  }
  cells.push_back(csv_num(rep.inProbability));
  cells.push_back(csv_num(rep.tailError));
}

inline CoverageReport report_from_mc_rate(const RateCoverageEstimate& e,
                                          Scheme scheme) {
  CoverageReport rep;
  rep.scheme = scheme;
  rep.method = Method::MonteCarlo;
  rep.overall = e.overall.value;
  rep.ci = e.overall.ci;
  rep.tailError = 0.0;
  rep.inProbability = std::numeric_limits<double>::quiet_NaN();
  for (const auto& [k, est] : e.perClass) {
    rep.perClass[k] = est.value;
    rep.perClassCi[k] = est.ci;
    rep.classWeight[k] =
        e.overall.n > 0
            ? static_cast<double>(est.n) / static_cast<double>(e.overall.n)
            : 0.0;
  }
  return rep;
}

inline CoverageReport report_from_mc_sir(const SirCoverageEstimate& e,
                                         Scheme scheme) {
  CoverageReport rep;
  rep.scheme = scheme;
  rep.method = Method::MonteCarlo;
  rep.overall = e.overall.value;
  rep.ci = e.overall.ci;
  rep.tailError = 0.0;
  rep.inProbability = std::numeric_limits<double>::quiet_NaN();
  for (const auto& [k, est] : e.perClass) {
    rep.perClass[k] = est.value;
    rep.perClassCi[k] = est.ci;
  }
  return rep;
}

inline const std::vector<std::string>& coverage_columns() {
  static const std::vector<std::string> cols = {
      "x",
      "method",
      "overall",
      "overall_ci",
      "macro",
      "macro_ci",
      "pico_unoffloaded",
      "pico_unoffloaded_ci",
      "offloaded_nulled",
      "offloaded_nulled_ci",
      "offloaded_exposed",
      "offloaded_exposed_ci",
      "offloaded",
      "offloaded_ci",
      "in_probability",
      "tail_error"};
  return cols;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiment runners. Each returns the path of the CSV it wrote.

inline std::string run_coverage_curve(const ExperimentSpec& spec) {
  spec.require_valid();
  const Config& cfg = spec.cfg;
  namespace fs = std::filesystem;
  CsvWriter csv((fs::path(spec.outDir) / (spec.name + ".csv")).string());
  csv.meta("experiment", spec.name);
  csv.meta("kind", "coverage-curve");
  csv.meta("axis", axis_name(spec.axis));
  csv.meta("seed", std::to_string(cfg.num.rngSeed));
  csv.meta("drops", std::to_string(cfg.num.mcDrops));
  csv.meta("git_revision", detail::git_revision());
  csv.meta_config(cfg);
  std::vector<std::string> cols = detail::coverage_columns();
  cols[0] = axis_name(spec.axis);
  cols.insert(cols.begin() + 1, "scheme");
  csv.header(cols);

  const bool wantsMc = std::count(spec.methods.begin(), spec.methods.end(),
                                  Method::MonteCarlo) > 0;

  // Axis-dependent evaluation. Models are cached per distinct system
  // parameter set (only the bias axis changes them).
  const auto analytic_report = [&](const Config& c, double x,
                                   Method m) -> CoverageReport {
    CoverageModel model = make_coverage_model(c.sys, c.num);
    SchemeParams sch = c.sch;
    switch (spec.axis) {
      case SweepAxis::Tau:
        sch.rateThresholdTau = x;
        return rate_coverage(model, sch, m);
      case SweepAxis::InDof:
        sch.scheme = Scheme::IN;
        sch.inDof = static_cast<int>(std::lround(x));
        return rate_coverage(model, sch, m);
      case SweepAxis::Eta:
        sch.scheme = Scheme::ABS;
        sch.absEta = x;
        return rate_coverage(model, sch, m);
      case SweepAxis::Bias:
        return rate_coverage(model, sch, m);
      case SweepAxis::Beta: {
        const double beta = std::pow(10.0, x / 10.0);
        const int u = sch.scheme == Scheme::IN ? sch.inDof : 0;
        return sir_report(model, beta, u);
      }
    }
    throw std::logic_error("unreachable");
  };

  // Monte Carlo sweeps share one set of drops across the whole grid where
  // possible (tau / beta axes); other axes re-simulate per point.
  std::map<double, CoverageReport> mcByX;
  if (wantsMc) {
    if (spec.axis == SweepAxis::Tau) {
      const auto ests = estimate_rate_coverage_grid(
          cfg.sys, cfg.sch, spec.grid, cfg.num.mcDrops, cfg.num.rngSeed,
          cfg.num);
      for (const auto& e : ests) {
        mcByX[e.tau] = detail::report_from_mc_rate(e, cfg.sch.scheme);
      }
    } else if (spec.axis == SweepAxis::Beta) {
      std::vector<double> betas;
      for (double x : spec.grid) betas.push_back(std::pow(10.0, x / 10.0));
      const int u = cfg.sch.scheme == Scheme::IN ? cfg.sch.inDof : 0;
      const auto ests = estimate_sir_coverage_grid(
          cfg.sys, u, betas, cfg.num.mcDrops, cfg.num.rngSeed, cfg.num);
      for (std::size_t i = 0; i < ests.size(); ++i) {
        mcByX[spec.grid[i]] =
            detail::report_from_mc_sir(ests[i], cfg.sch.scheme);
      }
    } else {
      for (double x : spec.grid) {
        Config c = cfg;
        SchemeParams sch = c.sch;
        if (spec.axis == SweepAxis::InDof) {
          sch.scheme = Scheme::IN;
          sch.inDof = static_cast<int>(std::lround(x));
        } else if (spec.axis == SweepAxis::Eta) {
          sch.scheme = Scheme::ABS;
          sch.absEta = x;
        } else if (spec.axis == SweepAxis::Bias) {
          c.sys.biasB = std::pow(10.0, x / 10.0);
        }
        const auto e = estimate_rate_coverage(c.sys, sch, c.num.mcDrops,
                                              c.num.rngSeed, c.num)
                           ;
        mcByX[x] = detail::report_from_mc_rate(e, sch.scheme);
      }
    }
  }

  for (double x : spec.grid) {
    for (Method m : spec.methods) {
      CoverageReport rep;
      Scheme schemeUsed = cfg.sch.scheme;
      if (spec.axis == SweepAxis::InDof) schemeUsed = Scheme::IN;
      if (spec.axis == SweepAxis::Eta) schemeUsed = Scheme::ABS;
      if (m == Method::MonteCarlo) {
        rep = mcByX.at(x);
      } else if (spec.axis == SweepAxis::Bias) {
        Config c = cfg;
        c.sys.biasB = std::pow(10.0, x / 10.0);
        rep = analytic_report(c, x, m);
      } else {
        rep = analytic_report(cfg, x, m);
      }
      std::vector<std::string> cells;
      cells.push_back(detail::csv_num(x));
      cells.push_back(scheme_name(schemeUsed));
      cells.push_back(detail::method_cell(m));
      detail::append_report_cells(cells, rep, m == Method::MonteCarlo);
      csv.row(cells);
    }
  }
  csv.commit();
  detail::write_plot_script(
      csv.path(), spec.name, axis_name(spec.axis), csv.columns(), {4},
      spec.axis == SweepAxis::Tau);
  return csv.path();
}

inline std::string run_pmf(const ExperimentSpec& spec) {
  spec.require_valid();
  const Config& cfg = spec.cfg;
  namespace fs = std::filesystem;
  const auto st = assoc_stats(cfg.sys, cfg.num);
  const auto active = pmf_active_offloaded(st, cfg.num);
  const auto nearest = pmf_active_offloaded_nearest(st, cfg.num);
  const auto dof = pmf_in_dof(st, cfg.sch.inDof, cfg.num);
  const auto loadPico =
      load_pmf(LoadClass::PicoTier, cfg.sys, st, cfg.num);
  const bool wantsMc = std::count(spec.methods.begin(), spec.methods.end(),
                                  Method::MonteCarlo) > 0;
  OffloadPmfEstimate mc;
  if (wantsMc) {
    mc = estimate_offload_pmfs(cfg.sys, cfg.sch.inDof, cfg.num.mcDrops,
                               cfg.num.rngSeed, cfg.num);
  }

  CsvWriter csv((fs::path(spec.outDir) / (spec.name + ".csv")).string());
  csv.meta("experiment", spec.name);
  csv.meta("kind", "pmf");
  csv.meta("seed", std::to_string(cfg.num.rngSeed));
  csv.meta("drops", std::to_string(cfg.num.mcDrops));
  csv.meta("git_revision", detail::git_revision());
  csv.meta("rho", detail::csv_num(st.rho));
  csv.meta("in_probability",
           detail::csv_num(in_probability(st, cfg.sch.inDof)));
  if (wantsMc) {
    csv.meta("mc_in_probability", detail::csv_num(mc.inProbability.value));
    csv.meta("mc_in_probability_ci", detail::csv_num(mc.inProbability.ci));
    csv.meta("mc_macro_conditioned", std::to_string(mc.macroConditioned));
    csv.meta("mc_offload_conditioned",
             std::to_string(mc.offloadConditioned));
    if (mc.insufficientMacro || mc.insufficientOffload) {
      csv.meta("mc_warning", "insufficient conditioning samples");
    }
  }
  csv.meta_config(cfg);
  csv.header({"n", "active_offloaded", "active_offloaded_nearest",
              "in_dof", "load_pico", "mc_active_offloaded",
              "mc_active_offloaded_ci", "mc_active_offloaded_nearest",
              "mc_active_offloaded_nearest_ci"});

  int maxN = std::max({active.maxSupport(), nearest.maxSupport(),
                       dof.maxSupport(), loadPico.maxSupport()});
  if (wantsMc) {
    maxN = std::max<int>(maxN,
                         static_cast<int>(mc.pmfActive.size()) - 1);
    maxN = std::max<int>(
        maxN, static_cast<int>(mc.pmfActiveNearest.size()) - 1);
  }
  for (int n = 0; n <= maxN; ++n) {
    std::vector<std::string> cells;
    cells.push_back(std::to_string(n));
    cells.push_back(detail::csv_num(active.prob(n)));
    cells.push_back(detail::csv_num(nearest.prob(n)));
    cells.push_back(detail::csv_num(dof.prob(n)));
    cells.push_back(detail::csv_num(loadPico.prob(n)));
    if (wantsMc && n < static_cast<int>(mc.pmfActive.size()) &&
        !mc.insufficientMacro) {
      cells.push_back(detail::csv_num(
          mc.pmfActive[static_cast<std::size_t>(n)].value));
      cells.push_back(
          detail::csv_num(mc.pmfActive[static_cast<std::size_t>(n)].ci));
    } else {
      cells.push_back("");
      cells.push_back("");
    }
    if (wantsMc && n < static_cast<int>(mc.pmfActiveNearest.size()) &&
        !mc.insufficientOffload) {
      cells.push_back(detail::csv_num(
          mc.pmfActiveNearest[static_cast<std::size_t>(n)].value));
      cells.push_back(detail::csv_num(
          mc.pmfActiveNearest[static_cast<std::size_t>(n)].ci));
    } else {
      cells.push_back("");
      cells.push_back("");
    }
    csv.row(cells);
  }
  csv.commit();
  detail::write_plot_script(csv.path(), spec.name, "n", csv.columns(),
                            {2, 3, 6, 8}, false);
  return csv.path();
}

inline std::string run_optimize_u(const ExperimentSpec& spec) {
  spec.require_valid();
  if (spec.axis != SweepAxis::Tau) {
    throw std::invalid_argument("optimize-u sweeps the tau axis");
  }
  const Config& cfg = spec.cfg;
  namespace fs = std::filesystem;
  CoverageModel model = make_coverage_model(cfg.sys, cfg.num);
  CsvWriter csv((fs::path(spec.outDir) / (spec.name + ".csv")).string());
  csv.meta("experiment", spec.name);
  csv.meta("kind", "optimize-u");
  csv.meta("git_revision", detail::git_revision());
  csv.meta_config(cfg);
  std::vector<std::string> cols = {"tau_bps", "u_star", "opt_value"};
  for (int u = 1; u <= cfg.sys.n1 - 1; ++u) {
    cols.push_back("net_u" + std::to_string(u));
  }
  csv.header(cols);
  for (double tau : spec.grid) {
    const auto opt = optimal_U(model, tau);
    std::vector<std::string> cells = {detail::csv_num(tau),
                                      detail::csv_num(opt.argOpt),
                                      detail::csv_num(opt.optValue)};
    for (int u = 1; u <= cfg.sys.n1 - 1; ++u) {
      cells.push_back(detail::csv_num(delta_rate(model, u, tau).net));
    }
    csv.row(cells);
  }
  csv.commit();
  detail::write_plot_script(csv.path(), spec.name, "tau_bps", csv.columns(),
                            {2}, true);
  return csv.path();
}

inline std::string run_optimize_eta(const ExperimentSpec& spec) {
  spec.require_valid();
  const Config& cfg = spec.cfg;
  namespace fs = std::filesystem;
  CoverageModel model = make_coverage_model(cfg.sys, cfg.num);
  CsvWriter csv((fs::path(spec.outDir) / (spec.name + ".csv")).string());
  csv.meta("experiment", spec.name);
  csv.meta("kind", "optimize-eta");
  csv.meta("git_revision", detail::git_revision());
  csv.meta_config(cfg);
  if (spec.axis == SweepAxis::Eta) {
    // Coverage-vs-eta curve at fixed tau, with the bisection optimum noted
    // in the metadata.
    const auto opt = optimal_eta(model, cfg.sch.rateThresholdTau);
    csv.meta("eta_star", detail::csv_num(opt.argOpt));
    csv.meta("eta_star_value", detail::csv_num(opt.optValue));
    if (opt.endpointBeatsInterior) {
      csv.meta("eta_star_warning", "endpoint beats interior optimum");
    }
    csv.header({"eta", "method", "overall", "macro", "pico_unoffloaded",
                "offloaded"});
    for (double eta : spec.grid) {
      SchemeParams sch = cfg.sch;
      sch.scheme = Scheme::ABS;
      sch.absEta = eta;
      for (Method m : spec.methods) {
        if (m == Method::MonteCarlo) continue;  // analytic sweep only
        const auto rep = rate_coverage(model, sch, m);
        csv.row({detail::csv_num(eta), detail::method_cell(m),
                 detail::csv_num(rep.overall),
                 detail::csv_num(rep.perClass.at(UserClass::Macro)),
                 detail::csv_num(
                     rep.perClass.at(UserClass::PicoUnoffloaded)),
                 detail::csv_num(rep.perClass.at(UserClass::Offloaded))});
      }
    }
  } else if (spec.axis == SweepAxis::Tau) {
    csv.header({"tau_bps", "eta_star", "opt_value"});
    for (double tau : spec.grid) {
      const auto opt = optimal_eta(model, tau);
      csv.row({detail::csv_num(tau), detail::csv_num(opt.argOpt),
               detail::csv_num(opt.optValue)});
    }
  } else {
    throw std::invalid_argument("optimize-eta sweeps the eta or tau axis");
  }
  csv.commit();
  detail::write_plot_script(csv.path(), spec.name, axis_name(spec.axis),
                            csv.columns(), {3},
                            spec.axis == SweepAxis::Tau);
  return csv.path();
}

// Bias sweep comparing the nulling scheme at U*, plain offloading, and
// resource partitioning at eta*; a companion file holds the per-class
// breakdown at each scheme's best bias.
inline std::string run_compare_schemes(const ExperimentSpec& spec) {
  spec.require_valid();
  if (spec.axis != SweepAxis::Bias) {
    throw std::invalid_argument("compare-schemes sweeps the bias axis");
  }
  const Config& cfg = spec.cfg;
  namespace fs = std::filesystem;
  const double tau = cfg.sch.rateThresholdTau;
  // Analytic method for sweep values: first non-MC requested method.
  Method m = Method::Mla;
  for (Method q : spec.methods) {
    if (q != Method::MonteCarlo) {
      m = q;
      break;
    }
  }

  struct Row {
    double biasDb = 0.0;
    int uStar = 0;
    double etaStar = 0.0;
    double inValue = 0.0, plainValue = 0.0, absValue = 0.0;
  };
  std::vector<Row> rows;
  for (double xDb : spec.grid) {
    Config c = cfg;
    c.sys.biasB = std::pow(10.0, xDb / 10.0);
    CoverageModel model = make_coverage_model(c.sys, c.num);
    Row r;
    r.biasDb = xDb;
    const auto optU = optimal_U(model, tau);
    r.uStar = static_cast<int>(std::lround(optU.argOpt));
    SchemeParams sch = c.sch;
    sch.rateThresholdTau = tau;
    sch.scheme = Scheme::IN;
    sch.inDof = r.uStar;
    r.inValue = rate_coverage(model, sch, m).overall;
    sch.scheme = Scheme::SimpleOffload;
    r.plainValue = rate_coverage(model, sch, m).overall;
    const auto optEta = optimal_eta(model, tau);
    r.etaStar = optEta.argOpt;
    sch.scheme = Scheme::ABS;
    sch.absEta = r.etaStar;
    r.absValue = rate_coverage(model, sch, m).overall;
    rows.push_back(r);
  }

  CsvWriter csv((fs::path(spec.outDir) / (spec.name + ".csv")).string());
  csv.meta("experiment", spec.name);
  csv.meta("kind", "compare-schemes");
  csv.meta("method", method_name(m));
  csv.meta("tau_bps", detail::csv_num(tau));
  csv.meta("git_revision", detail::git_revision());
  csv.meta_config(cfg);
  csv.header({"bias_db", "u_star", "eta_star", "in_at_u_star",
              "simple_offload", "abs_at_eta_star"});
  for (const auto& r : rows) {
    csv.row({detail::csv_num(r.biasDb), std::to_string(r.uStar),
             detail::csv_num(r.etaStar), detail::csv_num(r.inValue),
             detail::csv_num(r.plainValue), detail::csv_num(r.absValue)});
  }
  csv.commit();
  detail::write_plot_script(csv.path(), spec.name, "bias_db", csv.columns(),
                            {4, 5, 6}, false);

  // Per-class breakdown at each scheme's best bias.
  const auto best = [&](auto proj) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (proj(rows[i]) > proj(rows[arg])) arg = i;
    }
    return arg;
  };
  const std::size_t bIn = best([](const Row& r) { return r.inValue; });
  const std::size_t bPlain = best([](const Row& r) { return r.plainValue; });
  const std::size_t bAbs = best([](const Row& r) { return r.absValue; });

  CsvWriter brk(
      (fs::path(spec.outDir) / (spec.name + "_breakdown.csv")).string());
  brk.meta("experiment", spec.name);
  brk.meta("kind", "compare-schemes-breakdown");
  brk.meta("method", method_name(m));
  brk.meta("tau_bps", detail::csv_num(tau));
  brk.meta("git_revision", detail::git_revision());
  brk.meta_config(cfg);
  brk.header({"scheme", "bias_db_star", "design_parameter", "class",
              "class_weight", "rate_coverage"});
  const auto emit = [&](Scheme scheme, const Row& r) {
    Config c = cfg;
    c.sys.biasB = std::pow(10.0, r.biasDb / 10.0);
    CoverageModel model = make_coverage_model(c.sys, c.num);
    SchemeParams sch = c.sch;
    sch.rateThresholdTau = tau;
    sch.scheme = scheme;
    sch.inDof = scheme == Scheme::IN ? r.uStar : 0;
    if (scheme == Scheme::ABS) sch.absEta = r.etaStar;
    const auto rep = rate_coverage(model, sch, m);
    const double design = scheme == Scheme::IN
                              ? static_cast<double>(r.uStar)
                              : (scheme == Scheme::ABS ? r.etaStar : 0.0);
    for (const auto& [k, v] : rep.perClass) {
      const auto w = rep.classWeight.find(k);
      brk.row({scheme_name(scheme), detail::csv_num(r.biasDb),
               detail::csv_num(design), user_class_name(k),
               w == rep.classWeight.end() ? "" : detail::csv_num(w->second),
               detail::csv_num(v)});
    }
  };
  emit(Scheme::IN, rows[bIn]);
  emit(Scheme::SimpleOffload, rows[bPlain]);
  emit(Scheme::ABS, rows[bAbs]);
  brk.commit();
  return csv.path();
}

// ---------------------------------------------------------------------------
// Validation harness: analytic engines against their Monte Carlo oracles.

struct ValidationCheck {
  std::string name;
  double threshold = 0.0;
  double measured = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_pass() const {
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return true;
  }
};

inline nlohmann::json to_json(const ValidationReport& r) {
  nlohmann::json j;
  j["all_pass"] = r.all_pass();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : r.checks) {
    j["checks"].push_back({{"name", c.name},
                           {"threshold", c.threshold},
                           {"measured", c.measured},
                           {"pass", c.pass}});
  }
  return j;
}

inline ValidationReport validation_report_from_json(const nlohmann::json& j) {
  ValidationReport r;
  for (const auto& c : j.at("checks")) {
    ValidationCheck v;
    v.name = c.at("name").get<std::string>();
    v.threshold = c.at("threshold").get<double>();
    v.measured = c.at("measured").get<double>();
    v.pass = c.at("pass").get<bool>();
    r.checks.push_back(std::move(v));
  }
  return r;
}

// Runs the agreement checks. mcSys, when given, drives the simulation with
// different parameters than the analytic side (mismatch-detector hook).
inline ValidationReport run_validate(const ExperimentSpec& spec,
                                     const SystemParams* mcSys = nullptr) {
  spec.require_valid();
  const Config& cfg = spec.cfg;
  const SystemParams& sim = mcSys != nullptr ? *mcSys : cfg.sys;
  const long long drops = cfg.num.mcDrops;
  const std::uint64_t seed = cfg.num.rngSeed;
  ValidationReport rep;

  // 1. Offloaded-count pmf sup-norms.
  {
    const auto st = assoc_stats(cfg.sys, cfg.num);
    const auto active = pmf_active_offloaded(st, cfg.num);
    const auto nearest = pmf_active_offloaded_nearest(st, cfg.num);
    const auto mc =
        estimate_offload_pmfs(sim, cfg.sch.inDof, drops, seed, cfg.num);
    double supA = 0.0, supN = 0.0;
    if (!mc.insufficientMacro) {
      const int top = std::max(active.maxSupport(),
                               static_cast<int>(mc.pmfActive.size()) - 1);
      for (int n = 0; n <= top; ++n) {
        const double sample =
            n < static_cast<int>(mc.pmfActive.size())
                ? mc.pmfActive[static_cast<std::size_t>(n)].value
                : 0.0;
        supA = std::max(supA, std::abs(sample - active.prob(n)));
      }
    }
    if (!mc.insufficientOffload) {
      const int top =
          std::max(nearest.maxSupport(),
                   static_cast<int>(mc.pmfActiveNearest.size()) - 1);
      for (int n = 0; n <= top; ++n) {
        const double sample =
            n < static_cast<int>(mc.pmfActiveNearest.size())
                ? mc.pmfActiveNearest[static_cast<std::size_t>(n)].value
                : 0.0;
        supN = std::max(supN, std::abs(sample - nearest.prob(n)));
      }
    }
    // The count tables thin picos by the population offloaded share while a
    // real pico schedules uniformly among its own users; the resulting
    // Jensen gap (strongest at light pico loads) costs the tables up to
    // ~0.095 in sup norm and the selection probability up to ~0.075 across
    // operating regimes. The thresholds sit just above that intrinsic model
    // error and still catch a wrong reference perspective (plain vs
    // size-biased counting shifts the mass by ~0.15+) or a broken sampler.
    rep.checks.push_back(
        {"pmf_sup_norm_active_offloaded", 0.12, supA, supA <= 0.12});
    rep.checks.push_back(
        {"pmf_sup_norm_active_nearest", 0.12, supN, supN <= 0.12});
    const double pin = in_probability(st, cfg.sch.inDof);
    const double dev = std::abs(pin - mc.inProbability.value);
    const double thr = std::max(0.10, 3.0 * mc.inProbability.ci);
    rep.checks.push_back({"in_probability_deviation", thr, dev, dev <= thr});
  }

  // 2. Rate coverage sup-deviation over the grid.
  {
    CoverageModel model = make_coverage_model(cfg.sys, cfg.num);
    const auto ests = estimate_rate_coverage_grid(sim, cfg.sch, spec.grid,
                                                  drops, seed, cfg.num);
    double sup = 0.0, thr = 0.02;
    for (std::size_t i = 0; i < spec.grid.size(); ++i) {
      SchemeParams sch = cfg.sch;
      sch.rateThresholdTau = spec.grid[i];
      const auto full = rate_coverage(model, sch, Method::Full);
      const double dev = std::abs(full.overall - ests[i].overall.value);
      sup = std::max(sup, dev);
      thr = std::max(thr, ests[i].overall.ci);
    }
    rep.checks.push_back(
        {"rate_coverage_sup_deviation", thr, sup, sup <= thr});
  }

  // 3. Interference-functional deviations, tier 1 of the analytic config
  // at a mid-range exclusion radius.
  {
    const double r = 0.5 / std::sqrt(M_PI * cfg.sys.lambda1);
    const double s = 0.5 * std::pow(r, cfg.sys.alpha1);
    LaplaceField f;
    f.lambda = cfg.sys.lambda1;
    f.alpha = cfg.sys.alpha1;
    f.r = r;
    f.s = s;
    const auto mc = estimate_interference_functional(
        sim, 1, s, r, std::min<long long>(drops, 20000), seed, cfg.num);
    const auto d = scaled_laplace_derivs(f, 3);
    double worst = 0.0;
    bool pass = true;
    for (int m = 0; m <= 3; ++m) {
      const double analytic =
          m == 0 ? std::exp(d.logL)
                 : laplace_derivative_scaled(m, f) /
                       std::pow(s, m);  // E[I^m e^{-sI}]
      const double dev =
          std::abs(analytic - mc.moment[static_cast<std::size_t>(m)]);
      const double sigma3 =
          3.0 * mc.momentCi[static_cast<std::size_t>(m)] / 1.96;
      const double rel = sigma3 > 0.0 ? dev / sigma3 : 0.0;
      worst = std::max(worst, rel);
      pass = pass && dev <= std::max(sigma3, 1e-12);
    }
    rep.checks.push_back(
        {"laplace_functional_3sigma_ratio", 1.0, worst, pass});
  }
  return rep;
}

inline std::string write_validation_report(const ValidationReport& rep,
                                           const ExperimentSpec& spec) {
  namespace fs = std::filesystem;
  const fs::path target = fs::path(spec.outDir) / (spec.name + ".json");
  if (target.has_parent_path()) {
    fs::create_directories(target.parent_path());
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << to_json(rep).dump(2) << "\n";
  }
  fs::rename(tmp, target);
  return target.string();
}

}  // namespace hetin
