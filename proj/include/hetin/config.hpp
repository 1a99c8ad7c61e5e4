#pragma once
// Canonical config file format: one `key = value` per line, `#` comments.
// Powers and bias are written in dB and converted to linear on load; the
// serializer emits keys in a fixed order with shortest round-trip number
// formatting, so serialize -> parse -> serialize is byte-identical.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetin/params.hpp"

namespace hetin {

struct Config {
  SystemParams sys;
  SchemeParams sch;
  NumericsParams num;
  // The file stores powers/bias in dB; keep those values as-written so the
  // serializer can reproduce them exactly (dB -> linear -> dB is not an
  // identity in floating point). sys.p1/p2/biasB are the linear equivalents.
  double p1Db = 10.0;
  double biasDb = 0.0;
};

// Build a Config around an existing parameter set (dB shadows derived once).
inline Config make_config(const SystemParams& sys, const SchemeParams& sch,
                          const NumericsParams& num) {
  Config cfg;
  cfg.sys = sys;
  cfg.sch = sch;
  cfg.num = num;
  cfg.p1Db = linear_to_db(sys.p1 / sys.p2);
  cfg.biasDb = linear_to_db(sys.biasB);
  if (cfg.num.mcWindowRadius <= 0.0) {
    cfg.num.mcWindowRadius = default_window_radius(sys);
  }
  return cfg;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing junk");
    return d;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad numeric value for '" + key +
                             "': " + v);
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing junk");
    return d;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad integer value for '" + key +
                             "': " + v);
  }
}

}  // namespace detail

inline void config_set(Config& cfg, const std::string& key,
                       const std::string& rawValue) {
  using detail::parse_double;
  using detail::parse_int;
  const std::string value = detail::trim(rawValue);
  if (key == "lambda1") cfg.sys.lambda1 = parse_double(key, value);
  else if (key == "lambda2") cfg.sys.lambda2 = parse_double(key, value);
  else if (key == "lambda_u") cfg.sys.lambdaU = parse_double(key, value);
  else if (key == "p1_db_over_p2") {
    cfg.p1Db = parse_double(key, value);
    cfg.sys.p1 = db_to_linear(cfg.p1Db);
    cfg.sys.p2 = 1.0;
  } else if (key == "alpha1") cfg.sys.alpha1 = parse_double(key, value);
  else if (key == "alpha2") cfg.sys.alpha2 = parse_double(key, value);
  else if (key == "n1") cfg.sys.n1 = static_cast<int>(parse_int(key, value));
  else if (key == "n2") cfg.sys.n2 = static_cast<int>(parse_int(key, value));
  else if (key == "bias_db") {
    cfg.biasDb = parse_double(key, value);
    cfg.sys.biasB = db_to_linear(cfg.biasDb);
  }
  else if (key == "bandwidth_hz") cfg.sys.bandwidthW = parse_double(key, value);
  else if (key == "scheme") {
    if (value == "in") cfg.sch.scheme = Scheme::IN;
    else if (value == "simple_offload") cfg.sch.scheme = Scheme::SimpleOffload;
    else if (value == "abs") cfg.sch.scheme = Scheme::ABS;
    else throw std::runtime_error("config: unknown scheme '" + value + "'");
  } else if (key == "in_dof") cfg.sch.inDof = static_cast<int>(parse_int(key, value));
  else if (key == "abs_eta") cfg.sch.absEta = parse_double(key, value);
  else if (key == "tau_bps") cfg.sch.rateThresholdTau = parse_double(key, value);
  else if (key == "numerics.quad_rel_tol") cfg.num.quadRelTol = parse_double(key, value);
  else if (key == "numerics.pmf_tail_eps") cfg.num.pmfTailEps = parse_double(key, value);
  else if (key == "numerics.load_sum_max") cfg.num.loadSumMax = static_cast<int>(parse_int(key, value));
  else if (key == "numerics.mc_drops") cfg.num.mcDrops = parse_int(key, value);
  else if (key == "numerics.mc_window_radius") cfg.num.mcWindowRadius = parse_double(key, value);
  else if (key == "numerics.rng_seed") cfg.num.rngSeed = static_cast<std::uint64_t>(parse_int(key, value));
  else throw std::runtime_error("config: unknown key '" + key + "'");
}

// Apply a single `key=value` override (the CLI --set flag).
inline void apply_override(Config& cfg, const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::runtime_error("override must look like key=value, got '" +
                             assignment + "'");
  }
  config_set(cfg, detail::trim(assignment.substr(0, eq)),
             detail::trim(assignment.substr(eq + 1)));
}

inline Config parse_config(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: line " + std::to_string(lineNo) +
                               " is not of the form key = value");
    }
    config_set(cfg, detail::trim(line.substr(0, eq)),
               detail::trim(line.substr(eq + 1)));
  }
  // Resolve the derived default so the parsed object always validates.
  if (cfg.num.mcWindowRadius <= 0.0) {
    cfg.num.mcWindowRadius = default_window_radius(cfg.sys);
  }
  return cfg;
}

inline std::string serialize_config(const Config& cfg) {
  using detail::format_double;
  std::string mcw = cfg.num.mcWindowRadius > 0.0
                        ? format_double(cfg.num.mcWindowRadius)
                        : format_double(default_window_radius(cfg.sys));
  std::string out;
  out += "lambda1 = " + format_double(cfg.sys.lambda1) + "\n";
  out += "lambda2 = " + format_double(cfg.sys.lambda2) + "\n";
  out += "lambda_u = " + format_double(cfg.sys.lambdaU) + "\n";
  out += "p1_db_over_p2 = " + format_double(cfg.p1Db) + "\n";
  out += "alpha1 = " + format_double(cfg.sys.alpha1) + "\n";
  out += "alpha2 = " + format_double(cfg.sys.alpha2) + "\n";
  out += "n1 = " + std::to_string(cfg.sys.n1) + "\n";
  out += "n2 = " + std::to_string(cfg.sys.n2) + "\n";
  out += "bias_db = " + format_double(cfg.biasDb) + "\n";
  out += "bandwidth_hz = " + format_double(cfg.sys.bandwidthW) + "\n";
  out += "scheme = " + std::string(scheme_name(cfg.sch.scheme)) + "\n";
  out += "in_dof = " + std::to_string(cfg.sch.inDof) + "\n";
  out += "abs_eta = " + format_double(cfg.sch.absEta) + "\n";
  out += "tau_bps = " + format_double(cfg.sch.rateThresholdTau) + "\n";
  out += "numerics.quad_rel_tol = " + format_double(cfg.num.quadRelTol) + "\n";
  out += "numerics.pmf_tail_eps = " + format_double(cfg.num.pmfTailEps) + "\n";
  out += "numerics.load_sum_max = " + std::to_string(cfg.num.loadSumMax) + "\n";
  out += "numerics.mc_drops = " + std::to_string(cfg.num.mcDrops) + "\n";
  out += "numerics.mc_window_radius = " + mcw + "\n";
  out += "numerics.rng_seed = " + std::to_string(cfg.num.rngSeed) + "\n";
  return out;
}

inline Config load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline void save_config_file(const Config& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << serialize_config(cfg);
}

}  // namespace hetin
