#pragma once
// Model parameters shared by every other module: physical/network constants,
// scheme selection (interference nulling / plain offloading / almost-blank
// subframes), and numerics knobs. Values are validated once and treated as
// immutable afterwards.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace hetin {

enum class Scheme { IN, SimpleOffload, ABS };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::IN: return "in";
    case Scheme::SimpleOffload: return "simple_offload";
    case Scheme::ABS: return "abs";
  }
  return "?";
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

struct SystemParams {
  double lambda1 = 1e-4;   // macro-BS density (nodes/m^2)
  double lambda2 = 5e-4;   // pico-BS density (nodes/m^2)
  double lambdaU = 0.01;   // user density (nodes/m^2)
  double p1 = 10.0;        // macro transmit power (linear; only p1/p2 matters)
  double p2 = 1.0;         // pico transmit power (linear)
  double alpha1 = 4.0;     // macro path-loss exponent (>2)
  double alpha2 = 4.0;     // pico path-loss exponent (>2)
  int n1 = 8;              // macro antennas
  int n2 = 4;              // pico antennas
  double biasB = 1.0;      // pico association bias (linear, >=1)
  double bandwidthW = 1e7; // resource (Hz)
};

struct SchemeParams {
  Scheme scheme = Scheme::IN;
  int inDof = 0;                 // U in [0, n1-1]; IN only
  double absEta = 0.5;           // eta in (0,1); ABS only
  double rateThresholdTau = 0.0; // bits/s, >= 0
};

struct NumericsParams {
  double quadRelTol = 1e-6;    // relative quadrature tolerance, (0, 1e-3]
  double pmfTailEps = 1e-8;    // pmf truncation tail bound, (0, 1e-4]
  int loadSumMax = 512;        // hard cap on load-sum support
  long long mcDrops = 10000;   // Monte Carlo drops
  double mcWindowRadius = 0.0; // meters; <=0 means "derive from densities"
  std::uint64_t rngSeed = 20260816ull;
};

// Default simulation window: 6 / sqrt(pi * min BS density). Far-field
// interference beyond this radius is negligible for alpha > 2 (checked
// empirically by the window-doubling test).
inline double default_window_radius(const SystemParams& sys) {
  const double lmin = sys.lambda1 < sys.lambda2 ? sys.lambda1 : sys.lambda2;
  return 6.0 / std::sqrt(M_PI * lmin);
}

inline double resolved_window_radius(const SystemParams& sys,
                                     const NumericsParams& num) {
  return num.mcWindowRadius > 0.0 ? num.mcWindowRadius
                                  : default_window_radius(sys);
}

struct ValidationResult {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

inline ValidationResult validate(const SystemParams& sys,
                                 const SchemeParams& sch,
                                 const NumericsParams& num) {
  ValidationResult r;
  auto bad = [&r](const std::string& msg) { r.violations.push_back(msg); };
  if (!(sys.lambda1 > 0.0)) bad("lambda1: density must be > 0");
  if (!(sys.lambda2 > 0.0)) bad("lambda2: density must be > 0");
  if (!(sys.lambdaU > 0.0)) bad("lambda_u: density must be > 0");
  if (!(sys.p1 > 0.0)) bad("p1: transmit power must be > 0");
  if (!(sys.p2 > 0.0)) bad("p2: transmit power must be > 0");
  if (!(sys.alpha1 > 2.0))
    bad("alpha1: the model requires path-loss exponents alpha_j > 2");
  if (!(sys.alpha2 > 2.0))
    bad("alpha2: the model requires path-loss exponents alpha_j > 2");
  if (sys.n1 < 1) bad("n1: antenna count must be >= 1");
  if (sys.n2 < 1) bad("n2: antenna count must be >= 1");
  if (!(sys.biasB >= 1.0)) bad("bias_db: bias factor must be >= 1 (>= 0 dB)");
  if (!(sys.bandwidthW > 0.0)) bad("bandwidth_hz: must be > 0");
  if (sch.inDof < 0 || sch.inDof > sys.n1 - 1)
    bad("in_dof: nulling degrees of freedom U must satisfy 0 <= U <= n1-1");
  if (!(sch.absEta > 0.0) || !(sch.absEta < 1.0))
    bad("abs_eta: eta must lie in the open interval (0,1)");
  if (!(sch.rateThresholdTau >= 0.0)) bad("tau_bps: must be >= 0");
  if (!(num.quadRelTol > 0.0) || num.quadRelTol > 1e-3)
    bad("numerics.quad_rel_tol: must lie in (0, 1e-3]");
  if (!(num.pmfTailEps > 0.0) || num.pmfTailEps > 1e-4)
    bad("numerics.pmf_tail_eps: must lie in (0, 1e-4]");
  if (num.loadSumMax < 1) bad("numerics.load_sum_max: must be >= 1");
  if (num.mcDrops < 1) bad("numerics.mc_drops: must be >= 1");
  if (!(num.mcWindowRadius > 0.0))
    bad("numerics.mc_window_radius: must be > 0 (0 in a config file means "
        "'derive from densities' and is resolved at load time)");
  return r;
}

// Association and SIR depend on transmit powers only through P1/P2, so any
// parameter set can be rescaled to p2 = 1 without changing downstream output.
inline SystemParams normalize_power_ratio(const SystemParams& sys) {
  SystemParams out = sys;
  out.p1 = sys.p1 / sys.p2;
  out.p2 = 1.0;
  return out;
}

}  // namespace hetin
