#pragma once
// Design-parameter optimization on top of the analytic coverage model:
// the gain/penalty decomposition of one extra nulling degree of freedom,
// exhaustive search for U*, bisection for the resource-partitioning share
// eta*, a bias sweep with per-point inner optimization, and log-log slope
// fits for the small-tau order diagnostics.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hetin/coverage.hpp"

namespace hetin {

// Decomposition of the mean-load rate-coverage change when the nulling
// budget grows from U-1 to U.
struct DeltaReport {
  int U = 0;
  double gain = 0.0;     // offloaded users promoted from exposed to nulled
  double penalty = 0.0;  // macro users losing one signal dimension
  double net = 0.0;      // gain - penalty
};

inline DeltaReport delta_rate(const CoverageModel& m, int U, double tau) {
  if (U < 1 || U > m.sys.n1 - 1) {
    throw std::domain_error("delta_rate: U must lie in [1, n1-1]");
  }
  DeltaReport d;
  d.U = U;
  const double touw = tau / m.sys.bandwidthW;
  const double betaMacro = rate_to_sir_threshold(
      mean_load(LoadClass::MacroTier, m.sys, m.st) * touw);
  const double betaPico = rate_to_sir_threshold(
      mean_load(LoadClass::PicoTier, m.sys, m.st) * touw);
  // Macro side: the signal shape drops from n1-(U-1) to n1-U exactly when
  // the serving macro has at least U active offloaded users, and the lost
  // coverage is the single order-(n1-U) term.
  double prGe = 1.0;
  for (int u = 0; u < U; ++u) prGe -= m.activeOffloadedPmf.prob(u);
  prGe = std::max(0.0, prGe);
  d.penalty = m.st.a1 * prGe *
              model_macro_term_integral(m, m.sys.n1 - U, betaMacro);
  // Offloaded side: the newly nulled fraction times the coverage gap.
  const double dpe = m.hasOffload ? in_probability(m.st, U) -
                                        in_probability(m.st, U - 1)
                                  : 0.0;
  d.gain = m.st.a2o * dpe * model_sir_gap_offload(m, betaPico);
  d.net = d.gain - d.penalty;
  return d;
}

struct OptimumResult {
  double argOpt = 0.0;
  double optValue = 0.0;
  std::vector<std::pair<double, double>> trace;  // (parameter, coverage)
  bool endpointBeatsInterior = false;  // eta search only: unimodality flag
};

namespace detail {

// Argmax over (argument, value) pairs, ties broken toward the smaller
// argument; assumes pairs is nonempty.
inline std::pair<double, double> arg_max_smallest(
    const std::vector<std::pair<double, double>>& pairs) {
  std::pair<double, double> best = pairs.front();
  for (const auto& p : pairs) {
    if (p.second > best.second ||
        (p.second == best.second && p.first < best.first)) {
      best = p;
    }
  }
  return best;
}

}  // namespace detail

// Exhaustive U sweep of mean-load-approximation rate coverage.
inline OptimumResult optimal_U(const CoverageModel& m, double tau) {
  if (!(tau > 0.0)) throw std::domain_error("optimal_U: tau must be > 0");
  OptimumResult r;
  SchemeParams sch;
  sch.scheme = Scheme::IN;
  sch.rateThresholdTau = tau;
  for (int U = 0; U <= m.sys.n1 - 1; ++U) {
    sch.inDof = U;
    r.trace.emplace_back(static_cast<double>(U),
                         rate_coverage(m, sch, Method::Mla).overall);
  }
  const auto best = detail::arg_max_smallest(r.trace);
  r.argOpt = best.first;
  r.optValue = best.second;
  return r;
}

// Bisection on the derivative sign of the mean-load ABS coverage over
// eta in (eps, 1-eps), eps = 1e-3, with exactly `iterations` refinement
// steps (default n1). Unimodality is assumed, not verified: two endpoint
// probes are appended to the trace and merely set endpointBeatsInterior
// (and win the argmax) when strictly better than every interior
// evaluation. Within the interior candidates, ties go to the smaller eta;
// on a flat objective the symmetric shrink keeps the search centered, so
// the reported argOpt stays at the midpoint.
inline OptimumResult optimal_eta(const CoverageModel& m, double tau,
                                 int iterations = -1) {
  if (!(tau > 0.0)) throw std::domain_error("optimal_eta: tau must be > 0");
  if (iterations <= 0) iterations = m.sys.n1;
  constexpr double kEps = 1e-3;
  SchemeParams sch;
  sch.scheme = Scheme::ABS;
  sch.rateThresholdTau = tau;
  OptimumResult r;
  std::vector<std::pair<double, double>> interior;
  const auto eval = [&](double eta, bool isInterior) {
    sch.absEta = eta;
    const double v = rate_coverage(m, sch, Method::Mla).overall;
    r.trace.emplace_back(eta, v);
    if (isInterior) interior.emplace_back(eta, v);
    return v;
  };
  double lo = kEps, hi = 1.0 - kEps;
  for (int it = 0; it < iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double h = 1e-4 * (hi - lo);
    const double gUp = eval(mid + h, true);
    const double gDn = eval(mid - h, true);
    if (std::abs(gUp - gDn) <= 1e-12 * std::max(1.0, std::abs(gUp))) {
      lo = 0.5 * (lo + mid);  // flat: shrink symmetrically around mid
      hi = 0.5 * (mid + hi);
    } else if (gUp > gDn) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  eval(0.5 * (lo + hi), true);
  const auto bestInterior = detail::arg_max_smallest(interior);
  const double atLo = eval(kEps, false);
  const double atHi = eval(1.0 - kEps, false);
  r.argOpt = bestInterior.first;
  r.optValue = bestInterior.second;
  if (std::max(atLo, atHi) > bestInterior.second) {
    r.endpointBeatsInterior = true;
    if (atLo >= atHi) {
      r.argOpt = kEps;
      r.optValue = atLo;
    } else {
      r.argOpt = 1.0 - kEps;
      r.optValue = atHi;
    }
  }
  return r;
}

// Bias sweep with per-point inner optimization; innerArg[i] holds U* (IN)
// or eta* (ABS) at trace[i] (0 for the plain-offloading scheme).
struct BiasSweep {
  OptimumResult opt;
  std::vector<double> innerArg;
};

inline BiasSweep optimal_bias_detail(Scheme scheme, double tau,
                                     const SystemParams& sysIn,
                                     const NumericsParams& num,
                                     const std::vector<double>& biasGrid) {
  if (biasGrid.empty()) {
    throw std::domain_error("optimal_bias: empty bias grid");
  }
  BiasSweep sweep;
  for (double b : biasGrid) {
    if (!(b >= 1.0)) {
      throw std::domain_error("optimal_bias: bias values must be >= 1");
    }
    SystemParams sys = sysIn;
    sys.biasB = b;
    const CoverageModel m = make_coverage_model(sys, num);
    double value = 0.0, inner = 0.0;
    switch (scheme) {
      case Scheme::IN: {
        const OptimumResult u = optimal_U(m, tau);
        value = u.optValue;
        inner = u.argOpt;
        break;
      }
      case Scheme::SimpleOffload: {
        SchemeParams sch;
        sch.scheme = Scheme::SimpleOffload;
        sch.rateThresholdTau = tau;
        value = rate_coverage(m, sch, Method::Mla).overall;
        break;
      }
      case Scheme::ABS: {
        const OptimumResult e = optimal_eta(m, tau);
        value = e.optValue;
        inner = e.argOpt;
        break;
      }
    }
    sweep.opt.trace.emplace_back(b, value);
    sweep.innerArg.push_back(inner);
  }
  const auto best = detail::arg_max_smallest(sweep.opt.trace);
  sweep.opt.argOpt = best.first;
  sweep.opt.optValue = best.second;
  return sweep;
}

inline OptimumResult optimal_bias(Scheme scheme, double tau,
                                  const SystemParams& sys,
                                  const NumericsParams& num,
                                  const std::vector<double>& biasGrid) {
  return optimal_bias_detail(scheme, tau, sys, num, biasGrid).opt;
}

// ---------------------------------------------------------------------------
// Small-tau order diagnostics.

inline double fit_loglog_slope(const std::vector<double>& xs,
                               const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw std::domain_error("fit_loglog_slope: need >= 2 matched points");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) {
      throw std::domain_error("fit_loglog_slope: values must be positive");
    }
    const double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (!(std::abs(denom) > 0.0)) {
    throw std::domain_error("fit_loglog_slope: degenerate abscissa grid");
  }
  return (n * sxy - sx * sy) / denom;
}

enum class DeltaQuantity { Penalty, Gain };

// Least-squares slope of log(quantity) against log(tau): the macro penalty
// decays like tau^{n1-U} and the offloaded gain like tau^{n2} as tau -> 0.
inline double asymptotic_slope(DeltaQuantity q, const CoverageModel& m, int U,
                               const std::vector<double>& tauGrid) {
  if (tauGrid.size() < 2) {
    throw std::domain_error("asymptotic_slope: need >= 2 grid points");
  }
  std::vector<double> ys;
  ys.reserve(tauGrid.size());
  for (double tau : tauGrid) {
    const DeltaReport d = delta_rate(m, U, tau);
    const double v = q == DeltaQuantity::Penalty ? d.penalty : d.gain;
    if (!(v > 1e-300)) {
      throw std::runtime_error(
          "asymptotic_slope: quantity underflowed below 1e-300 at tau = " +
          std::to_string(tau));
    }
    ys.push_back(v);
  }
  return fit_loglog_slope(tauGrid, ys);
}

}  // namespace hetin
