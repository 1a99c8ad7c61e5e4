#pragma once
// SIR and rate coverage of the typical user, per class and overall, for the
// interference-nulling scheme, plain offloading (U = 0), and the
// resource-partitioning baseline.
//
// Conditional coverage given the serving geometry is a finite sum of
// nonnegative terms built from scaled Laplace-transform derivatives of the
// two interference tiers,
//
//   S = sum_{n=0}^{M-1} T(n),   T(n) = sum_{q1+q2=n} A1_{q1} A2_{q2},
//   A_j[q] = Ltilde_j^(q)(s_j, r_j) / q!,
//
// with a third geometric factor in the exposed-offloaded class where the
// nearest macro is not nulled. Unconditional coverage integrates these over
// the serving-distance densities; rate coverage averages over the load
// p.m.f. (full method) or plugs in the mean load (mean-load approximation).

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetin/association.hpp"
#include "hetin/laplace.hpp"
#include "hetin/params.hpp"
#include "hetin/quadrature.hpp"

namespace hetin {

enum class UserClass {
  Macro = 0,
  PicoUnoffloaded = 1,
  OffloadNulled = 2,
  OffloadExposed = 3,
  Offloaded = 4,  // aggregate of the two offloaded subclasses
};

inline const char* user_class_name(UserClass k) {
  switch (k) {
    case UserClass::Macro: return "macro";
    case UserClass::PicoUnoffloaded: return "pico_unoffloaded";
    case UserClass::OffloadNulled: return "offloaded_nulled";
    case UserClass::OffloadExposed: return "offloaded_exposed";
    case UserClass::Offloaded: return "offloaded";
  }
  return "unknown";
}

// Spectral-efficiency threshold f(x) = 2^x - 1, saturating so absurd
// load*threshold products cannot reach inf*0 downstream.
inline double rate_to_sir_threshold(double x) {
  if (x >= 1020.0) return std::numeric_limits<double>::infinity();
  return std::exp2(x) - 1.0;
}

// ---------------------------------------------------------------------------
// Conditional (distance-pinned) coverage.

// SIR geometry of one user class given its serving distances: per-tier
// interferer exclusion radii, the Gamma shape of the signal power, and (for
// the exposed offloaded class) the non-nulled nearest macro's distance.
struct ClassGeometry {
  UserClass k = UserClass::Macro;
  int servingTier = 1;
  double yServing = 0.0;
  double r1 = 0.0;         // tier-1 exclusion radius
  double r2 = 0.0;         // tier-2 exclusion radius
  int signalShape = 1;
  double y1Dominant = 0.0; // exposed class only
};

inline ClassGeometry class_geometry(UserClass k, const SystemParams& sys,
                                    double y1, double y2, int inDofCond = 0) {
  const double pr = sys.p1 / sys.p2;
  ClassGeometry g;
  g.k = k;
  switch (k) {
    case UserClass::Macro:
      if (!(y1 > 0.0)) {
        throw std::domain_error("class_geometry: macro class needs y1 > 0");
      }
      if (inDofCond < 0 || inDofCond > sys.n1 - 1) {
        throw std::domain_error(
            "class_geometry: conditioned nulling DoF out of range");
      }
      g.servingTier = 1;
      g.yServing = y1;
      g.r1 = y1;
      // Closest possible pico interferer: the pico tier lost the biased
      // association contest, so P2*B*z^-a2 < P1*y1^-a1 for every pico.
      g.r2 = std::pow(sys.biasB / pr, 1.0 / sys.alpha2) *
             std::pow(y1, sys.alpha1 / sys.alpha2);
      g.signalShape = sys.n1 - inDofCond;
      break;
    case UserClass::PicoUnoffloaded:
      if (!(y2 > 0.0)) {
        throw std::domain_error("class_geometry: pico class needs y2 > 0");
      }
      g.servingTier = 2;
      g.yServing = y2;
      // The serving pico beats every macro even unbiased.
      g.r1 = std::pow(pr, 1.0 / sys.alpha1) *
             std::pow(y2, sys.alpha2 / sys.alpha1);
      g.r2 = y2;
      g.signalShape = sys.n2;
      break;
    case UserClass::OffloadNulled:
    case UserClass::OffloadExposed:
      if (!(y1 > 0.0) || !(y2 > 0.0)) {
        throw std::domain_error(
            "class_geometry: offloaded classes need y1 > 0 and y2 > 0");
      }
      g.servingTier = 2;
      g.yServing = y2;
      g.r1 = y1;  // the nearest macro sits exactly at y1
      g.r2 = y2;
      g.signalShape = sys.n2;
      g.y1Dominant = y1;
      break;
    case UserClass::Offloaded:
      throw std::domain_error(
          "class_geometry: the aggregate offloaded class has no single "
          "geometry; use the nulled/exposed subclasses");
  }
  return g;
}

namespace detail {

// log of the geometric dominant-interferer factor kappa^q / (1+kappa)^(q+1),
// safe at kappa = 0 (q = 0 term only).
inline double log_dominant_factor(int q, double logKappa, double log1pKappa) {
  return (q == 0 ? 0.0 : q * logKappa) - (q + 1) * log1pKappa;
}

}  // namespace detail

// Per-order coverage terms T(0..M-1) for one pinned geometry. terms is
// resized to the signal shape M; all entries are nonnegative and their sum
// is the conditional coverage.
inline void conditional_coverage_terms(const ClassGeometry& g,
                                       const SystemParams& sys, double beta,
                                       std::vector<double>& terms) {
  const int M = g.signalShape;
  terms.assign(static_cast<std::size_t>(M), 0.0);
  if (beta <= 0.0) {
    terms[0] = 1.0;  // SIR is almost surely positive
    return;
  }
  if (std::isinf(beta)) return;
  const double alphaJ = g.servingTier == 1 ? sys.alpha1 : sys.alpha2;
  const double pJ = g.servingTier == 1 ? sys.p1 : sys.p2;
  const double sBase = beta * std::pow(g.yServing, alphaJ) / pJ;
  const LaplaceField f1{sys.lambda1, sys.alpha1, g.r1, sBase * sys.p1};
  const LaplaceField f2{sys.lambda2, sys.alpha2, g.r2, sBase * sys.p2};
  const ScaledDerivs d1 = scaled_laplace_derivs(f1, M - 1);
  const ScaledDerivs d2 = scaled_laplace_derivs(f2, M - 1);
  if (g.k != UserClass::OffloadExposed) {
    for (int n = 0; n < M; ++n) {
      double acc = 0.0;
      for (int q = 0; q <= n; ++q) {
        acc += std::exp(d1.logA[static_cast<std::size_t>(q)] +
                        d2.logA[static_cast<std::size_t>(n - q)]);
      }
      terms[static_cast<std::size_t>(n)] = acc;
    }
    return;
  }
  // Exposed offloaded: the nearest macro is excluded from the tier-1 field
  // and re-enters as a single Rayleigh interferer at distance y1.
  const double kappa =
      sBase * sys.p1 * std::pow(g.y1Dominant, -sys.alpha1);
  const double logKappa = std::log(kappa);
  const double log1pKappa = std::log1p(kappa);
  for (int n = 0; n < M; ++n) {
    double acc = 0.0;
    for (const Composition3& c : compositions3(n)) {
      acc += std::exp(d1.logA[static_cast<std::size_t>(c.q1)] +
                      d2.logA[static_cast<std::size_t>(c.q2)] +
                      detail::log_dominant_factor(c.q3, logKappa, log1pKappa));
    }
    terms[static_cast<std::size_t>(n)] = acc;
  }
}

inline double conditional_coverage(const ClassGeometry& g,
                                   const SystemParams& sys, double beta) {
  std::vector<double> terms;
  conditional_coverage_terms(g, sys, beta, terms);
  double s = 0.0;
  for (double t : terms) s += t;
  return std::min(1.0, std::max(0.0, s));
}

// Cancellation-free difference S_nulled - S_exposed for a common offloaded
// geometry g (pass the OffloadNulled geometry). Folding the geometric
// dominant-interferer tail gives
//
//   gap = sum_{m=0}^{M-1} C_m * (kappa/(1+kappa))^{M-m},
//
// every term nonnegative, so the small-beta behaviour Theta(beta^M) survives
// in floating point where the direct difference of two values near 1 would
// not.
inline double conditional_coverage_gap(const ClassGeometry& g,
                                       const SystemParams& sys, double beta) {
  if (g.k != UserClass::OffloadNulled) {
    throw std::domain_error(
        "conditional_coverage_gap: pass the nulled-offloaded geometry");
  }
  if (beta <= 0.0) return 0.0;
  if (std::isinf(beta)) return 0.0;
  std::vector<double> terms;
  conditional_coverage_terms(g, sys, beta, terms);
  const double kappa = beta * std::pow(g.yServing, sys.alpha2) *
                       (sys.p1 / sys.p2) *
                       std::pow(g.y1Dominant, -sys.alpha1);
  if (!(kappa > 0.0)) return 0.0;
  const double logRatio = std::log(kappa) - std::log1p(kappa);
  const int M = g.signalShape;
  double gap = 0.0;
  for (int m = 0; m < M; ++m) {
    gap += terms[static_cast<std::size_t>(m)] * std::exp((M - m) * logRatio);
  }
  return gap;
}

// ---------------------------------------------------------------------------
// Unconditional SIR coverage: integrate over the serving-distance densities.

// Everything derived from (SystemParams, NumericsParams) that the coverage
// integrals reuse; build once per parameter point.
struct CoverageModel {
  SystemParams sys;
  NumericsParams num;
  AssociationStats st;
  DistancePdf fY1;   // macro-served distance density
  DistancePdf fY2;   // unoffloaded pico distance density
  bool hasOffload = false;
  DistancePdf fJoint;  // offloaded (y1, y2) wedge density
  DistancePdf fY2O;    // offloaded pico-distance marginal
  PmfTable activeOffloadedPmf;  // active offloaded users at a macro
};

inline CoverageModel make_coverage_model(const SystemParams& sys,
                                         const NumericsParams& num) {
  CoverageModel m;
  m.sys = sys;
  m.num = num;
  m.st = assoc_stats(sys, num);
  m.fY1 = distance_pdf(ServingDistance::MacroServing, sys, m.st);
  m.fY2 = distance_pdf(ServingDistance::PicoUnoffloaded, sys, m.st);
  // Quadrature noise can leave a2o ~ 1e-18 at B = 1; treat that as "no
  // offloaded class" rather than dividing densities by it.
  m.hasOffload = m.st.a2o > 1e-12;
  if (m.hasOffload) {
    m.fJoint = distance_pdf(ServingDistance::OffloadJoint, sys, m.st);
    m.fY2O = distance_pdf(ServingDistance::OffloadPicoMarginal, sys, m.st);
  }
  m.activeOffloadedPmf = pmf_active_offloaded(m.st, num);
  return m;
}

namespace detail {

// Weights folding the nulling-DoF p.m.f. into the macro coverage sum:
// cumw[n] = Pr(signal shape > n) contribution = sum of dof masses u with
// n <= n1 - u - 1, so S = sum_n T(n) * cumw[n].
inline std::vector<double> dof_weights(const CoverageModel& m, int U) {
  const int n1 = m.sys.n1;
  std::vector<double> w(static_cast<std::size_t>(U) + 1, 0.0);
  double below = 0.0;
  for (int u = 0; u < U; ++u) {
    w[static_cast<std::size_t>(u)] = m.activeOffloadedPmf.prob(u);
    below += w[static_cast<std::size_t>(u)];
  }
  w[static_cast<std::size_t>(U)] = std::max(0.0, 1.0 - below);
  std::vector<double> cumw(static_cast<std::size_t>(n1), 0.0);
  for (int n = 0; n < n1; ++n) {
    const int uMax = std::min(U, n1 - 1 - n);
    double acc = 0.0;
    for (int u = 0; u <= uMax; ++u) acc += w[static_cast<std::size_t>(u)];
    cumw[static_cast<std::size_t>(n)] = acc;
  }
  return cumw;
}

// Macro-user SIR coverage, DoF p.m.f. already folded into cumw.
inline double macro_coverage_integral(const CoverageModel& m, double beta,
                                      const std::vector<double>& cumw) {
  const DistancePdf& f = m.fY1;
  const SystemParams& sys = m.sys;
  return integrate_exp_decay_or_throw(
      [&](double u) {
        const double y = std::sqrt(u / f.k1);
        const double dens =
            f.c / (2.0 * f.k1) * std::exp(-u - f.k2 * std::pow(y, f.e2));
        thread_local std::vector<double> terms;
        conditional_coverage_terms(
            class_geometry(UserClass::Macro, sys, y, 0.0, 0), sys, beta,
            terms);
        double w = 0.0;
        for (std::size_t n = 0; n < terms.size(); ++n) w += terms[n] * cumw[n];
        return dens * w;
      },
      m.num.quadRelTol, "macro SIR coverage integral", 1e-12);
}

inline double pico_plain_coverage_integral(const CoverageModel& m,
                                           double beta) {
  const DistancePdf& f = m.fY2;
  const SystemParams& sys = m.sys;
  return integrate_exp_decay_or_throw(
      [&](double u) {
        const double y = std::sqrt(u / f.k1);
        const double dens =
            f.c / (2.0 * f.k1) * std::exp(-u - f.k2 * std::pow(y, f.e2));
        const double s = conditional_coverage(
            class_geometry(UserClass::PicoUnoffloaded, sys, 0.0, y), sys,
            beta);
        return dens * s;
      },
      m.num.quadRelTol, "unoffloaded pico SIR coverage integral", 1e-12);
}

// Expectation of a conditional quantity q(y1, y2) over the offloaded wedge
// density. The inner variable is the bias level c in [1, B] along the wedge
// ray y2 = (c/pr)^{1/a2} y1^{a1/a2}, mapped to t in [0, 1].
template <typename QFun>
double offload_wedge_integral(const CoverageModel& m, const QFun& q,
                              const std::string& what) {
  const DistancePdf& f = m.fJoint;
  const double B = m.sys.biasB;
  const double a2 = m.sys.alpha2;
  const double relTol = m.num.quadRelTol;
  return integrate_exp_decay_or_throw(
      [&](double u) {
        const double x = std::sqrt(u / f.k1x);
        const double yRay = f.wedge_lo(x);
        const double inner = integrate_or_throw(
            [&](double t) {
              const double c = 1.0 + (B - 1.0) * t;
              const double y = std::pow(c, 1.0 / a2) * yRay;
              // dy = y/(a2*c) dc, dc = (B-1) dt
              return f.eval2(x, y) * q(x, y) * (y / (a2 * c)) * (B - 1.0);
            },
            0.0, 1.0, relTol, what + " (inner)", 1e-14);
        return inner / (2.0 * f.k1x * x);
      },
      relTol, what, 1e-12);
}

inline double abs_offload_coverage_integral(const CoverageModel& m,
                                            double beta) {
  const DistancePdf& f = m.fY2O;
  const SystemParams& sys = m.sys;
  const int M = sys.n2;
  return integrate_exp_decay_or_throw(
      [&](double u) {
        const double y = std::sqrt(u / f.k1);
        const double ye = std::pow(y, f.e2);
        const double dens =
            f.c / (2.0 * f.k1) * std::exp(-u) *
            (std::exp(-f.kLo * ye) - std::exp(-f.kHi * ye));
        // Protected subframe: only pico interferers beyond y remain.
        const LaplaceField f2{sys.lambda2, sys.alpha2, y,
                              beta * std::pow(y, sys.alpha2)};
        const ScaledDerivs d2 = scaled_laplace_derivs(f2, M - 1);
        double s = 0.0;
        for (int n = 0; n < M; ++n) {
          s += std::exp(d2.logA[static_cast<std::size_t>(n)]);
        }
        return dens * std::min(1.0, s);
      },
      m.num.quadRelTol, "protected-subframe offloaded coverage integral",
      1e-12);
}

}  // namespace detail

// SIR coverage of one user class under the nulling scheme with design DoF U
// (U = 0 reproduces plain offloading). UserClass::Offloaded averages the two
// subclasses with the nulling probability.
inline double model_sir_coverage(const CoverageModel& m, UserClass k,
                                 double beta, int U) {
  if (beta <= 0.0) return 1.0;
  if (std::isinf(beta)) return 0.0;
  switch (k) {
    case UserClass::Macro:
      return std::min(1.0, detail::macro_coverage_integral(
                               m, beta, detail::dof_weights(m, U)));
    case UserClass::PicoUnoffloaded:
      return std::min(1.0, detail::pico_plain_coverage_integral(m, beta));
    case UserClass::OffloadNulled:
    case UserClass::OffloadExposed: {
      if (!m.hasOffload) {
        throw std::domain_error(
            "model_sir_coverage: offloaded class is empty at bias B = 1");
      }
      const SystemParams& sys = m.sys;
      const double v = detail::offload_wedge_integral(
          m,
          [&](double x, double y) {
            return conditional_coverage(class_geometry(k, sys, x, y), sys,
                                        beta);
          },
          std::string("offloaded SIR coverage integral (") +
              user_class_name(k) + ")");
      return std::min(1.0, v);
    }
    case UserClass::Offloaded: {
      const double pe = in_probability(m.st, U);
      double acc = 0.0;
      if (pe > 1e-15) {
        acc += pe * model_sir_coverage(m, UserClass::OffloadNulled, beta, U);
      }
      if (1.0 - pe > 1e-15) {
        acc += (1.0 - pe) *
               model_sir_coverage(m, UserClass::OffloadExposed, beta, U);
      }
      return acc;
    }
  }
  return 0.0;
}

// Expected nulled-minus-exposed coverage gap over the offloaded geometry
// (cancellation-free; used by the rate-gain term).
inline double model_sir_gap_offload(const CoverageModel& m, double beta) {
  if (!m.hasOffload) return 0.0;
  if (beta <= 0.0 || std::isinf(beta)) return 0.0;
  const SystemParams& sys = m.sys;
  return detail::offload_wedge_integral(
      m,
      [&](double x, double y) {
        return conditional_coverage_gap(
            class_geometry(UserClass::OffloadNulled, sys, x, y), sys, beta);
      },
      "offloaded coverage gap integral");
}

// Offloaded-user SIR coverage in the protected subframes of the
// resource-partitioning baseline (macro tier silent).
inline double model_abs_sir_offload(const CoverageModel& m, double beta) {
  if (beta <= 0.0) return 1.0;
  if (std::isinf(beta)) return 0.0;
  if (!m.hasOffload) {
    throw std::domain_error(
        "model_abs_sir_offload: offloaded class is empty at bias B = 1");
  }
  return detail::abs_offload_coverage_integral(m, beta);
}

// E_{Y1}[ T(n) ] for the macro class: the single order-n coverage term
// integrated over the macro serving distance. This is the marginal macro
// coverage lost when the signal shape drops from n+1 to n, the kernel of the
// nulling-penalty term.
inline double model_macro_term_integral(const CoverageModel& m, int n,
                                        double beta) {
  if (n < 1 || n > m.sys.n1 - 1) {
    throw std::domain_error("model_macro_term_integral: order out of range");
  }
  if (beta <= 0.0 || std::isinf(beta)) return 0.0;
  const DistancePdf& f = m.fY1;
  const SystemParams& sys = m.sys;
  return integrate_exp_decay_or_throw(
      [&](double u) {
        const double y = std::sqrt(u / f.k1);
        const double dens =
            f.c / (2.0 * f.k1) * std::exp(-u - f.k2 * std::pow(y, f.e2));
        thread_local std::vector<double> terms;
        // Geometry with signal shape n+1 so terms.back() is T(n).
        conditional_coverage_terms(
            class_geometry(UserClass::Macro, sys, y, 0.0, sys.n1 - (n + 1)),
            sys, beta, terms);
        return dens * terms.back();
      },
      m.num.quadRelTol, "macro per-order term integral", 1e-12);
}

// ---------------------------------------------------------------------------
// Rate coverage.

enum class Method { Full, Mla, MonteCarlo };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Full: return "full";
    case Method::Mla: return "mla";
    case Method::MonteCarlo: return "mc";
  }
  return "unknown";
}

struct CoverageReport {
  Scheme scheme = Scheme::IN;
  Method method = Method::Full;
  double overall = 0.0;
  std::optional<double> ci;  // Monte Carlo only: 95% CI half-width
  double tailError = 0.0;    // full method: load-truncation bound
  double inProbability = 0.0;
  std::map<UserClass, double> perClass;     // conditional rate coverage
  std::map<UserClass, double> perClassCi;   // Monte Carlo only
  std::map<UserClass, double> classWeight;  // association x selection weight
};

namespace detail {

// E_L[ S(f(L * tauOverW)) ] over a load p.m.f. with the monotone early
// break; *tailErr accumulates an upper bound on everything skipped.
template <typename SFun>
double load_average(const PmfTable& loads, double tauOverW, const SFun& s,
                    double* tailErr) {
  double acc = 0.0;
  double cum = 0.0;
  double lastS = 1.0;
  for (std::size_t i = 0; i < loads.probs.size(); ++i) {
    const int n = loads.offset + static_cast<int>(i);
    lastS = s(rate_to_sir_threshold(n * tauOverW));
    acc += loads.probs[i] * lastS;
    cum += loads.probs[i];
    if (lastS < 5e-7) break;  // coverage falls monotonically with the load
  }
  const double remaining = std::max(0.0, 1.0 - cum);
  if (tailErr != nullptr) *tailErr += remaining * lastS;
  return acc;
}

}  // namespace detail

// Analytic rate coverage (Method::Full or Method::Mla). Monte Carlo
// estimates come from the simulation module instead.
inline CoverageReport rate_coverage(const CoverageModel& m,
                                    const SchemeParams& sch, Method method) {
  if (method == Method::MonteCarlo) {
    throw std::invalid_argument(
        "rate_coverage: Monte Carlo estimates come from the simulation "
        "module");
  }
  const SystemParams& sys = m.sys;
  const double tau = sch.rateThresholdTau;
  if (!(tau >= 0.0)) {
    throw std::domain_error("rate_coverage: tau must be >= 0");
  }
  CoverageReport rep;
  rep.scheme = sch.scheme;
  rep.method = method;

  // Evaluates one class: full load average or single mean-load point.
  const auto classRate = [&](const PmfTable& loads, double meanLoad,
                             double tauOverW, const auto& s) {
    if (method == Method::Mla) {
      return s(rate_to_sir_threshold(meanLoad * tauOverW));
    }
    return detail::load_average(loads, tauOverW, s, &rep.tailError);
  };

  if (sch.scheme == Scheme::ABS) {
    const double eta = sch.absEta;
    if (!(eta > 0.0) || !(eta < 1.0)) {
      throw std::domain_error("rate_coverage: ABS share must be in (0,1)");
    }
    const PmfTable l1 = load_pmf(LoadClass::MacroTier, sys, m.st, m.num);
    const PmfTable l2u =
        load_pmf(LoadClass::PicoUnoffloaded, sys, m.st, m.num);
    const double w1 = m.st.a1, w2u = m.st.a2obar, w2o = m.st.a2o;
    rep.classWeight[UserClass::Macro] = w1;
    rep.classWeight[UserClass::PicoUnoffloaded] = w2u;
    rep.classWeight[UserClass::Offloaded] = w2o;
    const double touwMacro = tau / (sys.bandwidthW * (1.0 - eta));
    const double touwOff = tau / (sys.bandwidthW * eta);
    const double r1 = classRate(
        l1, mean_load(LoadClass::MacroTier, sys, m.st), touwMacro,
        [&](double beta) {
          return model_sir_coverage(m, UserClass::Macro, beta, 0);
        });
    const double r2u = classRate(
        l2u, mean_load(LoadClass::PicoUnoffloaded, sys, m.st), touwMacro,
        [&](double beta) {
          return model_sir_coverage(m, UserClass::PicoUnoffloaded, beta, 0);
        });
    rep.perClass[UserClass::Macro] = r1;
    rep.perClass[UserClass::PicoUnoffloaded] = r2u;
    double r2o = 0.0;
    if (m.hasOffload) {
      const PmfTable l2o =
          load_pmf(LoadClass::PicoOffloaded, sys, m.st, m.num);
      r2o = classRate(l2o, mean_load(LoadClass::PicoOffloaded, sys, m.st),
                      touwOff, [&](double beta) {
                        return model_abs_sir_offload(m, beta);
                      });
      rep.perClass[UserClass::Offloaded] = r2o;
    }
    rep.overall = w1 * r1 + w2u * r2u + w2o * r2o;
    return rep;
  }

  // Nulling scheme; U = 0 is exactly plain offloading.
  const int U = sch.scheme == Scheme::IN ? sch.inDof : 0;
  if (U < 0 || U > sys.n1 - 1) {
    throw std::domain_error("rate_coverage: nulling DoF out of range");
  }
  const double pe = m.hasOffload ? in_probability(m.st, U) : 0.0;
  rep.inProbability = pe;
  const double w1 = m.st.a1, w2u = m.st.a2obar;
  const double wNull = m.st.a2o * pe, wExp = m.st.a2o * (1.0 - pe);
  rep.classWeight[UserClass::Macro] = w1;
  rep.classWeight[UserClass::PicoUnoffloaded] = w2u;
  rep.classWeight[UserClass::OffloadNulled] = wNull;
  rep.classWeight[UserClass::OffloadExposed] = wExp;
  rep.classWeight[UserClass::Offloaded] = m.st.a2o;

  const PmfTable l1 = load_pmf(LoadClass::MacroTier, sys, m.st, m.num);
  const PmfTable l2 = load_pmf(LoadClass::PicoTier, sys, m.st, m.num);
  const double meanL1 = mean_load(LoadClass::MacroTier, sys, m.st);
  const double meanL2 = mean_load(LoadClass::PicoTier, sys, m.st);
  const double touw = tau / sys.bandwidthW;

  const double r1 =
      classRate(l1, meanL1, touw, [&](double beta) {
        return model_sir_coverage(m, UserClass::Macro, beta, U);
      });
  const double r2u =
      classRate(l2, meanL2, touw, [&](double beta) {
        return model_sir_coverage(m, UserClass::PicoUnoffloaded, beta, U);
      });
  rep.perClass[UserClass::Macro] = r1;
  rep.perClass[UserClass::PicoUnoffloaded] = r2u;
  double rNull = 0.0, rExp = 0.0;
  if (wNull > 1e-15) {
    rNull = classRate(l2, meanL2, touw, [&](double beta) {
      return model_sir_coverage(m, UserClass::OffloadNulled, beta, U);
    });
    rep.perClass[UserClass::OffloadNulled] = rNull;
  }
  if (wExp > 1e-15) {
    rExp = classRate(l2, meanL2, touw, [&](double beta) {
      return model_sir_coverage(m, UserClass::OffloadExposed, beta, U);
    });
    rep.perClass[UserClass::OffloadExposed] = rExp;
  }
  if (m.hasOffload) {
    rep.perClass[UserClass::Offloaded] = pe * rNull + (1.0 - pe) * rExp;
  }
  rep.overall = w1 * r1 + w2u * r2u + wNull * rNull + wExp * rExp;
  return rep;
}

// Per-class and overall SIR (not rate) coverage at one threshold; the
// overall value weights the classes by association and nulling
// probabilities.
inline CoverageReport sir_report(const CoverageModel& m, double beta, int U) {
  CoverageReport rep;
  rep.scheme = Scheme::IN;
  rep.method = Method::Full;
  const double pe = m.hasOffload ? in_probability(m.st, U) : 0.0;
  rep.inProbability = pe;
  const double s1 = model_sir_coverage(m, UserClass::Macro, beta, U);
  const double s2u =
      model_sir_coverage(m, UserClass::PicoUnoffloaded, beta, U);
  rep.perClass[UserClass::Macro] = s1;
  rep.perClass[UserClass::PicoUnoffloaded] = s2u;
  rep.classWeight[UserClass::Macro] = m.st.a1;
  rep.classWeight[UserClass::PicoUnoffloaded] = m.st.a2obar;
  rep.classWeight[UserClass::OffloadNulled] = m.st.a2o * pe;
  rep.classWeight[UserClass::OffloadExposed] = m.st.a2o * (1.0 - pe);
  rep.classWeight[UserClass::Offloaded] = m.st.a2o;
  double sNull = 0.0, sExp = 0.0;
  if (m.hasOffload) {
    if (pe > 1e-15) {
      sNull = model_sir_coverage(m, UserClass::OffloadNulled, beta, U);
      rep.perClass[UserClass::OffloadNulled] = sNull;
    }
    if (1.0 - pe > 1e-15) {
      sExp = model_sir_coverage(m, UserClass::OffloadExposed, beta, U);
      rep.perClass[UserClass::OffloadExposed] = sExp;
    }
    rep.perClass[UserClass::Offloaded] = pe * sNull + (1.0 - pe) * sExp;
  }
  rep.overall = m.st.a1 * s1 + m.st.a2obar * s2u +
                m.st.a2o * (pe * sNull + (1.0 - pe) * sExp);
  return rep;
}

}  // namespace hetin
