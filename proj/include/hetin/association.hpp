#pragma once
// Association-layer statistics for the two-tier downlink with biased
// association: tier probabilities A_k, serving-distance densities, load
// p.m.f.s and means, the p.m.f.s of (active) offloaded-user counts at a
// macro-BS, the nulling-DoF p.m.f., and the nulling probability.
//
// All semi-infinite integrals are evaluated after the substitution
// u = pi*lambda*z^2, which turns every integrand into an e^-u envelope.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetin/params.hpp"
#include "hetin/quadrature.hpp"
#include "hetin/specfun.hpp"

namespace hetin {

struct AssociationStats {
  double a1 = 0.0;      // Pr(typical user served by the macro tier)
  double a2 = 0.0;      // Pr(served by the pico tier)
  double a2obar = 0.0;  // Pr(pico-served without bias help)
  double a2o = 0.0;     // Pr(offloaded: pico-served only because of bias)
  double rho = 0.0;     // offload ratio lambda2*a2o / (a2*lambda1)
};

// Tier/class selector for load statistics.
enum class LoadClass { MacroTier, PicoTier, PicoUnoffloaded, PicoOffloaded };

inline AssociationStats assoc_stats(const SystemParams& sys, double biasB,
                                    const NumericsParams& num) {
  if (!(biasB >= 1.0)) {
    throw std::domain_error("assoc_stats: bias factor must be >= 1");
  }
  const double pr = sys.p1 / sys.p2;
  const double l1 = sys.lambda1, l2 = sys.lambda2;
  const double e12 = sys.alpha1 / sys.alpha2;  // exponent for macro-serving
  const double e21 = sys.alpha2 / sys.alpha1;  // exponent for pico-serving
  // Cross-tier exclusion coefficients after u = pi*lambda*z^2:
  //   macro-serving: exp(-pi*l2*(B/pr)^{2/a2} * (u/(pi*l1))^{a1/a2})
  //   pico-serving : exp(-pi*l1*(pr/c)^{2/a1} * (u/(pi*l2))^{a2/a1}), c=B or 1
  const double cA = M_PI * l2 * std::pow(biasB / pr, 2.0 / sys.alpha2) /
                    std::pow(M_PI * l1, e12);
  const double cB = M_PI * l1 * std::pow(pr / biasB, 2.0 / sys.alpha1) /
                    std::pow(M_PI * l2, e21);
  const double cD = M_PI * l1 * std::pow(pr, 2.0 / sys.alpha1) /
                    std::pow(M_PI * l2, e21);
  AssociationStats st;
  st.a1 = integrate_exp_decay_or_throw(
      [&](double u) { return std::exp(-u - cA * std::pow(u, e12)); },
      num.quadRelTol, "macro association fraction");
  st.a2 = integrate_exp_decay_or_throw(
      [&](double u) { return std::exp(-u - cB * std::pow(u, e21)); },
      num.quadRelTol, "pico association fraction");
  st.a2obar = integrate_exp_decay_or_throw(
      [&](double u) { return std::exp(-u - cD * std::pow(u, e21)); },
      num.quadRelTol, "unoffloaded pico association fraction");
  st.a2o = integrate_exp_decay_or_throw(
      [&](double u) {
        const double ue = std::pow(u, e21);
        return std::exp(-u) * (std::exp(-cB * ue) - std::exp(-cD * ue));
      },
      num.quadRelTol, "offloaded association fraction");
  st.rho = st.a2 > 0.0 ? l2 * st.a2o / (st.a2 * l1) : 0.0;
  return st;
}

inline AssociationStats assoc_stats(const SystemParams& sys,
                                    const NumericsParams& num) {
  return assoc_stats(sys, sys.biasB, num);
}

// Truncated discrete distribution with explicit tail mass.
struct PmfTable {
  int offset = 0;              // value of the first support point
  std::vector<double> probs;   // probs[i] = Pr(X = offset + i)
  double tailMass = 0.0;       // mass beyond the stored support
  double normDefect = 0.0;     // nonzero only if renormalization was forced

  double prob(int n) const {
    const int i = n - offset;
    if (i < 0 || i >= static_cast<int>(probs.size())) return 0.0;
    return probs[static_cast<std::size_t>(i)];
  }
  int maxSupport() const {
    return offset + static_cast<int>(probs.size()) - 1;
  }
  double sum() const {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
  }
  // Mean over the stored support only (diagnostic; ignores tailMass).
  double truncatedMean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      s += (offset + static_cast<double>(i)) * probs[i];
    }
    return s;
  }
};

namespace detail {

// Shared builder: extend a log-pmf until the tail drops below pmfTailEps or
// the support cap is hit; whatever misses the cap is carried as explicit
// tail mass, so normalization holds either way and consumers can bound the
// truncation effect themselves.
template <typename LogPmf>
PmfTable build_pmf(int offset, const LogPmf& logp, const NumericsParams& num,
                   const std::string& /*what*/) {
  PmfTable t;
  t.offset = offset;
  double cum = 0.0;
  for (int n = offset; n < offset + num.loadSumMax; ++n) {
    const double p = std::exp(logp(n));
    t.probs.push_back(p);
    cum += p;
    if (1.0 - cum <= num.pmfTailEps) break;
  }
  double rem = 1.0 - cum;
  if (rem < -1e-6) {
    // The approximating formula over-normalized; rescale and record it.
    t.normDefect = -rem;
    for (double& p : t.probs) p /= cum;
    t.tailMass = 0.0;
  } else {
    t.tailMass = std::max(0.0, rem);
  }
  return t;
}

// log of the 3.5-shape negative-binomial-like mass at n >= 0 with ratio x:
//   3.5^3.5 * Gamma(n+3.5) / (Gamma(3.5) n!) * x^n * (3.5+x)^-(n+3.5)
inline double log_nb35(int n, double x) {
  constexpr double k = 3.5;
  return k * std::log(k) + std::lgamma(n + k) - std::lgamma(k) -
         log_factorial(n) + n * std::log(x) - (n + k) * std::log(k + x);
}

// log of the size-biased variant at n >= 1 (the same algebraic family serves
// both the nearest-macro active-offloaded count and all per-BS loads):
//   3.5^3.5 * Gamma(n+3.5) / (Gamma(n) Gamma(3.5)) * x^{n-1} * (3.5+x)^-(n+3.5)
inline double log_nb35_size_biased(int n, double x) {
  constexpr double k = 3.5;
  return k * std::log(k) + std::lgamma(n + k) - std::lgamma(n) -
         std::lgamma(k) + (n - 1) * std::log(x) -
         (n + k) * std::log(k + x);
}

}  // namespace detail

// P.m.f. of the number of *active* offloaded users of the typical user's
// serving (or nearest) macro-BS, support n >= 0.
inline PmfTable pmf_active_offloaded(const AssociationStats& st,
                                     const NumericsParams& num) {
  if (st.rho <= 1e-300) {
    PmfTable t;
    t.offset = 0;
    t.probs = {1.0};
    return t;
  }
  return detail::build_pmf(
      0, [&](int n) { return detail::log_nb35(n, st.rho); }, num,
      "active offloaded user count");
}

// P.m.f. of the nulling DoF min(U, active offloaded users): copies the base
// p.m.f. below U and folds the entire upper tail into the mass at U.
inline PmfTable pmf_in_dof(const AssociationStats& st, int U,
                           const NumericsParams& num) {
  if (U < 0) throw std::domain_error("pmf_in_dof: U must be >= 0");
  PmfTable base = pmf_active_offloaded(st, num);
  PmfTable t;
  t.offset = 0;
  t.probs.assign(static_cast<std::size_t>(U) + 1, 0.0);
  double below = 0.0;
  for (int n = 0; n < U; ++n) {
    const double p = base.prob(n);
    t.probs[static_cast<std::size_t>(n)] = p;
    below += p;
  }
  t.probs[static_cast<std::size_t>(U)] = std::max(0.0, 1.0 - below);
  t.tailMass = 0.0;
  return t;
}

// P.m.f. of the active offloaded user count at the nearest macro-BS of an
// *offloaded* typical user (size-biased: the typical user itself is one of
// them), support n >= 1.
inline PmfTable pmf_active_offloaded_nearest(const AssociationStats& st,
                                             const NumericsParams& num) {
  if (st.rho <= 1e-300) {
    PmfTable t;
    t.offset = 1;
    t.probs = {1.0};
    return t;
  }
  return detail::build_pmf(
      1, [&](int n) { return detail::log_nb35_size_biased(n, st.rho); }, num,
      "active offloaded user count at the nearest macro");
}

namespace detail {

// Closed form of sum_{n>=1} (1/n) * Pr(Nhat = n) for the size-biased family:
// (1/rho) * (1 - (1 + rho/3.5)^-3.5), with a series branch for small rho.
inline double harmonic_weighted_mass(double rho) {
  constexpr double k = 3.5;
  if (rho < 1e-6) {
    // (1+x)^-k expansion: 1 - rho*(k+1)/(2k)*... keep two terms.
    return 1.0 - rho * (k + 1.0) / (2.0 * k);
  }
  return -std::expm1(-k * std::log1p(rho / k)) / rho;
}

}  // namespace detail

// Probability that an offloaded typical user is actually selected for
// nulling when the design allows U nulls: selection is uniform among the
// nearest macro's active offloaded users, so the conditional acceptance is
// min(1, U/n). Uses the closed-form harmonic sum; see
// in_probability_truncated for the independent summation path.
inline double in_probability(const AssociationStats& st, int U) {
  if (U < 0) throw std::domain_error("in_probability: U must be >= 0");
  if (U == 0) return 0.0;
  const double rho = st.rho;
  if (rho <= 1e-300) return 1.0;  // a lone offloaded user is always selected
  double acc = U * detail::harmonic_weighted_mass(rho);
  for (int n = 1; n <= U; ++n) {
    const double p = std::exp(detail::log_nb35_size_biased(n, rho));
    acc += p * (1.0 - static_cast<double>(U) / n);
  }
  return acc;
}

// Independent evaluation by direct truncated summation (internal
// cross-check for the closed-form path).
inline double in_probability_truncated(const AssociationStats& st, int U,
                                       const NumericsParams& num) {
  if (U == 0) return 0.0;
  PmfTable t = pmf_active_offloaded_nearest(st, num);
  double acc = 0.0;
  for (int n = 1; n <= t.maxSupport(); ++n) {
    acc += t.prob(n) * std::min(1.0, static_cast<double>(U) / n);
  }
  return acc;  // tail contributes at most tailMass * U/maxSupport
}

inline double load_kappa(LoadClass cls, const SystemParams& sys,
                         const AssociationStats& st) {
  switch (cls) {
    case LoadClass::MacroTier: return sys.lambdaU * st.a1 / sys.lambda1;
    case LoadClass::PicoTier: return sys.lambdaU * st.a2 / sys.lambda2;
    case LoadClass::PicoUnoffloaded:
      return sys.lambdaU * st.a2obar / sys.lambda2;
    case LoadClass::PicoOffloaded: return sys.lambdaU * st.a2o / sys.lambda2;
  }
  return 0.0;
}

// Load p.m.f. of the typical user's serving BS (support n >= 1; the typical
// user itself counts). The 3.5-shape form mirrors the area-distribution
// approximation of Voronoi-like cells.
inline PmfTable load_pmf(LoadClass cls, const SystemParams& sys,
                         const AssociationStats& st,
                         const NumericsParams& num) {
  const double kappa = load_kappa(cls, sys, st);
  if (kappa <= 1e-300) {
    PmfTable t;
    t.offset = 1;
    t.probs = {1.0};
    return t;
  }
  return detail::build_pmf(
      1, [&](int n) { return detail::log_nb35_size_biased(n, kappa); }, num,
      "serving-BS load");
}

// Mean load closed form E[L] = 1 + 1.28 * lambda_u * A / lambda (the printed
// constant; intentionally not the truncated-p.m.f. mean).
inline double mean_load(LoadClass cls, const SystemParams& sys,
                        const AssociationStats& st) {
  return 1.0 + 1.28 * load_kappa(cls, sys, st);
}

// ---------------------------------------------------------------------------
// Serving-distance densities.

enum class ServingDistance {
  MacroServing,        // f_{Y1}: macro-served typical user
  PicoUnoffloaded,     // f_{Y2}: pico-served without bias help
  OffloadJoint,        // f_{Y1,Y2} on the offload wedge
  OffloadPicoMarginal  // f_{Y2O}: pico distance of an offloaded user
};

struct DistancePdf {
  ServingDistance cls = ServingDistance::MacroServing;
  double norm = 1.0;  // the A_k that normalizes this density
  // Single-distance form: c * y * exp(-k1*y^2) * radial cross-tier factor.
  double c = 0.0, k1 = 0.0, k2 = 0.0, e2 = 0.0;
  double kLo = 0.0, kHi = 0.0;    // marginal-only (two exclusion levels)
  double k1x = 0.0, k1y = 0.0;    // joint-only
  double wLo = 0.0, wHi = 0.0, wExp = 0.0;  // wedge bounds: w*x^{a1/a2}

  bool joint() const { return cls == ServingDistance::OffloadJoint; }

  double wedge_lo(double x) const { return wLo * std::pow(x, wExp); }
  double wedge_hi(double x) const { return wHi * std::pow(x, wExp); }
  bool in_wedge(double x, double y) const {
    const double lo = wedge_lo(x), hi = wedge_hi(x);
    const double slack = 1e-12 * (1.0 + hi);
    return y >= lo - slack && y <= hi + slack;
  }

  double eval(double y) const {
    if (joint()) {
      throw std::domain_error(
          "DistancePdf: joint density needs two arguments");
    }
    if (y < 0.0) throw std::domain_error("DistancePdf: negative distance");
    if (cls == ServingDistance::OffloadPicoMarginal) {
      const double ye = std::pow(y, e2);
      return c * y * std::exp(-k1 * y * y) *
             (std::exp(-kLo * ye) - std::exp(-kHi * ye));
    }
    return c * y * std::exp(-k1 * y * y - k2 * std::pow(y, e2));
  }

  double eval2(double x, double y) const {
    if (!joint()) {
      throw std::domain_error(
          "DistancePdf: single-distance density takes one argument");
    }
    if (x < 0.0 || y < 0.0) {
      throw std::domain_error("DistancePdf: negative distance");
    }
    if (!in_wedge(x, y)) {
      throw std::domain_error(
          "DistancePdf: (x,y) outside the offload wedge support");
    }
    return c * x * y * std::exp(-(k1x * x * x + k1y * y * y));
  }
};

inline DistancePdf distance_pdf(ServingDistance cls, const SystemParams& sys,
                                const AssociationStats& st) {
  const double pr = sys.p1 / sys.p2;
  DistancePdf f;
  f.cls = cls;
  switch (cls) {
    case ServingDistance::MacroServing:
      f.norm = st.a1;
      f.c = 2.0 * M_PI * sys.lambda1 / st.a1;
      f.k1 = M_PI * sys.lambda1;
      f.k2 = M_PI * sys.lambda2 * std::pow(sys.biasB / pr, 2.0 / sys.alpha2);
      f.e2 = 2.0 * sys.alpha1 / sys.alpha2;
      break;
    case ServingDistance::PicoUnoffloaded:
      f.norm = st.a2obar;
      f.c = 2.0 * M_PI * sys.lambda2 / st.a2obar;
      f.k1 = M_PI * sys.lambda2;
      f.k2 = M_PI * sys.lambda1 * std::pow(pr, 2.0 / sys.alpha1);
      f.e2 = 2.0 * sys.alpha2 / sys.alpha1;
      break;
    case ServingDistance::OffloadJoint:
      if (st.a2o <= 0.0) {
        throw std::domain_error(
            "distance_pdf: offloaded class is empty (bias B = 1)");
      }
      f.norm = st.a2o;
      f.c = 4.0 * M_PI * M_PI * sys.lambda1 * sys.lambda2 / st.a2o;
      f.k1x = M_PI * sys.lambda1;
      f.k1y = M_PI * sys.lambda2;
      f.wLo = std::pow(1.0 / pr, 1.0 / sys.alpha2);
      f.wHi = std::pow(sys.biasB / pr, 1.0 / sys.alpha2);
      f.wExp = sys.alpha1 / sys.alpha2;
      break;
    case ServingDistance::OffloadPicoMarginal:
      if (st.a2o <= 0.0) {
        throw std::domain_error(
            "distance_pdf: offloaded class is empty (bias B = 1)");
      }
      f.norm = st.a2o;
      f.c = 2.0 * M_PI * sys.lambda2 / st.a2o;
      f.k1 = M_PI * sys.lambda2;
      f.kLo = M_PI * sys.lambda1 * std::pow(pr / sys.biasB, 2.0 / sys.alpha1);
      f.kHi = M_PI * sys.lambda1 * std::pow(pr, 2.0 / sys.alpha1);
      f.e2 = 2.0 * sys.alpha2 / sys.alpha1;
      break;
  }
  return f;
}

}  // namespace hetin
