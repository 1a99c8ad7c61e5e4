#pragma once
// Laplace transform of the aggregated interference from one PPP tier outside
// an exclusion radius, and its scaled derivatives
//
//   Ltilde^(m)(s,r) = (-s)^m d^m/ds^m L(s,r) = s^m E[I^m e^{-sI}] >= 0,
//
// computed as L(s,r) times a sum over integer partitions of m of products of
// the per-order factors
//
//   D_a = (2*pi/alpha) * lambda * s^{2/alpha} * B'(1+2/alpha, a-2/alpha, z),
//   z = 1/(1 + s r^{-alpha}).
//
// Every term is nonnegative, so the partition sum has no cancellation; the
// factors are kept in log form because their dynamic range explodes for
// large antenna counts.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hetin/specfun.hpp"

namespace hetin {

struct LaplaceField {
  double lambda = 0.0;  // interferer density
  double alpha = 4.0;   // path-loss exponent (>2)
  double r = 1.0;       // exclusion radius (> 0)
  double s = 0.0;       // Laplace argument (>= 0)
};

namespace detail {

// Per-thread cache of the Beta prefactors log B(., .) appearing in the
// exponent and in every derivative factor D_a: they depend only on alpha and
// the order, and each quadrature sweep re-evaluates them thousands of times.
struct BetaPrefCache {
  double alpha = 0.0;
  double logBetaExp = 0.0;          // log B(2/alpha, 1-2/alpha)
  std::vector<double> logBetaOrder; // [a-1] = log B(1+2/alpha, a-2/alpha)
};

inline const BetaPrefCache& beta_pref_cache(double alpha, int mMax) {
  thread_local std::vector<std::unique_ptr<BetaPrefCache>> caches;
  const double twoOverAlpha = 2.0 / alpha;
  for (auto& c : caches) {
    if (c->alpha == alpha) {
      for (int a = static_cast<int>(c->logBetaOrder.size()) + 1; a <= mMax;
           ++a) {
        c->logBetaOrder.push_back(
            log_beta(1.0 + twoOverAlpha, a - twoOverAlpha));
      }
      return *c;
    }
  }
  auto c = std::make_unique<BetaPrefCache>();
  c->alpha = alpha;
  c->logBetaExp = log_beta(twoOverAlpha, 1.0 - twoOverAlpha);
  for (int a = 1; a <= mMax; ++a) {
    c->logBetaOrder.push_back(log_beta(1.0 + twoOverAlpha, a - twoOverAlpha));
  }
  caches.push_back(std::move(c));
  return *caches.back();
}

struct PartitionTerm {
  double logCoef;                            // log(m!/prod p_a!)
  std::vector<std::pair<int, int>> factors;  // (a, p_a) with p_a > 0
};

// Cached partition-product terms for each order m (built once, then
// immutable; the unique_ptr keeps addresses stable across cache growth).
inline const std::vector<PartitionTerm>& partition_terms(int m) {
  static std::mutex mu;
  static std::vector<std::unique_ptr<std::vector<PartitionTerm>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  if (static_cast<int>(cache.size()) <= m) cache.resize(m + 1);
  if (!cache[m]) {
    auto terms = std::make_unique<std::vector<PartitionTerm>>();
    for (const Partition& p : partitions(m)) {
      PartitionTerm t;
      t.logCoef = log_factorial(m);
      for (int a = 1; a <= m; ++a) {
        const int pa = p.mult[static_cast<std::size_t>(a - 1)];
        if (pa > 0) {
          t.logCoef -= log_factorial(pa);
          t.factors.emplace_back(a, pa);
        }
      }
      terms->push_back(std::move(t));
    }
    cache[m] = std::move(terms);
  }
  return *cache[m];
}

}  // namespace detail

// Exponent of the interference Laplace transform:
//   L(s,r) = exp( -(2*pi/alpha) * lambda * s^{2/alpha}
//                 * B'(2/alpha, 1-2/alpha, 1/(1+s r^{-alpha})) ).
inline double laplace_exponent(const LaplaceField& f) {
  if (!(f.r > 0.0)) throw std::domain_error("laplace: exclusion radius r <= 0");
  if (!(f.s >= 0.0)) throw std::domain_error("laplace: s must be >= 0");
  if (f.s == 0.0) return 0.0;
  const double twoOverAlpha = 2.0 / f.alpha;
  const double t = std::pow(f.r, f.alpha);
  const double omz = f.s / (f.s + t);  // 1 - z, computed without cancellation
  const double pref = (2.0 * M_PI / f.alpha) * f.lambda *
                      std::pow(f.s, twoOverAlpha);
  const auto& cache = detail::beta_pref_cache(f.alpha, 0);
  return pref * detail::comp_inc_beta_c_pref(twoOverAlpha, 1.0 - twoOverAlpha,
                                             omz, cache.logBetaExp);
}

inline double laplace_interference(const LaplaceField& f) {
  return std::exp(-laplace_exponent(f));
}

// All scaled derivatives up to order mMax for one (s, r) evaluation point,
// shared by the coverage sums. logA[m] = log( Ltilde^(m)(s,r) / m! ).
struct ScaledDerivs {
  double logL = 0.0;
  std::vector<double> logA;

  double log_scaled(int m) const {
    return logA[static_cast<std::size_t>(m)] + log_factorial(m);
  }
};

inline ScaledDerivs scaled_laplace_derivs(const LaplaceField& f, int mMax) {
  if (mMax < 0) throw std::domain_error("scaled_laplace_derivs: mMax < 0");
  if (mMax > 64) {
    throw std::domain_error("scaled_laplace_derivs: order cap exceeded");
  }
  const double negInf = -std::numeric_limits<double>::infinity();
  ScaledDerivs out;
  out.logA.assign(static_cast<std::size_t>(mMax) + 1, negInf);
  if (f.s == 0.0) {
    out.logL = 0.0;
    out.logA[0] = 0.0;  // L(0,r) = 1; all derivatives carry a factor s^m
    return out;
  }
  out.logL = -laplace_exponent(f);
  out.logA[0] = out.logL;
  if (mMax == 0) return out;

  const double twoOverAlpha = 2.0 / f.alpha;
  const double t = std::pow(f.r, f.alpha);
  const double omz = f.s / (f.s + t);
  const double logPref = std::log(2.0 * M_PI * f.lambda / f.alpha) +
                         twoOverAlpha * std::log(f.s);
  const auto& cache = detail::beta_pref_cache(f.alpha, mMax);
  std::vector<double> logD(static_cast<std::size_t>(mMax) + 1, negInf);
  for (int a = 1; a <= mMax; ++a) {
    const double bp = detail::comp_inc_beta_c_pref(
        1.0 + twoOverAlpha, a - twoOverAlpha, omz,
        cache.logBetaOrder[static_cast<std::size_t>(a - 1)]);
    logD[static_cast<std::size_t>(a)] =
        bp > 0.0 ? logPref + std::log(bp) : negInf;
  }
  // Partition sum per order, log-sum-exp over nonnegative terms.
  std::vector<double> termLogs;
  for (int m = 1; m <= mMax; ++m) {
    termLogs.clear();
    double maxLog = negInf;
    for (const auto& term : detail::partition_terms(m)) {
      double lg = term.logCoef;
      for (const auto& [a, pa] : term.factors) {
        const double ld = logD[static_cast<std::size_t>(a)];
        if (ld == negInf) {
          lg = negInf;
          break;
        }
        lg += pa * ld;
      }
      if (lg != negInf) {
        termLogs.push_back(lg);
        maxLog = std::max(maxLog, lg);
      }
    }
    double logY = negInf;
    if (!termLogs.empty()) {
      double acc = 0.0;
      for (double lg : termLogs) acc += std::exp(lg - maxLog);
      logY = maxLog + std::log(acc);
    }
    out.logA[static_cast<std::size_t>(m)] =
        logY == negInf ? negInf : out.logL + logY - log_factorial(m);
  }
  return out;
}

// Ltilde^(m)(s,r) as a plain value (underflows to 0 harmlessly when the
// Laplace factor is astronomically small).
inline double laplace_derivative_scaled(int m, const LaplaceField& f) {
  ScaledDerivs d = scaled_laplace_derivs(f, m);
  return std::exp(d.log_scaled(m));
}

}  // namespace hetin
