#pragma once
// Special functions and combinatorial enumerators used by the coverage
// formulas: the complementary incomplete beta function B'(a,b,z), integer
// partitions in multiplicity form, ordered 3-part compositions, and small
// log-gamma / multinomial helpers.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetin/quadrature.hpp"

namespace hetin {

inline double log_gamma(double x) {
  if (!(x > 0.0)) {
    throw std::domain_error("log_gamma: argument must be positive, got " +
                            std::to_string(x));
  }
  return std::lgamma(x);
}

inline double log_beta(double a, double b) {
  return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

namespace detail {

// Continued fraction for the regularized incomplete beta (modified Lentz).
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3.0e-16;
  constexpr double kFpMin = 1.0e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("beta_cf: continued fraction did not converge");
}

}  // namespace detail

// Regularized incomplete beta I_x(a,b) for a,b > 0, x in [0,1].
inline double reg_inc_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::domain_error("reg_inc_beta: requires a>0 and b>0");
  }
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double lbt =
      -log_beta(a, b) + a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(lbt);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * detail::beta_cf(a, b, x) / a;
  }
  return 1.0 - bt * detail::beta_cf(b, a, 1.0 - x) / b;
}

namespace detail {

// B'(a,b,z) with omz = 1-z and log B(a,b) precomputed by the caller. Hot
// loops evaluate thousands of points at fixed (a,b); the Beta prefactor
// cancels outright in the small-omz continued-fraction branch and is a
// single exp() in the other. No argument validation here.
inline double comp_inc_beta_c_pref(double a, double b, double omz,
                                   double logBetaAB) {
  if (omz <= 0.0) return 0.0;                       // z >= 1: empty range
  if (omz >= 1.0) return std::exp(logBetaAB);       // z <= 0: complete Beta
  const double lpow = b * std::log(omz) + a * std::log1p(-omz);
  if (omz < (b + 1.0) / (a + b + 2.0)) {
    return std::exp(lpow) * beta_cf(b, a, omz) / b;
  }
  return std::exp(logBetaAB) -
         std::exp(lpow) * beta_cf(a, b, 1.0 - omz) / a;
}

}  // namespace detail

// Complementary incomplete beta B'(a,b,z) = integral_z^1 u^{a-1}(1-u)^{b-1} du
// expressed through the *complement* argument omz = 1-z:
//   B'(a,b,z) = B(a,b) * I_{1-z}(b,a).
// Callers that know 1-z exactly (the Laplace-exponent formulas do) should use
// this overload to avoid cancellation when z -> 1.
inline double comp_inc_beta_c(double a, double b, double omz) {
  if (!(a > 0.0)) throw std::domain_error("comp_inc_beta: requires a>0");
  if (!(omz > 0.0) || !(omz < 1.0)) {
    throw std::domain_error("comp_inc_beta: z must lie in (0,1)");
  }
  if (!(b > 0.0)) {
    // For b<=0 the integrand (1-u)^{b-1} is non-integrable on [z,1).
    throw std::domain_error(
        "comp_inc_beta: b<=0 makes the defining integral divergent");
  }
  return detail::comp_inc_beta_c_pref(a, b, omz, log_beta(a, b));
}

inline double comp_inc_beta(double a, double b, double z) {
  if (!(z > 0.0) || !(z < 1.0)) {
    throw std::domain_error("comp_inc_beta: z must lie in (0,1)");
  }
  return comp_inc_beta_c(a, b, 1.0 - z);
}

// One integer partition of m in multiplicity form: mult[a-1] = p_a with
// sum_a a*p_a = m. For m=0 the multiplicity vector is empty.
struct Partition {
  std::vector<int> mult;
};

// All partitions of m, iteratively, in a fixed (reverse-lexicographic by
// descending part lists) order: [m], [m-1,1], ..., [1,1,...,1].
inline std::vector<Partition> partitions(int m) {
  if (m < 0) throw std::domain_error("partitions: m must be >= 0");
  if (m > 64) throw std::domain_error("partitions: m exceeds the cap of 64");
  std::vector<Partition> out;
  if (m == 0) {
    out.push_back(Partition{});
    return out;
  }
  std::vector<int> parts{m};
  while (true) {
    Partition p;
    p.mult.assign(static_cast<std::size_t>(m), 0);
    for (int v : parts) ++p.mult[static_cast<std::size_t>(v - 1)];
    out.push_back(std::move(p));
    // Find the rightmost part > 1, decrement it, and redistribute the rest.
    int rem = 0;
    int i = static_cast<int>(parts.size()) - 1;
    while (i >= 0 && parts[i] == 1) {
      ++rem;
      --i;
    }
    if (i < 0) break;
    --parts[i];
    ++rem;
    parts.resize(static_cast<std::size_t>(i) + 1);
    const int cap = parts[static_cast<std::size_t>(i)];
    while (rem > 0) {
      const int take = rem < cap ? rem : cap;
      parts.push_back(take);
      rem -= take;
    }
  }
  return out;
}

// One ordered triple (q1,q2,q3) of nonnegative integers with q1+q2+q3 = n.
struct Composition3 {
  int q1 = 0, q2 = 0, q3 = 0;
};

inline std::vector<Composition3> compositions3(int n) {
  if (n < 0) throw std::domain_error("compositions3: n must be >= 0");
  if (n > 64) throw std::domain_error("compositions3: n exceeds the cap of 64");
  std::vector<Composition3> out;
  out.reserve(static_cast<std::size_t>((n + 1) * (n + 2) / 2));
  for (int q1 = 0; q1 <= n; ++q1) {
    for (int q2 = 0; q2 <= n - q1; ++q2) {
      out.push_back(Composition3{q1, q2, n - q1 - q2});
    }
  }
  return out;
}

inline double log_factorial(int n) {
  if (n < 0) throw std::domain_error("log_factorial: n must be >= 0");
  return std::lgamma(static_cast<double>(n) + 1.0);
}

inline double log_multinomial(int n, const std::vector<int>& parts) {
  int sum = 0;
  double logDen = 0.0;
  for (int p : parts) {
    if (p < 0) throw std::domain_error("log_multinomial: negative part");
    sum += p;
    logDen += log_factorial(p);
  }
  if (sum != n) {
    throw std::domain_error("log_multinomial: parts must sum to n");
  }
  return log_factorial(n) - logDen;
}

// Exact multinomial coefficient for n <= 20 (fits in 64 bits); computed in
// log-domain and rounded.
inline std::uint64_t multinomial(int n, const std::vector<int>& parts) {
  if (n > 20) {
    throw std::domain_error("multinomial: exact value requires n <= 20");
  }
  return static_cast<std::uint64_t>(
      std::llround(std::exp(log_multinomial(n, parts))));
}

}  // namespace hetin
