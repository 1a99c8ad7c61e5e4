#pragma once
// Adaptive Gauss-Kronrod quadrature (7-15 pair) on finite intervals, plus a
// helper for semi-infinite integrands that have been substituted into the
// exponential-decay normal form  integral_0^inf f(u) du  with f = O(e^-u).
//
// The adaptive driver keeps a worklist of segments and always refines the one
// with the largest error estimate, so the cost concentrates where the
// integrand actually varies.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hetin {

struct QuadResult {
  double value = 0.0;
  double errorEstimate = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

namespace detail {

// QUADPACK dqk15 nodes/weights on [-1,1]; xgk[2k+1] are the Gauss-7 nodes.
inline constexpr double kGK15Nodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kGK15WeightsK[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGauss7Weights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
inline void gk15(const F& f, double a, double b, double& valueK, double& err,
                 std::size_t& evals) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  const double fc = f(mid);
  double resultG = fc * kGauss7Weights[3];
  double resultK = fc * kGK15WeightsK[7];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kGK15Nodes[j];
    const double f1 = f(mid - dx);
    const double f2 = f(mid + dx);
    resultK += kGK15WeightsK[j] * (f1 + f2);
    if (j % 2 == 1) resultG += kGauss7Weights[j / 2] * (f1 + f2);
  }
  valueK = resultK * half;
  err = std::abs((resultK - resultG) * half);
  evals += 15;
}

struct Segment {
  double a, b, value, err;
};

}  // namespace detail

// Adaptive integration of f over [a,b] until the summed error estimate drops
// below max(absTol, relTol*|result|) or the segment budget runs out.
template <typename F>
QuadResult integrate(const F& f, double a, double b, double relTol,
                     double absTol = 0.0, std::size_t maxSegments = 4000) {
  QuadResult out;
  if (!(b > a)) {
    out.converged = true;
    return out;
  }
  std::vector<detail::Segment> segs;
  segs.reserve(64);
  detail::Segment s{a, b, 0.0, 0.0};
  detail::gk15(f, a, b, s.value, s.err, out.evaluations);
  segs.push_back(s);
  double total = s.value, totalErr = s.err;
  while (totalErr > std::max(absTol, relTol * std::abs(total)) &&
         segs.size() < maxSegments) {
    std::size_t worst = 0;
    for (std::size_t i = 1; i < segs.size(); ++i)
      if (segs[i].err > segs[worst].err) worst = i;
    detail::Segment seg = segs[worst];
    if (seg.b - seg.a <=
        std::numeric_limits<double>::epsilon() * std::abs(seg.b)) {
      break;  // cannot subdivide further
    }
    const double m = 0.5 * (seg.a + seg.b);
    detail::Segment left{seg.a, m, 0.0, 0.0}, right{m, seg.b, 0.0, 0.0};
    detail::gk15(f, left.a, left.b, left.value, left.err, out.evaluations);
    detail::gk15(f, right.a, right.b, right.value, right.err, out.evaluations);
    segs[worst] = left;
    segs.push_back(right);
    total = 0.0;
    totalErr = 0.0;
    for (const auto& sg : segs) {
      total += sg.value;
      totalErr += sg.err;
    }
  }
  out.value = total;
  out.errorEstimate = totalErr;
  out.converged = std::isfinite(total) && std::isfinite(totalErr) &&
                  (totalErr <= std::max(absTol, relTol * std::abs(total)) ||
                   totalErr <= 1e-300);
  return out;
}

// Integrate f over [0, inf) assuming f decays exponentially (the caller is
// responsible for substituting u = pi*lambda*z^2 or similar first). The
// truncation point starts at u=120 and doubles while the newest tail
// segment still contributes, so decay scales far from 1 are handled too.
template <typename F>
QuadResult integrate_exp_decay(const F& f, double relTol,
                               double absTol = 0.0) {
  // Seed segments on a roughly geometric grid so the adaptive pass starts
  // with the bulk of e^-u mass already separated from the far tail.
  static constexpr double knots[] = {0.0, 0.5, 1.0, 2.0,  4.0,  8.0,
                                     16.0, 32.0, 64.0, 120.0};
  QuadResult out;
  std::vector<detail::Segment> segs;
  for (std::size_t i = 0; i + 1 < sizeof(knots) / sizeof(knots[0]); ++i) {
    detail::Segment s{knots[i], knots[i + 1], 0.0, 0.0};
    detail::gk15(f, s.a, s.b, s.value, s.err, out.evaluations);
    segs.push_back(s);
  }
  double total = 0.0, totalErr = 0.0;
  for (const auto& sg : segs) {
    total += sg.value;
    totalErr += sg.err;
  }
  // Extend the truncation point while the last segment still matters; its
  // magnitude stays in the error estimate as a bound on the discarded tail
  // (for doubling windows of an exponentially decaying integrand the tail
  // is below the final segment's contribution).
  double truncErr = std::abs(segs.back().value);
  while (truncErr > 0.25 * std::max(absTol, relTol * std::abs(total)) &&
         segs.size() < 64) {
    detail::Segment t{segs.back().b, 2.0 * segs.back().b, 0.0, 0.0};
    detail::gk15(f, t.a, t.b, t.value, t.err, out.evaluations);
    segs.push_back(t);
    total += t.value;
    totalErr += t.err;
    truncErr = std::abs(t.value);
  }
  totalErr += truncErr;
  const std::size_t maxSegments = 4000;
  while (totalErr > std::max(absTol, relTol * std::abs(total)) &&
         segs.size() < maxSegments) {
    std::size_t worst = 0;
    for (std::size_t i = 1; i < segs.size(); ++i)
      if (segs[i].err > segs[worst].err) worst = i;
    detail::Segment seg = segs[worst];
    if (seg.b - seg.a <=
        std::numeric_limits<double>::epsilon() * std::abs(seg.b)) {
      break;
    }
    const double m = 0.5 * (seg.a + seg.b);
    detail::Segment left{seg.a, m, 0.0, 0.0}, right{m, seg.b, 0.0, 0.0};
    detail::gk15(f, left.a, left.b, left.value, left.err, out.evaluations);
    detail::gk15(f, right.a, right.b, right.value, right.err, out.evaluations);
    segs[worst] = left;
    segs.push_back(right);
    total = 0.0;
    totalErr = truncErr;
    for (const auto& sg : segs) {
      total += sg.value;
      totalErr += sg.err;
    }
  }
  out.value = total;
  out.errorEstimate = totalErr;
  out.converged = std::isfinite(total) && std::isfinite(totalErr) &&
                  (totalErr <= std::max(absTol, relTol * std::abs(total)) ||
                   totalErr <= 1e-300);
  return out;
}

// Throwing wrappers used where a silent inaccuracy would poison results.
template <typename F>
double integrate_or_throw(const F& f, double a, double b, double relTol,
                          const std::string& what, double absTol = 0.0) {
  QuadResult r = integrate(f, a, b, relTol, absTol);
  if (!r.converged) {
    throw std::runtime_error("quadrature failed to converge: " + what +
                             " (error estimate " +
                             std::to_string(r.errorEstimate) + ")");
  }
  return r.value;
}

template <typename F>
double integrate_exp_decay_or_throw(const F& f, double relTol,
                                    const std::string& what,
                                    double absTol = 0.0) {
  QuadResult r = integrate_exp_decay(f, relTol, absTol);
  if (!r.converged) {
    throw std::runtime_error("quadrature failed to converge: " + what +
                             " (error estimate " +
                             std::to_string(r.errorEstimate) + ")");
  }
  return r.value;
}

}  // namespace hetin
