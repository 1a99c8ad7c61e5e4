#pragma once
// Monte Carlo oracle: samples the full two-tier spatial model (PPP base
// stations and users, biased association, TDMA scheduling, uniform nulling
// selection) and estimates every quantity the analytic modules compute.
//
// Reproducibility contract: one master seed, per-drop substreams derived by
// counter-based splitting on the drop index, and order-deterministic
// reductions, so estimates do not depend on the number of worker threads.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hetin/coverage.hpp"
#include "hetin/params.hpp"

namespace hetin {

// ---------------------------------------------------------------------------
// RNG substreams.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

// Per-drop random stream: (seed, dropIndex) fully determines every draw.
class DropRng {
 public:
  DropRng(std::uint64_t seed, std::uint64_t dropIndex) {
    const std::uint64_t a = detail::splitmix64(seed);
    const std::uint64_t b =
        detail::splitmix64(a ^ (dropIndex + 0xD1B54A32D192ED03ull));
    const std::uint64_t c = detail::splitmix64(b ^ dropIndex);
    std::seed_seq seq{
        static_cast<std::uint32_t>(a),       static_cast<std::uint32_t>(a >> 32),
        static_cast<std::uint32_t>(b),       static_cast<std::uint32_t>(b >> 32),
        static_cast<std::uint32_t>(c),       static_cast<std::uint32_t>(c >> 32)};
    eng_.seed(seq);
  }

  // Uniform on the open interval (0,1): safe under log().
  double uniform() {
    return (static_cast<double>(eng_() >> 11) + 0.5) *
           (1.0 / 9007199254740992.0);
  }
  double expo() { return -std::log(uniform()); }
  // Integer-shape Gamma(k,1) as a sum of exponentials: a fixed draw count
  // keeps the stream layout deterministic.
  double gamma_int(int k) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += expo();
    return s;
  }
  // Standard normal via Box-Muller on our own uniforms (the library normal
  // distribution's draw pattern is implementation-defined).
  double normal() {
    if (haveSpare_) {
      haveSpare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double t = 2.0 * M_PI * uniform();
    spare_ = r * std::sin(t);
    haveSpare_ = true;
    return r * std::cos(t);
  }
  long long poisson(double mean) {
    std::poisson_distribution<long long> d(mean);
    return d(eng_);
  }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) %
           n;
  }

 private:
  std::mt19937_64 eng_;
  bool haveSpare_ = false;
  double spare_ = 0.0;
};

struct Vec2 {
  double x = 0.0, y = 0.0;
};

namespace detail {

inline double dist(const Vec2& a, const Vec2& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

inline Vec2 uniform_in_disc(DropRng& rng, double radius) {
  const double r = radius * std::sqrt(rng.uniform());
  const double t = 2.0 * M_PI * rng.uniform();
  return {r * std::cos(t), r * std::sin(t)};
}

// Uniform-cell nearest-neighbour index over a fixed point set in the
// window disc.
class NNGrid {
 public:
  NNGrid(const std::vector<Vec2>& pts, double windowRadius)
      : pts_(pts), r_(windowRadius) {
    const double target =
        std::sqrt(M_PI * r_ * r_ /
                  std::max<std::size_t>(std::size_t{1}, pts.size()));
    cell_ = std::max(target, r_ / 128.0);
    n_ = std::max(1, static_cast<int>(std::ceil(2.0 * r_ / cell_)));
    cells_.assign(static_cast<std::size_t>(n_) * n_, {});
    for (std::size_t i = 0; i < pts.size(); ++i) {
      cells_[cell_index(pts[i])].push_back(static_cast<std::int32_t>(i));
    }
  }

  // Index of the nearest point and its distance; -1 on an empty set.
  std::int32_t nearest(const Vec2& p, double* outDist) const {
    const int ci = coord(p.x), cj = coord(p.y);
    std::int32_t best = -1;
    double bestD = std::numeric_limits<double>::infinity();
    for (int ring = 0; ring < 2 * n_; ++ring) {
      if (best >= 0 && (ring - 1) * cell_ > bestD) break;
      const int lo = -ring, hi = ring;
      bool anyCell = false;
      for (int di = lo; di <= hi; ++di) {
        for (int dj = lo; dj <= hi; ++dj) {
          if (std::max(std::abs(di), std::abs(dj)) != ring) continue;
          const int i = ci + di, j = cj + dj;
          if (i < 0 || i >= n_ || j < 0 || j >= n_) continue;
          anyCell = true;
          for (std::int32_t k :
               cells_[static_cast<std::size_t>(i) * n_ + j]) {
            const double d = dist(p, pts_[static_cast<std::size_t>(k)]);
            if (d < bestD) {
              bestD = d;
              best = k;
            }
          }
        }
      }
      if (!anyCell && best >= 0) break;
    }
    if (outDist != nullptr) *outDist = bestD;
    return best;
  }

 private:
  int coord(double v) const {
    const int c = static_cast<int>((v + r_) / cell_);
    return std::min(std::max(c, 0), n_ - 1);
  }
  std::size_t cell_index(const Vec2& p) const {
    return static_cast<std::size_t>(coord(p.x)) * n_ + coord(p.y);
  }

  const std::vector<Vec2>& pts_;
  double r_ = 0.0, cell_ = 1.0;
  int n_ = 1;
  std::vector<std::vector<std::int32_t>> cells_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Realization sampling.

// User-class codes shared by the realization and the estimators.
enum : std::int8_t {
  kMcMacro = 0,
  kMcPicoPlain = 1,
  kMcOffloaded = 2,
};

// One spatial snapshot. The typical user sits at the origin and is kept out
// of the `users` list; scheduling marks it with index -2.
struct NetworkRealization {
  double windowRadius = 0.0;
  int resamples = 0;    // empty-tier rejections before this draw succeeded
  bool withUsers = false;
  std::vector<Vec2> macroBSs, picoBSs, users;

  // Per-user association (parallel to users).
  std::vector<std::int8_t> userClass;          // kMc* codes
  std::vector<std::int32_t> userServing;       // index in the serving tier
  std::vector<std::int32_t> userNearestMacro;  // offloaded users; else -1

  // Per-BS bookkeeping. Loads include the typical user.
  std::vector<std::int32_t> macroLoad, picoLoad;
  std::vector<std::int32_t> picoLoadPlain, picoLoadOff;
  std::vector<std::int32_t> macroSched, picoSched;  // user idx, -1 idle, -2 typical
  std::vector<std::vector<std::int32_t>> macroActiveOff;  // active offloaded
  std::vector<std::vector<std::int32_t>> inAssignments;   // nulled subset

  // Typical user.
  double z1 = 0.0, z2 = 0.0;  // nearest macro / pico distances
  std::int32_t typNearestMacro = -1, typNearestPico = -1;
  std::int8_t typClass = kMcMacro;
  std::int32_t typServing = -1;
  bool typNulled = false;
  std::int32_t typLoad = 1;                      // serving-BS load
  std::int32_t typLoadPlain = 1, typLoadOff = 1; // pico class-split loads
};

// Samples one drop. `inDof` is the nulling budget U (0 = plain offloading;
// also use 0 for the resource-partitioning baseline, which nulls nobody).
inline void sample_realization_into(NetworkRealization& r,
                                    const SystemParams& sys, int inDof,
                                    double windowRadius, std::uint64_t seed,
                                    std::uint64_t dropIndex, bool withUsers,
                                    DropRng* contRng = nullptr) {
  if (!(windowRadius > 0.0)) {
    throw std::domain_error("sample_realization: window radius must be > 0");
  }
  if (inDof < 0 || inDof > sys.n1 - 1) {
    throw std::domain_error("sample_realization: nulling DoF out of range");
  }
  DropRng local(seed, dropIndex);
  DropRng& rng = contRng != nullptr ? *contRng : local;

  r.windowRadius = windowRadius;
  r.withUsers = withUsers;
  r.resamples = 0;
  const double area = M_PI * windowRadius * windowRadius;

  // Base stations; an empty tier would leave the typical user unservable in
  // that tier, so the whole realization is redrawn (counted).
  while (true) {
    const long long n1 = rng.poisson(sys.lambda1 * area);
    const long long n2 = rng.poisson(sys.lambda2 * area);
    if (n1 > 0 && n2 > 0) {
      r.macroBSs.clear();
      r.picoBSs.clear();
      r.macroBSs.reserve(static_cast<std::size_t>(n1));
      r.picoBSs.reserve(static_cast<std::size_t>(n2));
      for (long long i = 0; i < n1; ++i) {
        r.macroBSs.push_back(detail::uniform_in_disc(rng, windowRadius));
      }
      for (long long i = 0; i < n2; ++i) {
        r.picoBSs.push_back(detail::uniform_in_disc(rng, windowRadius));
      }
      break;
    }
    ++r.resamples;
  }

  detail::NNGrid macroGrid(r.macroBSs, windowRadius);
  detail::NNGrid picoGrid(r.picoBSs, windowRadius);

  // Typical user at the origin (Slivnyak: the palm distribution adds a
  // point without disturbing the processes).
  const Vec2 origin{0.0, 0.0};
  r.typNearestMacro = macroGrid.nearest(origin, &r.z1);
  r.typNearestPico = picoGrid.nearest(origin, &r.z2);
  const double macroPow = sys.p1 * std::pow(r.z1, -sys.alpha1);
  const double picoPow = sys.p2 * std::pow(r.z2, -sys.alpha2);
  if (macroPow >= sys.biasB * picoPow) {
    r.typClass = kMcMacro;
    r.typServing = r.typNearestMacro;
  } else {
    r.typClass = macroPow > picoPow ? kMcOffloaded : kMcPicoPlain;
    r.typServing = r.typNearestPico;
  }

  // Users.
  r.users.clear();
  r.userClass.clear();
  r.userServing.clear();
  r.userNearestMacro.clear();
  if (withUsers) {
    const long long nu = rng.poisson(sys.lambdaU * area);
    r.users.reserve(static_cast<std::size_t>(nu));
    for (long long i = 0; i < nu; ++i) {
      r.users.push_back(detail::uniform_in_disc(rng, windowRadius));
    }
    r.userClass.resize(r.users.size());
    r.userServing.resize(r.users.size());
    r.userNearestMacro.assign(r.users.size(), -1);
  }

  r.macroLoad.assign(r.macroBSs.size(), 0);
  r.picoLoad.assign(r.picoBSs.size(), 0);
  r.picoLoadPlain.assign(r.picoBSs.size(), 0);
  r.picoLoadOff.assign(r.picoBSs.size(), 0);

  // Per-BS associated-user lists, then association of every user.
  std::vector<std::vector<std::int32_t>> macroUsers(r.macroBSs.size());
  std::vector<std::vector<std::int32_t>> picoUsers(r.picoBSs.size());
  for (std::size_t i = 0; i < r.users.size(); ++i) {
    double d1 = 0.0, d2 = 0.0;
    const std::int32_t m = macroGrid.nearest(r.users[i], &d1);
    const std::int32_t p = picoGrid.nearest(r.users[i], &d2);
    const double pm = sys.p1 * std::pow(d1, -sys.alpha1);
    const double pp = sys.p2 * std::pow(d2, -sys.alpha2);
    const std::int32_t ii = static_cast<std::int32_t>(i);
    if (pm >= sys.biasB * pp) {
      r.userClass[i] = kMcMacro;
      r.userServing[i] = m;
      macroUsers[static_cast<std::size_t>(m)].push_back(ii);
      ++r.macroLoad[static_cast<std::size_t>(m)];
    } else {
      r.userClass[i] = pm > pp ? kMcOffloaded : kMcPicoPlain;
      r.userServing[i] = p;
      picoUsers[static_cast<std::size_t>(p)].push_back(ii);
      ++r.picoLoad[static_cast<std::size_t>(p)];
      if (r.userClass[i] == kMcOffloaded) {
        r.userNearestMacro[i] = m;
        ++r.picoLoadOff[static_cast<std::size_t>(p)];
      } else {
        ++r.picoLoadPlain[static_cast<std::size_t>(p)];
      }
    }
  }

  // Count the typical user into its serving BS's load.
  if (r.typClass == kMcMacro) {
    ++r.macroLoad[static_cast<std::size_t>(r.typServing)];
  } else {
    ++r.picoLoad[static_cast<std::size_t>(r.typServing)];
    if (r.typClass == kMcOffloaded) {
      ++r.picoLoadOff[static_cast<std::size_t>(r.typServing)];
    } else {
      ++r.picoLoadPlain[static_cast<std::size_t>(r.typServing)];
    }
  }
  r.typLoad = r.typClass == kMcMacro
                  ? r.macroLoad[static_cast<std::size_t>(r.typServing)]
                  : r.picoLoad[static_cast<std::size_t>(r.typServing)];
  r.typLoadPlain = r.typClass != kMcMacro
                       ? r.picoLoadPlain[static_cast<std::size_t>(r.typServing)]
                       : 1;
  r.typLoadOff = r.typClass != kMcMacro
                     ? r.picoLoadOff[static_cast<std::size_t>(r.typServing)]
                     : 1;

  // TDMA snapshot: each BS schedules one associated user uniformly; the
  // typical user's serving BS schedules the typical user by convention.
  const auto schedule = [&](const std::vector<std::int32_t>& assoc) {
    if (assoc.empty()) return std::int32_t{-1};
    if (assoc.size() == 1) return assoc.front();
    return assoc[static_cast<std::size_t>(rng.below(assoc.size()))];
  };
  r.macroSched.assign(r.macroBSs.size(), -1);
  r.picoSched.assign(r.picoBSs.size(), -1);
  for (std::size_t b = 0; b < r.macroBSs.size(); ++b) {
    if (r.typClass == kMcMacro &&
        r.typServing == static_cast<std::int32_t>(b)) {
      r.macroSched[b] = -2;
    } else {
      r.macroSched[b] = schedule(macroUsers[b]);
    }
  }
  for (std::size_t b = 0; b < r.picoBSs.size(); ++b) {
    if (r.typClass != kMcMacro &&
        r.typServing == static_cast<std::int32_t>(b)) {
      r.picoSched[b] = -2;
    } else {
      r.picoSched[b] = schedule(picoUsers[b]);
    }
  }

  // Active offloaded users per macro: offloaded users actually scheduled by
  // their serving pico (the offloaded typical user is scheduled by
  // convention, entered as -2).
  r.macroActiveOff.assign(r.macroBSs.size(), {});
  for (std::size_t b = 0; b < r.picoBSs.size(); ++b) {
    const std::int32_t u = r.picoSched[b];
    if (u < 0) continue;
    if (r.userClass[static_cast<std::size_t>(u)] == kMcOffloaded) {
      r.macroActiveOff[static_cast<std::size_t>(
                           r.userNearestMacro[static_cast<std::size_t>(u)])]
          .push_back(u);
    }
  }
  if (r.typClass == kMcOffloaded) {
    r.macroActiveOff[static_cast<std::size_t>(r.typNearestMacro)].push_back(
        -2);
  }

  // Uniform nulling selection: each macro picks min(U, active) of its
  // active offloaded users (partial Fisher-Yates, macro index order).
  r.inAssignments.assign(r.macroBSs.size(), {});
  r.typNulled = false;
  for (std::size_t b = 0; b < r.macroBSs.size(); ++b) {
    auto cand = r.macroActiveOff[b];
    const std::size_t k =
        std::min<std::size_t>(static_cast<std::size_t>(inDof), cand.size());
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(rng.below(cand.size() - i));
      std::swap(cand[i], cand[j]);
    }
    cand.resize(k);
    for (std::int32_t u : cand) {
      if (u == -2) r.typNulled = true;
    }
    r.inAssignments[b] = std::move(cand);
  }
}

inline NetworkRealization sample_realization(const SystemParams& sys,
                                             int inDof, double windowRadius,
                                             std::uint64_t seed,
                                             std::uint64_t dropIndex,
                                             bool withUsers = true) {
  NetworkRealization r;
  sample_realization_into(r, sys, inDof, windowRadius, seed, dropIndex,
                          withUsers);
  return r;
}

// ---------------------------------------------------------------------------
// Binary realization dump (debugging aid). Little-endian, versioned.

namespace detail {

constexpr std::uint32_t kRealizationMagic = 0x5A524E48u;  // "HNRZ"
constexpr std::uint16_t kRealizationVersion = 1;

inline void require_little_endian() {
  if constexpr (std::endian::native != std::endian::little) {
    throw std::runtime_error(
        "realization dump: only little-endian hosts are supported");
  }
}

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void put_vec(std::ofstream& out, const std::vector<T>& v) {
  put(out, static_cast<std::uint64_t>(v.size()));
  if (!v.empty()) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(T)));
  }
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("realization load: truncated file");
  return v;
}

template <typename T>
std::vector<T> get_vec(std::ifstream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1ull << 32)) {
    throw std::runtime_error("realization load: implausible array length");
  }
  std::vector<T> v(static_cast<std::size_t>(n));
  if (n > 0) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
    if (!in) throw std::runtime_error("realization load: truncated file");
  }
  return v;
}

inline void put_nested(std::ofstream& out,
                       const std::vector<std::vector<std::int32_t>>& v) {
  put(out, static_cast<std::uint64_t>(v.size()));
  for (const auto& inner : v) put_vec(out, inner);
}

inline std::vector<std::vector<std::int32_t>> get_nested(std::ifstream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1ull << 32)) {
    throw std::runtime_error("realization load: implausible array length");
  }
  std::vector<std::vector<std::int32_t>> v(static_cast<std::size_t>(n));
  for (auto& inner : v) inner = get_vec<std::int32_t>(in);
  return v;
}

}  // namespace detail

// File layout: magic u32, version u16, flags u16 (bit 0 = withUsers), then
// windowRadius/z1/z2 as doubles, the scalar typical-user block, and each
// array as u64 count + packed little-endian elements.
inline void dump_realization(const NetworkRealization& r,
                             const std::string& path) {
  detail::require_little_endian();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("dump_realization: cannot open " + path);
  detail::put(out, detail::kRealizationMagic);
  detail::put(out, detail::kRealizationVersion);
  detail::put(out, static_cast<std::uint16_t>(r.withUsers ? 1 : 0));
  detail::put(out, r.windowRadius);
  detail::put(out, static_cast<std::int32_t>(r.resamples));
  detail::put(out, r.z1);
  detail::put(out, r.z2);
  detail::put(out, r.typNearestMacro);
  detail::put(out, r.typNearestPico);
  detail::put(out, static_cast<std::int8_t>(r.typClass));
  detail::put(out, static_cast<std::int8_t>(r.typNulled ? 1 : 0));
  detail::put(out, r.typServing);
  detail::put(out, r.typLoad);
  detail::put(out, r.typLoadPlain);
  detail::put(out, r.typLoadOff);
  detail::put_vec(out, r.macroBSs);
  detail::put_vec(out, r.picoBSs);
  detail::put_vec(out, r.users);
  detail::put_vec(out, r.userClass);
  detail::put_vec(out, r.userServing);
  detail::put_vec(out, r.userNearestMacro);
  detail::put_vec(out, r.macroLoad);
  detail::put_vec(out, r.picoLoad);
  detail::put_vec(out, r.picoLoadPlain);
  detail::put_vec(out, r.picoLoadOff);
  detail::put_vec(out, r.macroSched);
  detail::put_vec(out, r.picoSched);
  detail::put_nested(out, r.macroActiveOff);
  detail::put_nested(out, r.inAssignments);
  if (!out) throw std::runtime_error("dump_realization: write failed");
}

inline NetworkRealization load_realization(const std::string& path) {
  detail::require_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_realization: cannot open " + path);
  if (detail::get<std::uint32_t>(in) != detail::kRealizationMagic) {
    throw std::runtime_error("load_realization: bad magic");
  }
  if (detail::get<std::uint16_t>(in) != detail::kRealizationVersion) {
    throw std::runtime_error("load_realization: unsupported version");
  }
  const auto flags = detail::get<std::uint16_t>(in);
  NetworkRealization r;
  r.withUsers = (flags & 1u) != 0;
  r.windowRadius = detail::get<double>(in);
  r.resamples = detail::get<std::int32_t>(in);
  r.z1 = detail::get<double>(in);
  r.z2 = detail::get<double>(in);
  r.typNearestMacro = detail::get<std::int32_t>(in);
  r.typNearestPico = detail::get<std::int32_t>(in);
  r.typClass = detail::get<std::int8_t>(in);
  r.typNulled = detail::get<std::int8_t>(in) != 0;
  r.typServing = detail::get<std::int32_t>(in);
  r.typLoad = detail::get<std::int32_t>(in);
  r.typLoadPlain = detail::get<std::int32_t>(in);
  r.typLoadOff = detail::get<std::int32_t>(in);
  r.macroBSs = detail::get_vec<Vec2>(in);
  r.picoBSs = detail::get_vec<Vec2>(in);
  r.users = detail::get_vec<Vec2>(in);
  r.userClass = detail::get_vec<std::int8_t>(in);
  r.userServing = detail::get_vec<std::int32_t>(in);
  r.userNearestMacro = detail::get_vec<std::int32_t>(in);
  r.macroLoad = detail::get_vec<std::int32_t>(in);
  r.picoLoad = detail::get_vec<std::int32_t>(in);
  r.picoLoadPlain = detail::get_vec<std::int32_t>(in);
  r.picoLoadOff = detail::get_vec<std::int32_t>(in);
  r.macroSched = detail::get_vec<std::int32_t>(in);
  r.picoSched = detail::get_vec<std::int32_t>(in);
  r.macroActiveOff = detail::get_nested(in);
  r.inAssignments = detail::get_nested(in);
  return r;
}

// ---------------------------------------------------------------------------
// Estimation plumbing.

struct McEstimate {
  double value = 0.0;
  double ci = 0.0;  // 95% half-width
  long long n = 0;  // samples behind the estimate
};

namespace detail {

inline McEstimate binomial_estimate(long long hits, long long n) {
  McEstimate e;
  e.n = n;
  if (n <= 0) return e;
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  e.value = p;
  e.ci = 1.96 * std::sqrt(std::max(0.0, p * (1.0 - p)) /
                          static_cast<double>(n));
  return e;
}

// Runs perDrop(dropIndex) for every drop, split across worker threads in
// contiguous blocks. perDrop must only write to per-drop slots, so results
// are identical for any thread count.
template <typename Fn>
void run_drops(long long drops, const Fn& perDrop, int threads = 0) {
  if (threads <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    threads = hw == 0 ? 1 : static_cast<int>(hw);
  }
  threads = static_cast<int>(
      std::min<long long>(threads, std::max<long long>(1, drops)));
  if (threads == 1) {
    for (long long i = 0; i < drops; ++i) perDrop(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(static_cast<std::size_t>(threads));
  const long long chunk = (drops + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const long long lo = t * chunk;
    const long long hi = std::min(drops, lo + chunk);
    pool.emplace_back([&, lo, hi, t] {
      try {
        for (long long i = lo; i < hi; ++i) perDrop(i);
      } catch (...) {
        errs[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errs) {
    if (e) std::rethrow_exception(e);
  }
}

// SIR of the typical user in one realization under the nulling scheme (or
// plain offloading at inDof = 0). Draw order is fixed: macros by index,
// then picos by index.
inline double typical_sir_in(const NetworkRealization& r,
                             const SystemParams& sys, DropRng& rng,
                             std::int8_t* outClass) {
  const Vec2 origin{0.0, 0.0};
  double interference = 0.0;
  double signal = 0.0;
  std::int8_t cls = r.typClass;
  if (r.typClass == kMcMacro) {
    const std::size_t serving = static_cast<std::size_t>(r.typServing);
    const int dofUsed =
        static_cast<int>(r.inAssignments[serving].size());
    signal = sys.p1 * rng.gamma_int(sys.n1 - dofUsed) *
             std::pow(r.z1, -sys.alpha1);
    for (std::size_t b = 0; b < r.macroBSs.size(); ++b) {
      if (b == serving) continue;
      interference += sys.p1 * rng.expo() *
                      std::pow(dist(origin, r.macroBSs[b]), -sys.alpha1);
    }
    for (std::size_t b = 0; b < r.picoBSs.size(); ++b) {
      interference += sys.p2 * rng.expo() *
                      std::pow(dist(origin, r.picoBSs[b]), -sys.alpha2);
    }
  } else {
    const std::size_t serving = static_cast<std::size_t>(r.typServing);
    signal =
        sys.p2 * rng.gamma_int(sys.n2) * std::pow(r.z2, -sys.alpha2);
    const bool nulledTyp = r.typClass == kMcOffloaded && r.typNulled;
    for (std::size_t b = 0; b < r.macroBSs.size(); ++b) {
      if (nulledTyp &&
          static_cast<std::int32_t>(b) == r.typNearestMacro) {
        continue;  // the nulling macro contributes nothing
      }
      interference += sys.p1 * rng.expo() *
                      std::pow(dist(origin, r.macroBSs[b]), -sys.alpha1);
    }
    for (std::size_t b = 0; b < r.picoBSs.size(); ++b) {
      if (b == serving) continue;
      interference += sys.p2 * rng.expo() *
                      std::pow(dist(origin, r.picoBSs[b]), -sys.alpha2);
    }
  }
  if (outClass != nullptr) *outClass = cls;
  return signal / interference;
}

// ABS subframe SIR: macro-transmitting subframe for macro and plain-pico
// users, protected subframe (macro tier silent) for offloaded users.
inline double typical_sir_abs(const NetworkRealization& r,
                              const SystemParams& sys, DropRng& rng) {
  const Vec2 origin{0.0, 0.0};
  double interference = 0.0;
  double signal = 0.0;
  if (r.typClass == kMcMacro) {
    const std::size_t serving = static_cast<std::size_t>(r.typServing);
    signal =
        sys.p1 * rng.gamma_int(sys.n1) * std::pow(r.z1, -sys.alpha1);
    for (std::size_t b = 0; b < r.macroBSs.size(); ++b) {
      if (b == serving) continue;
      interference += sys.p1 * rng.expo() *
                      std::pow(dist(origin, r.macroBSs[b]), -sys.alpha1);
    }
    for (std::size_t b = 0; b < r.picoBSs.size(); ++b) {
      interference += sys.p2 * rng.expo() *
                      std::pow(dist(origin, r.picoBSs[b]), -sys.alpha2);
    }
  } else {
    const std::size_t serving = static_cast<std::size_t>(r.typServing);
    signal =
        sys.p2 * rng.gamma_int(sys.n2) * std::pow(r.z2, -sys.alpha2);
    const bool protectedSubframe = r.typClass == kMcOffloaded;
    if (!protectedSubframe) {
      for (std::size_t b = 0; b < r.macroBSs.size(); ++b) {
        interference += sys.p1 * rng.expo() *
                        std::pow(dist(origin, r.macroBSs[b]), -sys.alpha1);
      }
    }
    for (std::size_t b = 0; b < r.picoBSs.size(); ++b) {
      if (b == serving) continue;
      interference += sys.p2 * rng.expo() *
                      std::pow(dist(origin, r.picoBSs[b]), -sys.alpha2);
    }
  }
  return signal / interference;
}

// Maps a realization + nulling flag to the reporting class.
inline UserClass report_class(std::int8_t mcClass, bool nulled) {
  if (mcClass == kMcMacro) return UserClass::Macro;
  if (mcClass == kMcPicoPlain) return UserClass::PicoUnoffloaded;
  return nulled ? UserClass::OffloadNulled : UserClass::OffloadExposed;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SIR coverage estimation.

struct SirCoverageEstimate {
  double beta = 0.0;
  McEstimate overall;
  std::map<UserClass, McEstimate> perClass;
  long long resamples = 0;
};

// One pass over `drops` realizations; the per-drop SIR is thresholded
// against every entry of betaGrid.
inline std::vector<SirCoverageEstimate> estimate_sir_coverage_grid(
    const SystemParams& sys, int inDof, const std::vector<double>& betaGrid,
    long long drops, std::uint64_t seed, const NumericsParams& num,
    int threads = 0) {
  if (drops < 1) {
    throw std::domain_error("estimate_sir_coverage: drops must be >= 1");
  }
  const double radius = resolved_window_radius(sys, num);
  std::vector<double> sir(static_cast<std::size_t>(drops));
  std::vector<std::int8_t> cls(static_cast<std::size_t>(drops));
  std::vector<std::int8_t> nulled(static_cast<std::size_t>(drops));
  std::vector<std::int32_t> resamples(static_cast<std::size_t>(drops));
  detail::run_drops(
      drops,
      [&](long long i) {
        thread_local NetworkRealization r;
        DropRng rng(seed, static_cast<std::uint64_t>(i));
        sample_realization_into(r, sys, inDof, radius, seed,
                                static_cast<std::uint64_t>(i), true, &rng);
        std::int8_t c = 0;
        sir[static_cast<std::size_t>(i)] =
            detail::typical_sir_in(r, sys, rng, &c);
        cls[static_cast<std::size_t>(i)] = c;
        nulled[static_cast<std::size_t>(i)] =
            static_cast<std::int8_t>(r.typNulled ? 1 : 0);
        resamples[static_cast<std::size_t>(i)] = r.resamples;
      },
      threads);
  long long totalResamples = 0;
  for (auto v : resamples) totalResamples += v;

  std::vector<SirCoverageEstimate> out;
  out.reserve(betaGrid.size());
  for (double beta : betaGrid) {
    SirCoverageEstimate e;
    e.beta = beta;
    e.resamples = totalResamples;
    std::map<UserClass, std::pair<long long, long long>> tally;
    long long hits = 0;
    for (long long i = 0; i < drops; ++i) {
      const std::size_t ii = static_cast<std::size_t>(i);
      const bool hit = sir[ii] > beta;
      hits += hit ? 1 : 0;
      const UserClass k = detail::report_class(cls[ii], nulled[ii] != 0);
      auto& t = tally[k];
      ++t.second;
      t.first += hit ? 1 : 0;
      // Aggregate offloaded class.
      if (k == UserClass::OffloadNulled || k == UserClass::OffloadExposed) {
        auto& agg = tally[UserClass::Offloaded];
        ++agg.second;
        agg.first += hit ? 1 : 0;
      }
    }
    e.overall = detail::binomial_estimate(hits, drops);
    for (const auto& [k, t] : tally) {
      e.perClass[k] = detail::binomial_estimate(t.first, t.second);
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline SirCoverageEstimate estimate_sir_coverage(
    const SystemParams& sys, int inDof, double beta, long long drops,
    std::uint64_t seed, const NumericsParams& num, int threads = 0) {
  return estimate_sir_coverage_grid(sys, inDof, {beta}, drops, seed, num,
                                    threads)
      .front();
}

// ---------------------------------------------------------------------------
// Rate coverage estimation.

struct RateCoverageEstimate {
  double tau = 0.0;
  McEstimate overall;
  std::map<UserClass, McEstimate> perClass;
  long long resamples = 0;
};

// One pass over `drops` realizations; the per-drop rate is thresholded
// against every entry of tauGrid. The scheme (nulling DoF or subframe
// share) comes from sch.
inline std::vector<RateCoverageEstimate> estimate_rate_coverage_grid(
    const SystemParams& sys, const SchemeParams& sch,
    const std::vector<double>& tauGrid, long long drops, std::uint64_t seed,
    const NumericsParams& num, int threads = 0) {
  if (drops < 1) {
    throw std::domain_error("estimate_rate_coverage: drops must be >= 1");
  }
  const bool abs = sch.scheme == Scheme::ABS;
  const int inDof = sch.scheme == Scheme::IN ? sch.inDof : 0;
  if (abs && (!(sch.absEta > 0.0) || !(sch.absEta < 1.0))) {
    throw std::domain_error("estimate_rate_coverage: ABS share in (0,1)");
  }
  const double radius = resolved_window_radius(sys, num);
  std::vector<double> rate(static_cast<std::size_t>(drops));
  std::vector<std::int8_t> cls(static_cast<std::size_t>(drops));
  std::vector<std::int8_t> nulled(static_cast<std::size_t>(drops));
  std::vector<std::int32_t> resamples(static_cast<std::size_t>(drops));
  detail::run_drops(
      drops,
      [&](long long i) {
        thread_local NetworkRealization r;
        DropRng rng(seed, static_cast<std::uint64_t>(i));
        sample_realization_into(r, sys, inDof, radius, seed,
                                static_cast<std::uint64_t>(i), true, &rng);
        const std::size_t ii = static_cast<std::size_t>(i);
        resamples[ii] = r.resamples;
        if (abs) {
          const double sir = detail::typical_sir_abs(r, sys, rng);
          cls[ii] = r.typClass;
          nulled[ii] = 0;
          double share = 0.0, load = 1.0;
          if (r.typClass == kMcMacro) {
            share = 1.0 - sch.absEta;
            load = r.typLoad;
          } else if (r.typClass == kMcPicoPlain) {
            share = 1.0 - sch.absEta;
            load = r.typLoadPlain;
          } else {
            share = sch.absEta;
            load = r.typLoadOff;
          }
          rate[ii] = share * sys.bandwidthW / load * std::log2(1.0 + sir);
        } else {
          std::int8_t c = 0;
          const double sir = detail::typical_sir_in(r, sys, rng, &c);
          cls[ii] = c;
          nulled[ii] = static_cast<std::int8_t>(r.typNulled ? 1 : 0);
          rate[ii] =
              sys.bandwidthW / static_cast<double>(r.typLoad) *
              std::log2(1.0 + sir);
        }
      },
      threads);
  long long totalResamples = 0;
  for (auto v : resamples) totalResamples += v;

  std::vector<RateCoverageEstimate> out;
  out.reserve(tauGrid.size());
  for (double tau : tauGrid) {
    RateCoverageEstimate e;
    e.tau = tau;
    e.resamples = totalResamples;
    std::map<UserClass, std::pair<long long, long long>> tally;
    long long hits = 0;
    for (long long i = 0; i < drops; ++i) {
      const std::size_t ii = static_cast<std::size_t>(i);
      const bool hit = rate[ii] > tau;
      hits += hit ? 1 : 0;
      UserClass k;
      if (abs) {
        k = cls[ii] == kMcMacro
                ? UserClass::Macro
                : (cls[ii] == kMcPicoPlain ? UserClass::PicoUnoffloaded
                                           : UserClass::Offloaded);
      } else {
        k = detail::report_class(cls[ii], nulled[ii] != 0);
      }
      auto& t = tally[k];
      ++t.second;
      t.first += hit ? 1 : 0;
      if (k == UserClass::OffloadNulled || k == UserClass::OffloadExposed) {
        auto& agg = tally[UserClass::Offloaded];
        ++agg.second;
        agg.first += hit ? 1 : 0;
      }
    }
    e.overall = detail::binomial_estimate(hits, drops);
    for (const auto& [k, t] : tally) {
      e.perClass[k] = detail::binomial_estimate(t.first, t.second);
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline RateCoverageEstimate estimate_rate_coverage(
    const SystemParams& sys, const SchemeParams& sch, long long drops,
    std::uint64_t seed, const NumericsParams& num, int threads = 0) {
  return estimate_rate_coverage_grid(sys, sch, {sch.rateThresholdTau}, drops,
                                     seed, num, threads)
      .front();
}

// ---------------------------------------------------------------------------
// Association-fraction estimation (no users needed).

struct AssociationEstimate {
  McEstimate macro, picoPlain, offloaded;
  long long resamples = 0;
};

inline AssociationEstimate estimate_association_fractions(
    const SystemParams& sys, long long drops, std::uint64_t seed,
    const NumericsParams& num, int threads = 0) {
  if (drops < 1) {
    throw std::domain_error(
        "estimate_association_fractions: drops must be >= 1");
  }
  const double radius = resolved_window_radius(sys, num);
  std::vector<std::int8_t> cls(static_cast<std::size_t>(drops));
  std::vector<std::int32_t> resamples(static_cast<std::size_t>(drops));
  detail::run_drops(
      drops,
      [&](long long i) {
        thread_local NetworkRealization r;
        sample_realization_into(r, sys, 0, radius, seed,
                                static_cast<std::uint64_t>(i), false);
        cls[static_cast<std::size_t>(i)] = r.typClass;
        resamples[static_cast<std::size_t>(i)] = r.resamples;
      },
      threads);
  long long nm = 0, np = 0, no = 0, rs = 0;
  for (long long i = 0; i < drops; ++i) {
    const std::int8_t c = cls[static_cast<std::size_t>(i)];
    nm += c == kMcMacro ? 1 : 0;
    np += c == kMcPicoPlain ? 1 : 0;
    no += c == kMcOffloaded ? 1 : 0;
    rs += resamples[static_cast<std::size_t>(i)];
  }
  AssociationEstimate e;
  e.macro = detail::binomial_estimate(nm, drops);
  e.picoPlain = detail::binomial_estimate(np, drops);
  e.offloaded = detail::binomial_estimate(no, drops);
  e.resamples = rs;
  return e;
}

// ---------------------------------------------------------------------------
// Offloaded-count p.m.f. and nulling-probability estimation.

struct OffloadPmfEstimate {
  // Active offloaded users of the serving macro, typical user macro-served.
  std::vector<McEstimate> pmfActive;  // index = count n
  long long macroConditioned = 0;
  bool insufficientMacro = false;
  // Active offloaded users (typical included) at the nearest macro, typical
  // user offloaded; index = count n (entry 0 is structurally empty).
  std::vector<McEstimate> pmfActiveNearest;
  long long offloadConditioned = 0;
  bool insufficientOffload = false;
  McEstimate inProbability;  // Pr(selected | offloaded)
  long long resamples = 0;
};

inline OffloadPmfEstimate estimate_offload_pmfs(
    const SystemParams& sys, int inDof, long long drops, std::uint64_t seed,
    const NumericsParams& num, int threads = 0) {
  if (drops < 1) {
    throw std::domain_error("estimate_offload_pmfs: drops must be >= 1");
  }
  const double radius = resolved_window_radius(sys, num);
  // Per-drop records: -1 when the conditioning class did not occur.
  std::vector<std::int32_t> activeCnt(static_cast<std::size_t>(drops), -1);
  std::vector<std::int32_t> nearestCnt(static_cast<std::size_t>(drops), -1);
  std::vector<std::int8_t> selected(static_cast<std::size_t>(drops), 0);
  std::vector<std::int32_t> resamples(static_cast<std::size_t>(drops));
  detail::run_drops(
      drops,
      [&](long long i) {
        thread_local NetworkRealization r;
        sample_realization_into(r, sys, inDof, radius, seed,
                                static_cast<std::uint64_t>(i), true);
        const std::size_t ii = static_cast<std::size_t>(i);
        resamples[ii] = r.resamples;
        if (r.typClass == kMcMacro) {
          activeCnt[ii] = static_cast<std::int32_t>(
              r.macroActiveOff[static_cast<std::size_t>(r.typServing)]
                  .size());
        } else if (r.typClass == kMcOffloaded) {
          nearestCnt[ii] = static_cast<std::int32_t>(
              r.macroActiveOff[static_cast<std::size_t>(r.typNearestMacro)]
                  .size());
          selected[ii] = static_cast<std::int8_t>(r.typNulled ? 1 : 0);
        }
      },
      threads);

  OffloadPmfEstimate e;
  long long nMacro = 0, nOff = 0, nSel = 0;
  int maxActive = 0, maxNearest = 0;
  for (long long i = 0; i < drops; ++i) {
    const std::size_t ii = static_cast<std::size_t>(i);
    e.resamples += resamples[ii];
    if (activeCnt[ii] >= 0) {
      ++nMacro;
      maxActive = std::max(maxActive, activeCnt[ii]);
    }
    if (nearestCnt[ii] >= 0) {
      ++nOff;
      maxNearest = std::max(maxNearest, nearestCnt[ii]);
      nSel += selected[ii];
    }
  }
  e.macroConditioned = nMacro;
  e.offloadConditioned = nOff;
  e.insufficientMacro = nMacro == 0;
  e.insufficientOffload = nOff == 0;
  std::vector<long long> histA(static_cast<std::size_t>(maxActive) + 1, 0);
  std::vector<long long> histN(static_cast<std::size_t>(maxNearest) + 1, 0);
  for (long long i = 0; i < drops; ++i) {
    const std::size_t ii = static_cast<std::size_t>(i);
    if (activeCnt[ii] >= 0) ++histA[static_cast<std::size_t>(activeCnt[ii])];
    if (nearestCnt[ii] >= 0) {
      ++histN[static_cast<std::size_t>(nearestCnt[ii])];
    }
  }
  for (long long h : histA) {
    e.pmfActive.push_back(detail::binomial_estimate(h, nMacro));
  }
  for (long long h : histN) {
    e.pmfActiveNearest.push_back(detail::binomial_estimate(h, nOff));
  }
  e.inProbability = detail::binomial_estimate(nSel, nOff);
  return e;
}

// ---------------------------------------------------------------------------
// Interference-functional oracle for the Laplace machinery: points of one
// tier outside radius r with Exp(1) marks, I = sum g_i d_i^-alpha, and the
// sample means of I^m e^{-sI} for m = 0..4.

struct InterferenceFunctionalEstimate {
  std::array<double, 5> moment{};    // E[I^m e^{-sI}]
  std::array<double, 5> momentCi{};  // 95% half-widths
  long long drops = 0;
};

inline InterferenceFunctionalEstimate estimate_interference_functional(
    const SystemParams& sys, int tier, double s, double r, long long drops,
    std::uint64_t seed, const NumericsParams& num) {
  if (!(r > 0.0)) {
    throw std::domain_error(
        "estimate_interference_functional: r must be > 0");
  }
  if (tier != 1 && tier != 2) {
    throw std::domain_error(
        "estimate_interference_functional: tier must be 1 or 2");
  }
  if (drops < 1) {
    throw std::domain_error(
        "estimate_interference_functional: drops must be >= 1");
  }
  const double lambda = tier == 1 ? sys.lambda1 : sys.lambda2;
  const double alpha = tier == 1 ? sys.alpha1 : sys.alpha2;
  const double radius = resolved_window_radius(sys, num);
  if (!(radius > r)) {
    throw std::domain_error(
        "estimate_interference_functional: window radius must exceed r");
  }
  const double area = M_PI * (radius * radius - r * r);
  std::array<double, 5> sum{}, sumSq{};
  for (long long i = 0; i < drops; ++i) {
    DropRng rng(seed, static_cast<std::uint64_t>(i));
    const long long n = rng.poisson(lambda * area);
    double interference = 0.0;
    for (long long k = 0; k < n; ++k) {
      // Radius with density proportional to d (uniform in the annulus).
      const double d =
          std::sqrt(r * r + rng.uniform() * (radius * radius - r * r));
      interference += rng.expo() * std::pow(d, -alpha);
    }
    const double damp = std::exp(-s * interference);
    double im = 1.0;
    for (int m = 0; m <= 4; ++m) {
      const double v = im * damp;
      sum[static_cast<std::size_t>(m)] += v;
      sumSq[static_cast<std::size_t>(m)] += v * v;
      im *= interference;
    }
  }
  InterferenceFunctionalEstimate e;
  e.drops = drops;
  for (int m = 0; m <= 4; ++m) {
    const std::size_t mm = static_cast<std::size_t>(m);
    const double mean = sum[mm] / static_cast<double>(drops);
    const double var = std::max(
        0.0, sumSq[mm] / static_cast<double>(drops) - mean * mean);
    e.moment[mm] = mean;
    e.momentCi[mm] =
        1.96 * std::sqrt(var / static_cast<double>(drops));
  }
  return e;
}

// ---------------------------------------------------------------------------
// Conditional (distance-pinned) coverage estimation: the oracle for the
// analytic conditional_coverage formulas. Interferers are PPPs outside the
// class's exclusion radii; the exposed class re-adds the nearest macro at
// exactly y1. The slow path replaces the Gamma effective-gain draw with an
// explicit complex-Gaussian channel and zero-forcing (macro class) or
// maximum-ratio (pico classes) precoder.

namespace detail {

using cd = std::complex<double>;

// Zero-forcing beamformer: rows of H are the target channel h (row 0) and
// the u nulled channels; returns the normalized first column of
// H^H (H H^H)^{-1}. Plain Gaussian elimination on the (u+1)x(u+1) Gramian.
inline std::vector<cd> zf_first_column(const std::vector<std::vector<cd>>& H) {
  const std::size_t rows = H.size();
  const std::size_t cols = H.front().size();
  std::vector<std::vector<cd>> A(rows, std::vector<cd>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < rows; ++j) {
      cd acc = 0.0;
      for (std::size_t k = 0; k < cols; ++k) {
        acc += H[i][k] * std::conj(H[j][k]);
      }
      A[i][j] = acc;
    }
  }
  // Solve A x = e0 with partial pivoting.
  std::vector<cd> x(rows, cd{0.0});
  x[0] = 1.0;
  for (std::size_t c = 0; c < rows; ++c) {
    std::size_t piv = c;
    for (std::size_t i = c + 1; i < rows; ++i) {
      if (std::abs(A[i][c]) > std::abs(A[piv][c])) piv = i;
    }
    std::swap(A[c], A[piv]);
    std::swap(x[c], x[piv]);
    const cd diag = A[c][c];
    if (std::abs(diag) < 1e-30) {
      throw std::runtime_error("zero-forcing: singular channel Gramian");
    }
    for (std::size_t j = c; j < rows; ++j) A[c][j] /= diag;
    x[c] /= diag;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == c) continue;
      const cd f = A[i][c];
      if (f == cd{0.0}) continue;
      for (std::size_t j = c; j < rows; ++j) A[i][j] -= f * A[c][j];
      x[i] -= f * x[c];
    }
  }
  // Beam w with conj(w) = H^H x, so that the received amplitude
  // sum_k h_j[k] conj(w[k]) equals (H H^H x)_j = (e0)_j: row 0 keeps the
  // full projected gain and rows 1..u are nulled exactly.
  std::vector<cd> w(cols, cd{0.0});
  for (std::size_t k = 0; k < cols; ++k) {
    cd acc = 0.0;
    for (std::size_t i = 0; i < rows; ++i) acc += H[i][k] * std::conj(x[i]);
    w[k] = acc;
  }
  double norm2 = 0.0;
  for (const cd& v : w) norm2 += std::norm(v);
  const double inv = 1.0 / std::sqrt(norm2);
  for (cd& v : w) v *= inv;
  return w;
}

// Unit-variance complex Gaussian entries.
inline std::vector<cd> cn_vector(DropRng& rng, int n) {
  std::vector<cd> v(static_cast<std::size_t>(n));
  const double scale = std::sqrt(0.5);
  for (auto& e : v) {
    e = cd{rng.normal() * scale, rng.normal() * scale};
  }
  return v;
}

inline double beam_gain(const std::vector<cd>& h, const std::vector<cd>& f) {
  cd acc = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) acc += h[k] * std::conj(f[k]);
  return std::norm(acc);
}

// Effective signal gain on the slow path: Gamma(shape,1) must emerge from
// the explicit precoder rather than being sampled directly.
inline double slow_signal_gain(DropRng& rng, const SystemParams& sys,
                               UserClass k, int shape) {
  if (k == UserClass::Macro) {
    const int u = sys.n1 - shape;  // nulled directions
    std::vector<std::vector<cd>> H;
    H.push_back(cn_vector(rng, sys.n1));
    for (int i = 0; i < u; ++i) H.push_back(cn_vector(rng, sys.n1));
    const std::vector<cd> f = zf_first_column(H);
    return beam_gain(H.front(), f);
  }
  // Pico tiers: maximum-ratio beamforming, |h f|^2 = ||h||^2.
  const std::vector<cd> h = cn_vector(rng, sys.n2);
  double g = 0.0;
  for (const cd& v : h) g += std::norm(v);
  return g;
}

}  // namespace detail

struct ConditionalCoverageEstimate {
  McEstimate est;
  double meanSignalGain = 0.0;  // diagnostic: should match the Gamma shape
};

inline ConditionalCoverageEstimate estimate_conditional_coverage(
    const SystemParams& sys, UserClass k, double y1, double y2, int inDofCond,
    double beta, long long drops, std::uint64_t seed,
    const NumericsParams& num, bool explicitPrecoder = false) {
  if (drops < 1) {
    throw std::domain_error(
        "estimate_conditional_coverage: drops must be >= 1");
  }
  const ClassGeometry g = class_geometry(k, sys, y1, y2, inDofCond);
  const double radius = resolved_window_radius(sys, num);
  if (!(radius > g.r1) || !(radius > g.r2)) {
    throw std::domain_error(
        "estimate_conditional_coverage: window smaller than exclusion radii");
  }
  const double area1 = M_PI * (radius * radius - g.r1 * g.r1);
  const double area2 = M_PI * (radius * radius - g.r2 * g.r2);
  const double pServ = g.servingTier == 1 ? sys.p1 : sys.p2;
  const double aServ = g.servingTier == 1 ? sys.alpha1 : sys.alpha2;
  long long hits = 0;
  double gainSum = 0.0;
  for (long long i = 0; i < drops; ++i) {
    DropRng rng(seed, static_cast<std::uint64_t>(i));
    double interference = 0.0;
    const long long m1 = rng.poisson(sys.lambda1 * area1);
    for (long long j = 0; j < m1; ++j) {
      const double d = std::sqrt(g.r1 * g.r1 +
                                 rng.uniform() * (radius * radius -
                                                  g.r1 * g.r1));
      interference += sys.p1 * rng.expo() * std::pow(d, -sys.alpha1);
    }
    const long long m2 = rng.poisson(sys.lambda2 * area2);
    for (long long j = 0; j < m2; ++j) {
      const double d = std::sqrt(g.r2 * g.r2 +
                                 rng.uniform() * (radius * radius -
                                                  g.r2 * g.r2));
      interference += sys.p2 * rng.expo() * std::pow(d, -sys.alpha2);
    }
    if (k == UserClass::OffloadExposed) {
      interference +=
          sys.p1 * rng.expo() * std::pow(g.y1Dominant, -sys.alpha1);
    }
    const double gain =
        explicitPrecoder
            ? detail::slow_signal_gain(rng, sys, k, g.signalShape)
            : rng.gamma_int(g.signalShape);
    gainSum += gain;
    const double sir =
        pServ * gain * std::pow(g.yServing, -aServ) / interference;
    hits += sir > beta ? 1 : 0;
  }
  ConditionalCoverageEstimate e;
  e.est = detail::binomial_estimate(hits, drops);
  e.meanSignalGain = gainSum / static_cast<double>(drops);
  return e;
}

// Fast-vs-slow consistency data for the zero-forcing path in isolation.
struct ZfValidation {
  double meanSignalGain = 0.0;    // expect n1 - u
  double meanResidualGain = 0.0;  // at nulled users: expect ~0
  double meanObserverGain = 0.0;  // at an unrelated user: expect ~1
  long long samples = 0;
};

inline ZfValidation validate_zero_forcing(int n1, int u, long long samples,
                                          std::uint64_t seed) {
  if (n1 < 1 || u < 0 || u > n1 - 1) {
    throw std::domain_error("validate_zero_forcing: need 0 <= u <= n1-1");
  }
  if (samples < 1) {
    throw std::domain_error("validate_zero_forcing: samples must be >= 1");
  }
  ZfValidation out;
  out.samples = samples;
  double sig = 0.0, res = 0.0, obs = 0.0;
  for (long long i = 0; i < samples; ++i) {
    DropRng rng(seed, static_cast<std::uint64_t>(i));
    std::vector<std::vector<detail::cd>> H;
    H.push_back(detail::cn_vector(rng, n1));
    for (int j = 0; j < u; ++j) H.push_back(detail::cn_vector(rng, n1));
    const std::vector<detail::cd> f = detail::zf_first_column(H);
    sig += detail::beam_gain(H.front(), f);
    for (int j = 0; j < u; ++j) {
      res += detail::beam_gain(H[static_cast<std::size_t>(j) + 1], f) /
             std::max(1, u);
    }
    obs += detail::beam_gain(detail::cn_vector(rng, n1), f);
  }
  out.meanSignalGain = sig / static_cast<double>(samples);
  out.meanResidualGain = u > 0 ? res / static_cast<double>(samples) : 0.0;
  out.meanObserverGain = obs / static_cast<double>(samples);
  return out;
}

}  // namespace hetin
