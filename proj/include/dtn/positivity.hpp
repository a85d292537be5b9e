#ifndef DTN_POSITIVITY_HPP
#define DTN_POSITIVITY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "domains.hpp"
#include "parallel.hpp"
#include "traceform.hpp"

namespace dtn {

/// Positive and negative parts of a boundary function on a grid split at its sign changes.
struct PmSplit {
  BoundaryFunction plus, minus;
};

inline int default_split_cells(DomainId d) {
  switch (d) {
    case DomainId::Disc: return 64;
    case DomainId::Square: return 32;
    case DomainId::Ball: return 32;
  }
  return 32;
}

inline PmSplit pm_split(DomainId domain, const BoundaryFn &psi, int cells = 0, int order = 8) {
  const auto grid = split_grid(domain, psi, cells > 0 ? cells : default_split_cells(domain), order);
  PmSplit out{{grid, std::vector<double>(grid->size()), "plus"}, {grid, std::vector<double>(grid->size()), "minus"}};
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const double v = psi(grid->nodes[i]);
    out.plus.samples[i] = std::max(v, 0.0);
    out.minus.samples[i] = std::max(-v, 0.0);
  }
  return out;
}

enum class SideImplication { ViolatesLeft, ViolatesRight, Neutral };

inline std::string to_string(SideImplication s) {
  switch (s) {
    case SideImplication::ViolatesLeft: return "violates-left";
    case SideImplication::ViolatesRight: return "violates-right";
    case SideImplication::Neutral: return "neutral";
  }
  return "neutral";
}

/// Member integrals of the positive and negative parts of one test function against a mode.
struct SignTestReport {
  DirichletMode mode;
  std::string descriptor;
  std::vector<double> plus_integrals;
  std::vector<double> minus_integrals;
  double S = 0.0;
  double scale = 0.0;  ///< Cauchy-Schwarz bound sum_l |d_nu v_l|^2 |psi+| |psi-| on |S|
  SideImplication implication = SideImplication::Neutral;

  double normalized() const { return scale > 0 ? S / scale : 0.0; }
};

inline constexpr double kSignTolerance = 1e-9;

inline SignTestReport sign_sum(const DirichletMode &mode, const PmSplit &split, std::string descriptor) {
  SignTestReport r;
  r.mode = mode;
  r.descriptor = std::move(descriptor);
  r.plus_integrals = member_fluxes(mode, split.plus);
  r.minus_integrals = member_fluxes(mode, split.minus);
  double dnu2 = 0.0;
  for (const auto &m : members(mode)) dnu2 += normal_derivative_norm2(mode.domain, m);
  r.scale = dnu2 * std::sqrt(inner(split.plus, split.plus) * inner(split.minus, split.minus));
  for (std::size_t i = 0; i < r.plus_integrals.size(); ++i) r.S += r.plus_integrals[i] * r.minus_integrals[i];
  const double rel = r.normalized();
  if (rel > kSignTolerance) r.implication = SideImplication::ViolatesRight;
  else if (rel < -kSignTolerance) r.implication = SideImplication::ViolatesLeft;
  return r;
}

inline SignTestReport sign_sum(const DirichletMode &mode, const BoundaryFn &psi, std::string descriptor,
                               int cells = 0) {
  return sign_sum(mode, pm_split(mode.domain, psi, cells), std::move(descriptor));
}

// ---------------------------------------------------------------------------
// Probe functions

struct Probe {
  std::string descriptor;
  BoundaryFn fn;
};

/// The square test function cos(pi t) on horizontal edges and t on vertical edges.
inline BoundaryFn square_edge_witness() {
  return [](const BoundaryPoint &p) { return p.segment % 2 == 0 ? std::cos(std::numbers::pi * p.t) : p.t; };
}

namespace detail {

/// Geodesic (disc, ball) or periodic arclength (square) distance between boundary points.
inline double boundary_distance(DomainId d, const BoundaryPoint &a, const BoundaryPoint &b) {
  switch (d) {
    case DomainId::Disc: {
      const double diff = std::fabs(std::remainder(a.theta - b.theta, 2.0 * std::numbers::pi));
      return diff;
    }
    case DomainId::Square: {
      const double diff = std::fabs(a.s - b.s);
      return std::min(diff, 4.0 - diff);
    }
    case DomainId::Ball: {
      const double c = a.x * b.x + a.y * b.y + a.z * b.z;
      return std::acos(std::clamp(c, -1.0, 1.0));
    }
  }
  return 0.0;
}

inline std::vector<BoundaryPoint> candidate_points(DomainId d) {
  std::vector<BoundaryPoint> pts;
  switch (d) {
    case DomainId::Disc:
      for (int i = 0; i < 240; ++i) pts.push_back(circle_point(2.0 * std::numbers::pi * (i + 0.37) / 240));
      break;
    case DomainId::Square:
      for (int e = 0; e < 4; ++e)
        for (int i = 0; i < 60; ++i) pts.push_back(square_point(e, (i + 0.5) / 60));
      break;
    case DomainId::Ball:
      // Equator and one meridian: the eigenspace kernel only depends on the angle between points.
      for (int i = 0; i < 120; ++i) pts.push_back(sphere_point(0.5 * std::numbers::pi, 2.0 * std::numbers::pi * i / 120));
      break;
  }
  return pts;
}

/// Characteristic length of the normal-derivative kernel of a mode.
inline double kernel_scale(const DirichletMode &mode) {
  int freq = 0;
  for (const auto &m : members(mode)) freq = std::max(freq, member_frequency(mode.domain, m));
  switch (mode.domain) {
    case DomainId::Disc: return std::numbers::pi / (8.0 * (freq + 1));
    case DomainId::Square: return 1.0 / (8.0 * freq);
    case DomainId::Ball: return 1.0 / (2.0 * (freq + 1));
  }
  return 0.1;
}

inline BoundaryFn bump(DomainId d, BoundaryPoint centre, double width) {
  return [=](const BoundaryPoint &p) {
    const double r = boundary_distance(d, centre, p);
    if (r >= width) return 0.0;
    const double c = std::cos(0.5 * std::numbers::pi * r / width);
    return c * c;
  };
}

/// Dipoles bump(p) - bump(q) aimed at the most negative and the nearby positive values of the
/// eigenspace kernel K(p, q) = sum_l d_nu v_l(p) d_nu v_l(q).
inline std::vector<Probe> dipole_probes(const DirichletMode &mode) {
  const auto pts = candidate_points(mode.domain);
  const auto mems = members(mode);
  std::vector<std::vector<double>> vals(pts.size());
  for (const auto &m : mems) {
    const auto f = normal_derivative_fn(mode.domain, m);
    for (std::size_t i = 0; i < pts.size(); ++i) vals[i].push_back(f(pts[i]));
  }
  const auto kernel = [&](std::size_t i, std::size_t j) {
    double s = 0;
    for (std::size_t l = 0; l < mems.size(); ++l) s += vals[i][l] * vals[j][l];
    return s;
  };
  const double w = kernel_scale(mode);
  std::size_t neg_i = 0, neg_j = 0, diag = 0;
  double neg = 0.0, best_diag = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (kernel(i, i) > best_diag) {
      best_diag = kernel(i, i);
      diag = i;
    }
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      if (boundary_distance(mode.domain, pts[i], pts[j]) < 2.2 * w) continue;
      const double k = kernel(i, j);
      if (k < neg) {
        neg = k;
        neg_i = i;
        neg_j = j;
      }
    }
  }
  std::vector<Probe> out;
  const auto dipole = [&](std::size_t i, std::size_t j, std::string tag) {
    const auto a = bump(mode.domain, pts[i], w), b = bump(mode.domain, pts[j], w);
    out.push_back({std::move(tag), [a, b](const BoundaryPoint &p) { return a(p) - b(p); }});
  };
  if (neg < 0.0) dipole(neg_i, neg_j, "dipole-opposed");
  std::size_t near = diag;
  double near_k = -1e300;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const double r = boundary_distance(mode.domain, pts[diag], pts[j]);
    if (r < 2.2 * w || r > 3.5 * w) continue;
    if (kernel(diag, j) > near_k) {
      near_k = kernel(diag, j);
      near = j;
    }
  }
  if (near != diag) dipole(diag, near, "dipole-adjacent");
  return out;
}

inline std::vector<Probe> random_probes(const DirichletMode &mode, std::uint64_t seed, int draws) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  int freq = 0;
  for (const auto &m : members(mode)) freq = std::max(freq, member_frequency(mode.domain, m));
  std::vector<Probe> out;
  for (int d = 0; d < draws; ++d) {
    const std::string tag = "random-" + std::to_string(d);
    switch (mode.domain) {
      case DomainId::Disc:
      case DomainId::Square: {
        const int degree = std::max(6, freq + 2);
        std::vector<double> a(degree + 1), b(degree + 1);
        for (int j = 0; j <= degree; ++j) {
          a[j] = normal(rng);
          b[j] = normal(rng);
        }
        const bool disc = mode.domain == DomainId::Disc;
        out.push_back({tag, [a, b, degree, disc](const BoundaryPoint &p) {
                         const double x = disc ? p.theta : 0.5 * std::numbers::pi * p.s;
                         double v = a[0];
                         for (int j = 1; j <= degree; ++j) v += a[j] * std::cos(j * x) + b[j] * std::sin(j * x);
                         return v;
                       }});
        break;
      }
      case DomainId::Ball: {
        const int degree = std::max(3, freq + 1);
        std::vector<double> c((degree + 1) * (degree + 1));
        for (double &x : c) x = normal(rng);
        out.push_back({tag, [c, degree](const BoundaryPoint &p) {
                         const auto y = real_sph_harmonics(degree, p.theta, p.phi);
                         return std::inner_product(c.begin(), c.end(), y.begin(), 0.0);
                       }});
        break;
      }
    }
  }
  return out;
}

} // namespace detail

/// Structured search family: normal derivatives, shifted-index probes, edge probes, kernel dipoles,
/// and seeded random trigonometric functions.
inline std::vector<Probe> probe_family(const DirichletMode &mode, std::uint64_t seed = 0x5EED, int draws = 50) {
  std::vector<Probe> out;
  const auto mems = members(mode);
  for (std::size_t i = 0; i < mems.size(); ++i)
    out.push_back({"dnu[" + std::to_string(i) + "]", normal_derivative_fn(mode.domain, mems[i])});
  switch (mode.domain) {
    case DomainId::Disc:
      for (const auto &lab : mode.labels) {
        const int k1 = lab[0] + 1;
        out.push_back({"cos(" + std::to_string(k1) + "theta)",
                       [k1](const BoundaryPoint &p) { return std::cos(k1 * p.theta); }});
        out.push_back({"sin(" + std::to_string(k1) + "theta)",
                       [k1](const BoundaryPoint &p) { return std::sin(k1 * p.theta); }});
      }
      break;
    case DomainId::Ball:
      for (const auto &lab : mode.labels)
        for (int shift : {1, 2}) {
          const int k = lab[0] + shift;
          out.push_back({"sin(" + std::to_string(k) + "phi)", [k](const BoundaryPoint &p) { return std::sin(k * p.phi); }});
        }
      break;
    case DomainId::Square: {
      for (const auto &lab : mode.labels) {
        const ModeMember shifted{lab[0] + 1, lab[1] + 1, 0};
        out.push_back({"dnu(" + std::to_string(shifted.a) + "," + std::to_string(shifted.b) + ")",
                       normal_derivative_fn(DomainId::Square, shifted)});
      }
      out.push_back({"edge-witness", square_edge_witness()});
      for (int pattern = 1; pattern < 15; ++pattern) {
        std::string tag = "edges(";
        for (int e = 0; e < 4; ++e) tag += (pattern >> e) & 1 ? '+' : '-';
        out.push_back({tag + ")", [pattern](const BoundaryPoint &p) { return (pattern >> p.segment) & 1 ? 1.0 : -1.0; }});
      }
      break;
    }
  }
  for (auto &p : detail::dipole_probes(mode)) out.push_back(std::move(p));
  for (auto &p : detail::random_probes(mode, seed, draws)) out.push_back(std::move(p));
  return out;
}

/// Split-grid resolution adequate for the probes of a mode.
inline int probe_cells(const DirichletMode &mode) {
  int freq = 0;
  for (const auto &m : members(mode)) freq = std::max(freq, member_frequency(mode.domain, m));
  switch (mode.domain) {
    case DomainId::Disc: return std::max(64, 8 * (freq + 1));
    case DomainId::Square: return std::max(32, 4 * freq);
    case DomainId::Ball: return std::max(32, 6 * (freq + 1));
  }
  return 64;
}

// ---------------------------------------------------------------------------
// Certification

enum class Side { Left, Right, BelowGround };
enum class Verdict { PP, NotPP, Undetermined };

inline std::string to_string(Side s) {
  switch (s) {
    case Side::Left: return "left";
    case Side::Right: return "right";
    case Side::BelowGround: return "below-ground";
  }
  return "left";
}

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::PP: return "PP";
    case Verdict::NotPP: return "NotPP";
    case Verdict::Undetermined: return "Undetermined";
  }
  return "Undetermined";
}

struct PositivityVerdict {
  DirichletMode mode;
  Side side = Side::Left;
  Verdict verdict = Verdict::Undetermined;
  std::string reason;
  std::vector<SignTestReport> witnesses;
};

/// Simple mode whose normal derivative has one sign on the boundary.
inline bool constant_sign_mode(const DirichletMode &mode, const GridPtr &grid) {
  if (mode.multiplicity != 1) return false;
  const auto f = normal_derivative(mode, 0, grid);
  double lo = 0, hi = 0;
  for (double v : f.samples) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double scale = std::max(hi, -lo);
  return lo >= -1e-12 * scale || hi <= 1e-12 * scale;
}

/// Sign reports of every probe in the search family (evaluated in parallel, order preserved).
inline std::vector<SignTestReport> probe_reports(const DirichletMode &mode, std::uint64_t seed = 0x5EED,
                                                 int draws = 50) {
  const auto probes = probe_family(mode, seed, draws);
  const int cells = probe_cells(mode);
  std::vector<SignTestReport> reports(probes.size());
  parallel_for(probes.size(), [&](std::size_t i) { reports[i] = sign_sum(mode, probes[i].fn, probes[i].descriptor, cells); });
  return reports;
}

inline constexpr double kRobinSignTolerance = 1e-7;

/// Probe reports whose S is the residue at E of the Robin form on (psi+, psi-), read off a contour.
inline std::vector<SignTestReport> robin_reports(const TraceFormSpec &spec, const DirichletMode &mode,
                                                 std::uint64_t seed = 0x5EED, int draws = 50) {
  if (!spec.robin_beta) throw std::invalid_argument("robin_reports: spec has no Robin coefficient");
  const auto probes = probe_family(mode, seed, draws);
  const int cells = probe_cells(mode);
  std::vector<SignTestReport> reports(probes.size());
  parallel_for(probes.size(), [&](std::size_t i) {
    const auto split = pm_split(mode.domain, probes[i].fn, cells);
    auto r = sign_sum(mode, split, probes[i].descriptor);
    r.S = contour_residue([&](cplx z) { return robin_form(spec, z, split.plus, split.minus).value; }, mode.E,
                          1e-4 * mode.E);
    const double rel = r.normalized();
    r.implication = rel > kRobinSignTolerance    ? SideImplication::ViolatesRight
                    : rel < -kRobinSignTolerance ? SideImplication::ViolatesLeft
                                                 : SideImplication::Neutral;
    reports[i] = std::move(r);
  });
  return reports;
}

/// Verdict for one side of a pole, from precomputed probe reports.
inline PositivityVerdict certify_from(const DirichletMode &mode, Side side, const std::vector<SignTestReport> &reports,
                                      const GridPtr &grid) {
  PositivityVerdict v;
  v.mode = mode;
  v.side = side;
  const auto violating = side == Side::Left ? SideImplication::ViolatesLeft : SideImplication::ViolatesRight;
  const SignTestReport *first = nullptr, *strongest = nullptr;
  for (const auto &r : reports) {
    if (r.implication != violating) continue;
    if (!first) first = &r;
    if (!strongest || std::fabs(r.normalized()) > std::fabs(strongest->normalized())) strongest = &r;
  }
  const bool structural = side == Side::Left && constant_sign_mode(mode, grid);
  if (first) {
    v.verdict = structural ? Verdict::Undetermined : Verdict::NotPP;
    v.reason = structural ? "witness contradicts the constant-sign criterion" : "witness with violating sign";
    v.witnesses.push_back(*first);
    if (strongest != first) v.witnesses.push_back(*strongest);
  } else if (structural) {
    v.verdict = Verdict::PP;
    v.reason = "simple mode with constant-sign normal derivative";
  } else {
    v.verdict = Verdict::Undetermined;
    v.reason = "no witness found in the search family";
  }
  return v;
}

inline PositivityVerdict certify(const TraceFormSpec &spec, const DirichletMode &mode, Side side,
                                 std::uint64_t seed = 0x5EED, int draws = 50) {
  if (side == Side::BelowGround) throw std::invalid_argument("certify: use below_ground_check for lambda < E0");
  if (mode.domain != spec.domain) throw std::invalid_argument("certify: mode and spec domains differ");
  return certify_from(mode, side, probe_reports(mode, seed, draws), spec.grid);
}

// ---------------------------------------------------------------------------
// Below the ground state

struct BelowGroundReport {
  double lambda = 0.0;
  int samples = 0;
  double max_value = -std::numeric_limits<double>::infinity();
  int violations = 0;
  int one_signed = 0;  ///< samples with psi+ or psi- identically zero, where the form vanishes exactly
  std::vector<double> values;
};

inline constexpr double kBelowGroundTolerance = 1e-9;

/// Random test function of the domain's below-ground family (trigonometric or low-degree harmonics).
inline BoundaryFn random_trig(DomainId d, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> deg(1, d == DomainId::Ball ? 3 : 6);
  const int degree = deg(rng);
  if (d == DomainId::Ball) {
    std::vector<double> c((degree + 1) * (degree + 1));
    for (double &x : c) x = normal(rng);
    return [c, degree](const BoundaryPoint &p) {
      const auto y = real_sph_harmonics(degree, p.theta, p.phi);
      return std::inner_product(c.begin(), c.end(), y.begin(), 0.0);
    };
  }
  std::vector<double> a(degree + 1), b(degree + 1);
  for (int j = 0; j <= degree; ++j) {
    a[j] = normal(rng);
    b[j] = normal(rng);
  }
  const bool disc = d == DomainId::Disc;
  return [a, b, degree, disc](const BoundaryPoint &p) {
    const double x = disc ? p.theta : 0.5 * std::numbers::pi * p.s;
    double v = a[0];
    for (int j = 1; j <= degree; ++j) v += a[j] * std::cos(j * x) + b[j] * std::sin(j * x);
    return v;
  };
}

/// Samples E_lambda(psi+, psi-) for random psi; below the ground state every value should be <= 0.
inline BelowGroundReport below_ground_check(const TraceFormSpec &spec, double lambda, int samples,
                                            std::uint64_t seed = 0x5EED) {
  const double e0 = catalog(spec.domain, 10.0)->front().E;
  if (!(lambda < e0)) throw std::invalid_argument("below_ground_check: lambda must lie below the ground eigenvalue");
  std::mt19937_64 rng(seed);
  std::vector<BoundaryFn> psis;
  for (int i = 0; i < samples; ++i) psis.push_back(random_trig(spec.domain, rng));
  BelowGroundReport rep;
  rep.lambda = lambda;
  rep.samples = samples;
  rep.values.resize(samples);
  std::vector<char> trivial(samples, 0);
  parallel_for(static_cast<std::size_t>(samples), [&](std::size_t i) {
    const auto split = pm_split(spec.domain, psis[i]);
    const auto nonzero = [](const BoundaryFunction &f) {
      return std::any_of(f.samples.begin(), f.samples.end(), [](double v) { return v != 0.0; });
    };
    trivial[i] = !nonzero(split.plus) || !nonzero(split.minus);
    rep.values[i] = eval_form(spec, lambda, split.plus, split.minus).value.real();
  });
  rep.one_signed = static_cast<int>(std::count(trivial.begin(), trivial.end(), 1));
  for (double v : rep.values) {
    rep.max_value = std::max(rep.max_value, v);
    if (v > kBelowGroundTolerance) ++rep.violations;
  }
  return rep;
}

} // namespace dtn

#endif // DTN_POSITIVITY_HPP
