#ifndef DTN_DOMAINS_HPP
#define DTN_DOMAINS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "quadrature.hpp"
#include "specfun.hpp"

namespace dtn {

enum class DomainId { Disc, Square, Ball };

inline std::string to_string(DomainId d) {
  switch (d) {
    case DomainId::Disc: return "disc";
    case DomainId::Square: return "square";
    case DomainId::Ball: return "ball";
  }
  return "unknown";
}

inline DomainId parse_domain(const std::string &s) {
  if (s == "disc") return DomainId::Disc;
  if (s == "square") return DomainId::Square;
  if (s == "ball") return DomainId::Ball;
  throw std::invalid_argument("unknown domain '" + s + "' (expected disc, square or ball)");
}

/// Total boundary measure: 2 pi, 4, 4 pi.
inline double boundary_measure(DomainId d) {
  switch (d) {
    case DomainId::Disc: return 2.0 * std::numbers::pi;
    case DomainId::Square: return 4.0;
    case DomainId::Ball: return 4.0 * std::numbers::pi;
  }
  return 0.0;
}

/// A boundary point with its Cartesian position and intrinsic coordinates.
///
/// Circle: theta in [0, 2 pi), s = theta.
/// Square: edge 0 is y=0, 1 is x=1, 2 is y=1, 3 is x=0; t is x on horizontal edges and
/// y on vertical ones; s in [0, 4) is counterclockwise arclength from the origin.
/// Sphere: polar angle theta, azimuth phi.
struct BoundaryPoint {
  double x = 0, y = 0, z = 0;
  double s = 0;
  double t = 0;
  double theta = 0, phi = 0;
  int segment = 0;
};

inline BoundaryPoint circle_point(double theta) {
  BoundaryPoint p;
  p.theta = p.s = theta;
  p.x = std::cos(theta);
  p.y = std::sin(theta);
  return p;
}

inline BoundaryPoint square_point(int edge, double t) {
  BoundaryPoint p;
  p.segment = edge;
  p.t = t;
  switch (edge) {
    case 0: p.x = t; p.y = 0; p.s = t; break;
    case 1: p.x = 1; p.y = t; p.s = 1 + t; break;
    case 2: p.x = t; p.y = 1; p.s = 3 - t; break;
    default: p.x = 0; p.y = t; p.s = 4 - t; break;
  }
  return p;
}

inline BoundaryPoint sphere_point(double theta, double phi) {
  BoundaryPoint p;
  p.theta = theta;
  p.phi = phi;
  p.s = phi;
  p.x = std::sin(theta) * std::cos(phi);
  p.y = std::sin(theta) * std::sin(phi);
  p.z = std::cos(theta);
  return p;
}

using BoundaryFn = std::function<double(const BoundaryPoint &)>;

/// Quadrature nodes and positive weights on the boundary.
struct BoundaryGrid {
  DomainId domain = DomainId::Disc;
  std::vector<BoundaryPoint> nodes;
  std::vector<double> weights;
  std::vector<double> segment_breaks;
  int max_mode = 0;

  std::size_t size() const { return nodes.size(); }
  double measure() const {
    double s = 0;
    for (double w : weights) s += w;
    return s;
  }
};

using GridPtr = std::shared_ptr<const BoundaryGrid>;

/// Circle: trapezoid; square: per-edge Gauss-Legendre; sphere: Gauss-Legendre in cos(theta) x uniform phi.
inline GridPtr boundary_quadrature(DomainId domain, int resolution) {
  if (resolution < 4) throw std::invalid_argument("boundary quadrature resolution must be >= 4");
  auto g = std::make_shared<BoundaryGrid>();
  g->domain = domain;
  switch (domain) {
    case DomainId::Disc: {
      const double h = 2.0 * std::numbers::pi / resolution;
      for (int i = 0; i < resolution; ++i) {
        g->nodes.push_back(circle_point(i * h));
        g->weights.push_back(h);
      }
      g->max_mode = (resolution - 1) / 2;
      break;
    }
    case DomainId::Square: {
      const auto &r = gauss_legendre(resolution);
      for (int e = 0; e < 4; ++e)
        for (int i = 0; i < resolution; ++i) {
          g->nodes.push_back(square_point(e, 0.5 * (1.0 + r.nodes[i])));
          g->weights.push_back(0.5 * r.weights[i]);
        }
      g->segment_breaks = {0, 1, 2, 3, 4};
      g->max_mode = resolution / 2;
      break;
    }
    case DomainId::Ball: {
      const auto &r = gauss_legendre(resolution);
      const int nphi = 2 * resolution;
      const double h = 2.0 * std::numbers::pi / nphi;
      for (int i = 0; i < resolution; ++i) {
        const double theta = std::acos(r.nodes[i]);
        for (int j = 0; j < nphi; ++j) {
          g->nodes.push_back(sphere_point(theta, j * h));
          g->weights.push_back(r.weights[i] * h);
        }
      }
      g->max_mode = resolution - 1;
      break;
    }
  }
  return g;
}

/// Grid whose cells are split at the sign changes of `sign_source`, so that the positive and
/// negative parts of that function are smooth on every piece.
inline GridPtr split_grid(DomainId domain, const BoundaryFn &sign_source, int cells, int order) {
  auto g = std::make_shared<BoundaryGrid>();
  g->domain = domain;
  switch (domain) {
    case DomainId::Disc: {
      auto f = [&](double th) { return sign_source(circle_point(th)); };
      for (auto [th, w] : split_rule(f, 0.0, 2.0 * std::numbers::pi, cells, order)) {
        g->nodes.push_back(circle_point(th));
        g->weights.push_back(w);
      }
      g->max_mode = cells * order / 2 - 1;
      break;
    }
    case DomainId::Square: {
      for (int e = 0; e < 4; ++e) {
        auto f = [&](double t) { return sign_source(square_point(e, t)); };
        for (auto [t, w] : split_rule(f, 0.0, 1.0, cells, order)) {
          g->nodes.push_back(square_point(e, t));
          g->weights.push_back(w);
        }
      }
      g->segment_breaks = {0, 1, 2, 3, 4};
      g->max_mode = cells * order / 2;
      break;
    }
    case DomainId::Ball: {
      const int ntheta = cells;
      const auto &r = gauss_legendre(ntheta);
      for (int i = 0; i < ntheta; ++i) {
        const double theta = std::acos(r.nodes[i]);
        auto f = [&](double ph) { return sign_source(sphere_point(theta, ph)); };
        for (auto [ph, w] : split_rule(f, 0.0, 2.0 * std::numbers::pi, 2 * cells, order)) {
          g->nodes.push_back(sphere_point(theta, ph));
          g->weights.push_back(r.weights[i] * w);
        }
      }
      g->max_mode = ntheta - 1;
      break;
    }
  }
  return g;
}

/// A boundary function sampled on a grid.
struct BoundaryFunction {
  GridPtr grid;
  std::vector<double> samples;
  std::string tag;

  DomainId domain() const { return grid->domain; }
};

inline BoundaryFunction sample(const GridPtr &grid, const BoundaryFn &f, std::string tag = {}) {
  BoundaryFunction out{grid, {}, std::move(tag)};
  out.samples.reserve(grid->size());
  for (const auto &p : grid->nodes) out.samples.push_back(f(p));
  return out;
}

/// Boundary L2 inner product of two sampled functions on a common grid.
inline double inner(const BoundaryFunction &a, const BoundaryFunction &b) {
  if (a.grid != b.grid) throw std::invalid_argument("boundary functions live on different grids");
  double s = 0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) s += a.grid->weights[i] * a.samples[i] * b.samples[i];
  return s;
}

/// Integral of f * g over the grid for a sampled f and a closed-form g.
inline double integrate_against(const BoundaryFunction &f, const BoundaryFn &g) {
  double s = 0;
  const auto &nodes = f.grid->nodes;
  for (std::size_t i = 0; i < nodes.size(); ++i) s += f.grid->weights[i] * f.samples[i] * g(nodes[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Orthonormal boundary bases

/// Orthonormal circle mode: index 0 is 1/sqrt(2pi); 2k-1 is cos(k theta)/sqrt(pi); 2k is sin(k theta)/sqrt(pi).
inline double circle_basis(int index, double theta) {
  if (index == 0) return 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const int k = (index + 1) / 2;
  const double c = 1.0 / std::sqrt(std::numbers::pi);
  return index % 2 == 1 ? c * std::cos(k * theta) : c * std::sin(k * theta);
}

/// Real orthonormal spherical harmonic Y_{n,l}, l in [-n, n]; l < 0 carries sin(|l| phi).
inline double real_sph_harmonic(int n, int l, double theta, double phi) {
  const int a = std::abs(l);
  double ratio = 1.0;
  for (int i = n - a + 1; i <= n + a; ++i) ratio /= i;
  const double norm = std::sqrt((2.0 * n + 1.0) / (4.0 * std::numbers::pi) * ratio);
  const double p = assoc_legendre(n, a, std::cos(theta));
  if (l == 0) return norm * p;
  const double ang = l > 0 ? std::cos(a * phi) : std::sin(a * phi);
  return std::sqrt(2.0) * norm * p * ang;
}

/// All real orthonormal spherical harmonics of degree <= N at one point, stored at n*n + n + l.
inline std::vector<double> real_sph_harmonics(int N, double theta, double phi) {
  std::vector<double> out(static_cast<std::size_t>(N + 1) * (N + 1));
  const double t = std::cos(theta), s = std::sin(theta);
  double pll = 1.0 / std::sqrt(4.0 * std::numbers::pi);
  for (int l = 0; l <= N; ++l) {
    if (l > 0) pll *= -std::sqrt((2.0 * l + 1.0) / (2.0 * l)) * s;
    const double c = l == 0 ? 1.0 : std::sqrt(2.0) * std::cos(l * phi);
    const double sn = std::sqrt(2.0) * std::sin(l * phi);
    double prev = 0.0, cur = pll, a_prev = 0.0;
    for (int n = l; n <= N; ++n) {
      if (n > l) {
        const double a = std::sqrt((4.0 * n * n - 1.0) / (static_cast<double>(n) * n - static_cast<double>(l) * l));
        const double next = a * (t * cur - (a_prev > 0 ? prev / a_prev : 0.0));
        prev = cur;
        cur = next;
        a_prev = a;
      }
      out[n * n + n + l] = c * cur;
      if (l > 0) out[n * n + n - l] = sn * cur;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dirichlet spectral catalogs

/// One Dirichlet eigenvalue with its multiplicity and index labels.
///
/// Labels: disc (k, l); square one (m, n) per member; ball (n, k).
struct DirichletMode {
  DomainId domain = DomainId::Disc;
  double E = 0;
  int multiplicity = 0;
  std::vector<std::vector<int>> labels;
};

namespace detail {

inline void merge_sorted(std::vector<DirichletMode> &modes) {
  std::stable_sort(modes.begin(), modes.end(),
                   [](const DirichletMode &a, const DirichletMode &b) { return a.E < b.E; });
  std::vector<DirichletMode> out;
  for (auto &m : modes) {
    if (!out.empty() && std::fabs(out.back().E - m.E) <= 1e-9 * std::max(m.E, 1.0)) {
      out.back().multiplicity += m.multiplicity;
      out.back().labels.insert(out.back().labels.end(), m.labels.begin(), m.labels.end());
    } else {
      out.push_back(std::move(m));
    }
  }
  modes = std::move(out);
}

} // namespace detail

/// All Dirichlet eigenvalues <= e_max, strictly increasing, with true multiplicities.
inline std::vector<DirichletMode> enumerate_modes(DomainId domain, double e_max) {
  std::vector<DirichletMode> modes;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  switch (domain) {
    case DomainId::Square: {
      const long smax = static_cast<long>(std::floor(e_max / pi2 + 1e-12));
      std::map<long, std::vector<std::vector<int>>> lattice;
      for (long m = 1; m * m + 1 <= smax; ++m)
        for (long n = 1; m * m + n * n <= smax; ++n)
          lattice[m * m + n * n].push_back({static_cast<int>(m), static_cast<int>(n)});
      for (auto &[s, labels] : lattice)
        modes.push_back({domain, pi2 * static_cast<double>(s), static_cast<int>(labels.size()), labels});
      return modes;
    }
    case DomainId::Disc:
    case DomainId::Ball: {
      const auto kind = domain == DomainId::Disc ? BesselKind::cylindrical : BesselKind::spherical;
      const double root = std::sqrt(std::max(e_max, 0.0));
      for (int k = 0;; ++k) {
        int count = 8;
        auto table = zero_cache().get(kind, k, count);
        if (table->zeros.front() > root) break;
        while (table->zeros.back() <= root) {
          count *= 2;
          table = zero_cache().get(kind, k, count);
        }
        for (std::size_t l = 0; l < table->size() && table->zeros[l] <= root; ++l) {
          const double j = table->zeros[l];
          const int mult = domain == DomainId::Disc ? (k == 0 ? 1 : 2) : 2 * k + 1;
          modes.push_back({domain, j * j, mult, {{k, static_cast<int>(l) + 1}}});
        }
      }
      detail::merge_sorted(modes);
      return modes;
    }
  }
  return modes;
}

/// Shared, immutable catalog covering at least [0, e_max]; grows geometrically on demand.
inline std::shared_ptr<const std::vector<DirichletMode>> catalog(DomainId domain, double e_max) {
  struct Slot {
    double e_max = -1;
    std::shared_ptr<const std::vector<DirichletMode>> modes;
  };
  static std::mutex mutex;
  static Slot slots[3];
  Slot &slot = slots[static_cast<int>(domain)];
  {
    std::lock_guard lock(mutex);
    if (slot.e_max >= e_max) return slot.modes;
  }
  const double target = std::max(2.0 * e_max, 200.0);
  auto modes = std::make_shared<const std::vector<DirichletMode>>(enumerate_modes(domain, target));
  std::lock_guard lock(mutex);
  if (slot.e_max < target) slot = {target, modes};
  return slot.modes;
}

/// Nearest catalog eigenvalue to z (any family) and its distance.
inline std::pair<double, double> nearest_pole(DomainId domain, std::complex<double> z) {
  const double reach = std::max(z.real(), 0.0) + std::fabs(z.imag()) + 100.0;
  const auto modes = catalog(domain, reach);
  double best = modes->front().E, dist = std::abs(z - best);
  for (const auto &m : *modes) {
    const double d = std::abs(z - m.E);
    if (d < dist) { dist = d; best = m.E; }
    if (m.E > reach) break;
  }
  return {best, dist};
}

/// Radial/angular index of one member of a mode, needed to evaluate its normal derivative.
struct ModeMember {
  int a = 0, b = 0, c = 0;
};

/// Members of a mode in a fixed order: disc (k, l, 0=cos|1=sin); square (m, n, 0); ball (n, k, l).
inline std::vector<ModeMember> members(const DirichletMode &mode) {
  std::vector<ModeMember> out;
  for (const auto &lab : mode.labels) {
    switch (mode.domain) {
      case DomainId::Disc:
        out.push_back({lab[0], lab[1], 0});
        if (lab[0] > 0) out.push_back({lab[0], lab[1], 1});
        break;
      case DomainId::Square: out.push_back({lab[0], lab[1], 0}); break;
      case DomainId::Ball:
        for (int l = -lab[0]; l <= lab[0]; ++l) out.push_back({lab[0], lab[1], l});
        break;
    }
  }
  return out;
}

/// Highest boundary frequency of a member (used for resolution checks).
inline int member_frequency(DomainId d, const ModeMember &m) {
  return d == DomainId::Square ? std::max(m.a, m.b) : m.a;
}

/// Constant factor a with d_nu u = a * (orthonormal boundary basis function) for disc and ball members.
///
/// Normalisation comes from the radial integrals int_0^1 J_k(jr)^2 r dr = J_k'(j)^2/2 and
/// int_0^1 j_n(ar)^2 r^2 dr = j_n'(a)^2/2, giving |a| = sqrt(2) j.
inline double normal_derivative_amplitude(DomainId domain, const ModeMember &m) {
  switch (domain) {
    case DomainId::Disc: {
      const double j = zero_cache().get(BesselKind::cylindrical, m.a, m.b)->zeros[m.b - 1];
      const double jp = bessel_j_prime(m.a, j);
      return std::sqrt(2.0) * j * (jp < 0 ? -1.0 : 1.0);
    }
    case DomainId::Ball: {
      const double alpha = zero_cache().get(BesselKind::spherical, m.a, m.b)->zeros[m.b - 1];
      const double jp = spherical_bessel_j_prime(m.a, alpha);
      return std::sqrt(2.0) * alpha * (jp < 0 ? -1.0 : 1.0);
    }
    case DomainId::Square: break;
  }
  throw std::invalid_argument("square normal derivatives are not a multiple of one basis function");
}

/// Normal derivative of the member of an L2-orthonormal interior eigenbasis.
inline BoundaryFn normal_derivative_fn(DomainId domain, const ModeMember &m) {
  const double pi = std::numbers::pi;
  switch (domain) {
    case DomainId::Disc: {
      const int k = m.a;
      const double amp = normal_derivative_amplitude(domain, m);
      const int index = k == 0 ? 0 : (m.c == 1 ? 2 * k : 2 * k - 1);
      return [=](const BoundaryPoint &p) { return amp * circle_basis(index, p.theta); };
    }
    case DomainId::Square: {
      const int mm = m.a, nn = m.b;
      return [=](const BoundaryPoint &p) {
        const double sm = ((mm % 2) ? -1.0 : 1.0), sn = ((nn % 2) ? -1.0 : 1.0);
        switch (p.segment) {
          case 0: return 2 * pi * (-nn) * std::sin(mm * pi * p.t);
          case 1: return 2 * pi * sm * mm * std::sin(nn * pi * p.t);
          case 2: return 2 * pi * nn * sn * std::sin(mm * pi * p.t);
          default: return 2 * pi * (-mm) * std::sin(nn * pi * p.t);
        }
      };
    }
    case DomainId::Ball: {
      const int n = m.a, l = m.c;
      const double amp = normal_derivative_amplitude(domain, m);
      return [=](const BoundaryPoint &p) { return amp * real_sph_harmonic(n, l, p.theta, p.phi); };
    }
  }
  return {};
}

inline BoundaryFunction normal_derivative(const DirichletMode &mode, std::size_t member, const GridPtr &grid) {
  const auto mem = members(mode).at(member);
  return sample(grid, normal_derivative_fn(mode.domain, mem), "dnu");
}

/// Coupling g = -(1/E) int_Gamma d_nu u psi dS, which equals (Pi psi, u).
inline double coupling(const DirichletMode &mode, std::size_t member, const BoundaryFunction &psi) {
  if (psi.domain() != mode.domain) throw std::invalid_argument("coupling: domain mismatch");
  const auto mem = members(mode).at(member);
  if (member_frequency(mode.domain, mem) > psi.grid->max_mode)
    throw ResolutionError("boundary grid resolves modes up to " + std::to_string(psi.grid->max_mode) +
                          ", member needs " + std::to_string(member_frequency(mode.domain, mem)));
  return -integrate_against(psi, normal_derivative_fn(mode.domain, mem)) / mode.E;
}

} // namespace dtn

#endif // DTN_DOMAINS_HPP
