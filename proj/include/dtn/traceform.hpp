#ifndef DTN_TRACEFORM_HPP
#define DTN_TRACEFORM_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "domains.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "specfun.hpp"

namespace dtn {

using cplx = std::complex<double>;

/// Radius around a Dirichlet eigenvalue inside which the form is not evaluated.
inline double pole_exclusion_radius(double E) { return 1e-12 * std::max(std::fabs(E), 1.0); }

/// Evaluation policy for the trace form on one catalog domain.
struct TraceFormSpec {
  DomainId domain = DomainId::Disc;
  double tolerance = 1e-10;
  int max_terms = 10000;
  GridPtr grid;
  std::optional<BoundaryFn> robin_beta;
  int families = 0;          ///< angular cutoff for disc/ball expansions; 0 means whatever the grid resolves
  int harmonic_degree = 30;  ///< square: separable harmonics per edge
  int lattice_modes = 96;    ///< square: Mittag-Leffler cutoff in m and n

  void validate() const {
    if (!(tolerance > 0.0 && tolerance <= 1e-4)) throw std::invalid_argument("tolerance must lie in (0, 1e-4]");
    if (max_terms < 1) throw std::invalid_argument("max_terms must be positive");
    if (!grid) throw std::invalid_argument("trace form spec has no grid");
    if (grid->domain != domain) throw std::invalid_argument("grid domain does not match spec domain");
    if (robin_beta)
      for (const auto &p : grid->nodes)
        if (!((*robin_beta)(p) > 0.0)) throw std::invalid_argument("Robin coefficient must be positive on the grid");
  }
};

inline int default_resolution(DomainId d) {
  switch (d) {
    case DomainId::Disc: return 256;
    case DomainId::Square: return 64;
    case DomainId::Ball: return 24;
  }
  return 64;
}

inline TraceFormSpec make_spec(DomainId d, int resolution = 0) {
  TraceFormSpec spec;
  spec.domain = d;
  spec.grid = boundary_quadrature(d, resolution > 0 ? resolution : default_resolution(d));
  if (d == DomainId::Ball) spec.families = 20;
  return spec;
}

// ---------------------------------------------------------------------------
// Mittag-Leffler branches of the disc and ball

/// One branch value with its certificate.
struct BranchValue {
  cplx value;
  int terms = 0;
  double tail_bound = 0.0;
  double pole_distance = std::numeric_limits<double>::infinity();
};

namespace detail {

/// Lower bound on the spacing of consecutive zeros of J_nu for nu >= 0.
inline constexpr double kZeroSpacing = 3.1;

inline BesselKind family_kind(DomainId d) {
  if (d == DomainId::Square) throw std::invalid_argument("the square has no Bessel branch families");
  return d == DomainId::Disc ? BesselKind::cylindrical : BesselKind::spherical;
}

inline std::shared_ptr<const ZeroTable> zeros_at_least(BesselKind kind, int order, std::size_t count) {
  return zero_cache().get(kind, order, static_cast<int>(count));
}

/// Bound on sum_{l>L} 2|z|^4 / (j_l^6 (j_l^2 - |z|)) given a = j_{L+1} with a^2 > |z|.
inline double remainder_bound(double a, double az) {
  const double a2 = a * a, a6 = a2 * a2 * a2;
  const double z4 = az * az * az * az;
  const double first = 2.0 * z4 / (a6 * (a2 - az));
  const double integral = 2.0 * z4 / (7.0 * a6 * a * (1.0 - az / a2));
  return first + integral / kZeroSpacing;
}

} // namespace detail

/// Bound on |sum_{l>L} 2z/(z - j_l^2)| for the plain branch series of one family.
///
/// Uses j_{l+1} - j_l >= 3.1 and integral comparison; requires j_{L+1}^2 > |z|.
inline double tail_bound(DomainId domain, int family, cplx z, int L) {
  if (L < 0) throw std::invalid_argument("tail_bound: L must be >= 0");
  const auto table = detail::zeros_at_least(detail::family_kind(domain), family, L + 1);
  const double a = (*table)[L];
  const double az = std::abs(z), r = std::sqrt(az);
  if (a <= r) throw NumericalError("tail bound unavailable: zero " + std::to_string(L + 1) + " lies below sqrt|z|");
  if (az == 0.0) return 0.0;
  return 2.0 * az / (a * a - az) + (r / detail::kZeroSpacing) * std::log((a + r) / (a - r));
}

/// Branch order + sum_l 2z/(z - j_l^2) of one family, with the first three Rayleigh sums
/// subtracted so the remainder decays like j^-8.
///
/// With `skip` = l >= 1 the function returns the regular part at its own pole z = j_l^2.
inline BranchValue family_branch(DomainId domain, int family, cplx z, double tol = 1e-10, int max_terms = 10000,
                                 int skip = 0) {
  const auto kind = detail::family_kind(domain);
  const double nu = kind == BesselKind::cylindrical ? family : family + 0.5;
  const cplx z2 = z * z, z3 = z2 * z, z4 = z2 * z2;
  const cplx head = static_cast<double>(family) - 2.0 * z * rayleigh_sum1(nu) - 2.0 * z2 * rayleigh_sum2(nu) -
                    2.0 * z3 * rayleigh_sum3(nu);
  const double az = std::abs(z);
  auto table = detail::zeros_at_least(kind, family, 16);
  BranchValue out;
  cplx sum = 0.0, extra = 0.0;
  for (int L = 0;; ++L) {
    if (static_cast<std::size_t>(L) >= table->size()) table = detail::zeros_at_least(kind, family, 2 * table->size());
    const double a = (*table)[L];
    out.pole_distance = std::min(out.pole_distance, std::abs(z - a * a));
    if (a * a > az) {
      const double bound = detail::remainder_bound(a, az);
      const cplx value = head - 2.0 * z4 * sum + extra;
      if (bound <= tol * std::max(std::abs(value), 1.0)) {
        out.value = value;
        out.terms = L;
        out.tail_bound = bound;
        return out;
      }
    }
    if (L >= max_terms)
      throw TruncationError("branch series for family " + std::to_string(family) + " not converged after " +
                            std::to_string(max_terms) + " terms");
    const double E = a * a;
    const double dist = std::abs(z - E);
    if (L + 1 == skip) {
      extra += 8.0;
      continue;
    }
    if (dist <= pole_exclusion_radius(E)) throw PoleError("z lies on the pole " + std::to_string(E), E);
    const double a6 = E * E * E;
    sum += 1.0 / (a6 * (E - z));
  }
}

inline BranchValue disc_branch(int k, cplx z, double tol = 1e-10, int max_terms = 10000) {
  return family_branch(DomainId::Disc, k, z, tol, max_terms);
}

inline BranchValue ball_branch(int n, cplx z, double tol = 1e-10, int max_terms = 10000) {
  return family_branch(DomainId::Ball, n, z, tol, max_terms);
}

/// Closed form k - sqrt(z) J_{k+1}(sqrt z)/J_k(sqrt z) on the real axis (k + x I_{k+1}(x)/I_k(x) for z = -x^2).
inline double disc_branch_closed(int k, double z) {
  if (z == 0.0) return k;
  if (z < 0.0) {
    const double x = std::sqrt(-z);
    return k + x * bessel_i_ratio(k, x);
  }
  const double r = std::sqrt(z);
  auto table = detail::zeros_at_least(BesselKind::cylindrical, k, 16);
  while (table->zeros.back() <= r) table = detail::zeros_at_least(BesselKind::cylindrical, k, 2 * table->size());
  for (double j : table->zeros)
    if (std::fabs(z - j * j) <= pole_exclusion_radius(j * j)) throw PoleError("z lies on a disc pole", j * j);
  return k - r * bessel_j(k + 1, r) / bessel_j(k, r);
}

/// Closed form sqrt(z) cot(sqrt z) - 1 of the radial ball branch (x coth x - 1 for z = -x^2).
inline double ball_branch_closed0(double z) {
  if (z == 0.0) return 0.0;
  if (z < 0.0) {
    const double x = std::sqrt(-z);
    return x / std::tanh(x) - 1.0;
  }
  const double r = std::sqrt(z);
  const double k = std::round(r / std::numbers::pi);
  if (k >= 1 && std::fabs(z - k * k * std::numbers::pi * std::numbers::pi) <= pole_exclusion_radius(z))
    throw PoleError("z lies on a ball pole", k * k * std::numbers::pi * std::numbers::pi);
  return r * std::cos(r) / std::sin(r) - 1.0;
}

// ---------------------------------------------------------------------------
// Square: harmonic extension basis

namespace detail {

struct HarmonicSample {
  double value = 0, dx = 0, dy = 0;
};

/// sinh(k pi s)/sinh(k pi) and its s-derivative, stable for large k.
inline std::pair<double, double> sinh_profile(int k, double s) {
  const double kp = k * std::numbers::pi;
  const double lead = std::exp(kp * (s - 1.0));
  const double tail = std::exp(-2.0 * kp * s), denom = 1.0 - std::exp(-2.0 * kp);
  return {lead * (1.0 - tail) / denom, kp * lead * (1.0 + tail) / denom};
}

inline double outward_normal_derivative(const BoundaryPoint &p, const HarmonicSample &h) {
  switch (p.segment) {
    case 0: return -h.dy;
    case 1: return h.dx;
    case 2: return h.dy;
    default: return -h.dx;
  }
}

/// Harmonic functions on the unit square: 1, x, y, xy, and for each edge and k <= degree the
/// separable mode sin(k pi t) sinh(k pi d)/sinh(k pi) with d the distance from the opposite edge.
class SquareHarmonicBasis {
public:
  explicit SquareHarmonicBasis(int degree) : degree_(degree) {
    const int rule = 4 * degree + 64;
    const auto &r = gauss_legendre(rule);
    const std::size_t n = size();
    Matrix energy(n, n), gram(n, n);
    std::vector<HarmonicSample> h(n);
    for (int e = 0; e < 4; ++e)
      for (int q = 0; q < rule; ++q) {
        const auto p = square_point(e, 0.5 * (1.0 + r.nodes[q]));
        const double w = 0.5 * r.weights[q];
        evaluate(p.x, p.y, h);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            energy(i, j) += w * h[i].value * outward_normal_derivative(p, h[j]);
            gram(i, j) += w * h[i].value * h[j].value;
          }
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) energy(i, j) = energy(j, i) = 0.5 * (energy(i, j) + energy(j, i));
    energy_ = std::move(energy);
    gram_ = std::make_unique<LU>(std::move(gram));
  }

  int degree() const { return degree_; }
  std::size_t size() const { return 4 + 4 * static_cast<std::size_t>(degree_); }
  const Matrix &energy() const { return energy_; }

  void evaluate(double x, double y, std::span<HarmonicSample> out) const {
    out[0] = {1.0, 0.0, 0.0};
    out[1] = {x, 1.0, 0.0};
    out[2] = {y, 0.0, 1.0};
    out[3] = {x * y, y, x};
    const double pi = std::numbers::pi;
    for (int k = 1; k <= degree_; ++k) {
      const double kp = k * pi;
      const double sx = std::sin(kp * x), cx = std::cos(kp * x);
      const double sy = std::sin(kp * y), cy = std::cos(kp * y);
      const std::size_t base = 4 + 4 * static_cast<std::size_t>(k - 1);
      {
        auto [s, ds] = sinh_profile(k, 1.0 - y);
        out[base + 0] = {sx * s, kp * cx * s, -sx * ds};
      }
      {
        auto [s, ds] = sinh_profile(k, x);
        out[base + 1] = {sy * s, sy * ds, kp * cy * s};
      }
      {
        auto [s, ds] = sinh_profile(k, y);
        out[base + 2] = {sx * s, kp * cx * s, sx * ds};
      }
      {
        auto [s, ds] = sinh_profile(k, 1.0 - x);
        out[base + 3] = {sy * s, -sy * ds, kp * cy * s};
      }
    }
  }

  /// Coefficients of the L2(boundary) projection of f onto the traces of the basis.
  std::vector<double> fit(const BoundaryFunction &f) const {
    const std::size_t n = size();
    std::vector<double> rhs(n, 0.0);
    std::vector<HarmonicSample> h(n);
    const auto &g = *f.grid;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (f.samples[i] == 0.0) continue;
      evaluate(g.nodes[i].x, g.nodes[i].y, h);
      const double wf = g.weights[i] * f.samples[i];
      for (std::size_t j = 0; j < n; ++j) rhs[j] += wf * h[j].value;
    }
    return gram_->solve(rhs);
  }

private:
  int degree_;
  Matrix energy_;
  std::unique_ptr<LU> gram_;
};

inline const SquareHarmonicBasis &square_basis(int degree) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<const SquareHarmonicBasis>> cache;
  std::lock_guard lock(mutex);
  auto &slot = cache[degree];
  if (!slot) slot = std::make_unique<const SquareHarmonicBasis>(degree);
  return *slot;
}

/// Edge sine transforms int_0^1 sin(k pi t) f_e(t) dt for k = 1..M, stored at e*M + k-1.
inline std::vector<double> edge_sine_transforms(const BoundaryFunction &f, int M) {
  std::vector<double> out(4 * static_cast<std::size_t>(M), 0.0);
  const auto &g = *f.grid;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (f.samples[i] == 0.0) continue;
    const auto &p = g.nodes[i];
    const double a = std::numbers::pi * p.t, c2 = 2.0 * std::cos(a);
    const double wf = g.weights[i] * f.samples[i];
    double prev = 0.0, cur = std::sin(a);
    double *row = out.data() + static_cast<std::size_t>(p.segment) * M;
    for (int k = 1; k <= M; ++k) {
      row[k - 1] += wf * cur;
      const double next = c2 * cur - prev;
      prev = cur;
      cur = next;
    }
  }
  return out;
}

/// int_Gamma d_nu u_{mn} f dS for the orthonormal eigenfunction 2 sin(m pi x) sin(n pi y).
inline double square_moment(std::span<const double> sines, int M, int m, int n) {
  const double sm = (m % 2) ? -1.0 : 1.0, sn = (n % 2) ? -1.0 : 1.0;
  return 2.0 * std::numbers::pi *
         (-n * sines[m - 1] + sm * m * sines[M + n - 1] + n * sn * sines[2 * M + m - 1] - m * sines[3 * M + n - 1]);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Spectral expansion of boundary functions

/// A boundary function in the spectral coordinates used by the form.
///
/// Disc: circle basis coefficients. Ball: real spherical harmonic coefficients at n*n + n + l.
/// Square: harmonic-extension coefficients at degree D and D/2, plus edge sine transforms.
struct Expansion {
  DomainId domain = DomainId::Disc;
  int modes = 0;
  std::vector<double> coeffs;
  std::vector<double> coeffs_half;
  std::vector<double> edge_sines;
};

inline int family_cutoff(const TraceFormSpec &spec, const BoundaryFunction &f) {
  const int resolvable = f.grid->max_mode;
  return spec.families > 0 ? std::min(spec.families, resolvable) : resolvable;
}

inline std::vector<double> circle_coefficients(const BoundaryFunction &f, int K) {
  std::vector<double> c(2 * static_cast<std::size_t>(K) + 1, 0.0);
  const auto &g = *f.grid;
  const double c0 = 1.0 / std::sqrt(2.0 * std::numbers::pi), ck = 1.0 / std::sqrt(std::numbers::pi);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double wf = g.weights[i] * f.samples[i];
    if (wf == 0.0) continue;
    const double th = g.nodes[i].theta;
    c[0] += wf * c0;
    const double cs = std::cos(th), sn = std::sin(th);
    double ck_cos = cs, ck_sin = sn;
    for (int k = 1; k <= K; ++k) {
      c[2 * k - 1] += wf * ck * ck_cos;
      c[2 * k] += wf * ck * ck_sin;
      const double nc = ck_cos * cs - ck_sin * sn;
      ck_sin = ck_sin * cs + ck_cos * sn;
      ck_cos = nc;
    }
  }
  return c;
}

inline std::vector<double> sphere_coefficients(const BoundaryFunction &f, int N) {
  const std::size_t count = static_cast<std::size_t>(N + 1) * (N + 1);
  std::vector<double> c(count, 0.0);
  const auto &g = *f.grid;
  std::vector<double> legendre(count);  // normalised P_n^|l| at index n*n + n + |l|
  double cached_theta = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto &p = g.nodes[i];
    if (p.theta != cached_theta) {
      cached_theta = p.theta;
      legendre = real_sph_harmonics(N, p.theta, 0.0);
      for (int n = 1; n <= N; ++n)
        for (int l = 1; l <= n; ++l) legendre[n * n + n + l] /= std::sqrt(2.0);
    }
    const double wf = g.weights[i] * f.samples[i];
    if (wf == 0.0) continue;
    for (int l = 0; l <= N; ++l) {
      const double cl = std::cos(l * p.phi), sl = std::sin(l * p.phi);
      for (int n = l; n <= N; ++n) {
        const double base = legendre[n * n + n + l];
        if (l == 0) {
          c[n * n + n] += wf * base;
        } else {
          c[n * n + n + l] += wf * std::sqrt(2.0) * base * cl;
          c[n * n + n - l] += wf * std::sqrt(2.0) * base * sl;
        }
      }
    }
  }
  return c;
}

inline Expansion expand(const TraceFormSpec &spec, const BoundaryFunction &f) {
  if (f.domain() != spec.domain) throw std::invalid_argument("boundary function domain does not match the spec");
  Expansion out;
  out.domain = spec.domain;
  switch (spec.domain) {
    case DomainId::Disc:
      out.modes = family_cutoff(spec, f);
      out.coeffs = circle_coefficients(f, out.modes);
      break;
    case DomainId::Ball:
      out.modes = family_cutoff(spec, f);
      out.coeffs = sphere_coefficients(f, out.modes);
      break;
    case DomainId::Square:
      out.modes = std::min(spec.lattice_modes, f.grid->max_mode);
      out.coeffs = detail::square_basis(spec.harmonic_degree).fit(f);
      out.coeffs_half = detail::square_basis(std::max(spec.harmonic_degree / 2, 1)).fit(f);
      out.edge_sines = detail::edge_sine_transforms(f, out.modes);
      break;
  }
  return out;
}

/// int_Gamma d_nu v f dS for every member of a mode, from boundary coefficients of f.
inline std::vector<double> member_fluxes(const DirichletMode &mode, const BoundaryFunction &f) {
  const auto mems = members(mode);
  int top = 0;
  for (const auto &m : mems) top = std::max(top, member_frequency(mode.domain, m));
  if (top > f.grid->max_mode) throw ResolutionError("member_fluxes: grid too coarse for mode member");
  std::vector<double> out;
  out.reserve(mems.size());
  switch (mode.domain) {
    case DomainId::Disc: {
      const auto c = circle_coefficients(f, top);
      for (const auto &m : mems) {
        const int index = m.a == 0 ? 0 : (m.c == 1 ? 2 * m.a : 2 * m.a - 1);
        out.push_back(normal_derivative_amplitude(mode.domain, m) * c[index]);
      }
      break;
    }
    case DomainId::Ball: {
      const auto c = sphere_coefficients(f, top);
      for (const auto &m : mems) out.push_back(normal_derivative_amplitude(mode.domain, m) * c[m.a * m.a + m.a + m.c]);
      break;
    }
    case DomainId::Square: {
      const auto sines = detail::edge_sine_transforms(f, top);
      for (const auto &m : mems) out.push_back(detail::square_moment(sines, top, m.a, m.b));
      break;
    }
  }
  return out;
}

/// Squared L2(Gamma) norm of the normal derivative of a member.
inline double normal_derivative_norm2(DomainId domain, const ModeMember &m) {
  if (domain == DomainId::Square) return 4.0 * std::numbers::pi * std::numbers::pi * (m.a * m.a + m.b * m.b);
  const double a = normal_derivative_amplitude(domain, m);
  return a * a;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Value of the bilinear trace form with its truncation certificate.
struct EvalResult {
  cplx value;
  int truncation_level = 0;
  double tail_bound = 0.0;
  double pole_distance = std::numeric_limits<double>::infinity();
  bool tail_certified = true;
};

/// Evaluates the form at a fixed z, caching per-family branch values across calls.
class FormEvaluator {
public:
  FormEvaluator(const TraceFormSpec &spec, cplx z) : spec_(spec), z_(z) {
    const auto [pole, dist] = nearest_pole(spec.domain, z);
    if (dist <= pole_exclusion_radius(pole)) throw PoleError("z lies within the exclusion radius of E = " +
                                                             std::to_string(pole), pole);
    pole_distance_ = dist;
  }

  cplx z() const { return z_; }
  double pole_distance() const { return pole_distance_; }

  const BranchValue &branch(int family) {
    auto it = branches_.find(family);
    if (it == branches_.end())
      it = branches_.emplace(family, family_branch(spec_.domain, family, z_, spec_.tolerance, spec_.max_terms)).first;
    return it->second;
  }

  EvalResult operator()(const Expansion &a, const Expansion &b) {
    EvalResult r;
    r.pole_distance = pole_distance_;
    if (spec_.domain == DomainId::Square) return square(a, b, r);
    const int K = std::min(a.modes, b.modes);
    std::vector<double> weights(K + 1, 0.0);
    double total = 0.0;
    for (int k = 0; k <= K; ++k) {
      double w = 0.0;
      if (spec_.domain == DomainId::Disc) {
        w = k == 0 ? a.coeffs[0] * b.coeffs[0]
                   : a.coeffs[2 * k - 1] * b.coeffs[2 * k - 1] + a.coeffs[2 * k] * b.coeffs[2 * k];
      } else {
        for (int l = -k; l <= k; ++l) w += a.coeffs[k * k + k + l] * b.coeffs[k * k + k + l];
      }
      weights[k] = w;
      total += std::fabs(w);
    }
    cplx value = 0.0;
    for (int k = 0; k <= K; ++k) {
      if (std::fabs(weights[k]) <= 1e-15 * total) continue;
      const auto &bv = branch(k);
      value += weights[k] * bv.value;
      r.tail_bound += std::fabs(weights[k]) * bv.tail_bound;
      r.truncation_level = std::max(r.truncation_level, bv.terms);
    }
    r.value = value;
    return r;
  }

private:
  EvalResult square(const Expansion &a, const Expansion &b, EvalResult &r) const {
    const auto &full = detail::square_basis(spec_.harmonic_degree);
    const auto &half = detail::square_basis(std::max(spec_.harmonic_degree / 2, 1));
    const double energy = bilinear(full.energy(), a.coeffs, b.coeffs);
    const double energy_half = bilinear(half.energy(), a.coeffs_half, b.coeffs_half);
    const int M = std::min(a.modes, b.modes);
    const double pi2 = std::numbers::pi * std::numbers::pi;
    cplx sum = 0.0;
    double shell = 0.0;
    for (int m = 1; m <= M; ++m)
      for (int n = 1; n <= M; ++n) {
        const double E = pi2 * (m * m + n * n);
        const double ma = detail::square_moment(a.edge_sines, a.modes, m, n);
        const double mb = detail::square_moment(b.edge_sines, b.modes, m, n);
        const cplx term = z_ / (E * (z_ - E)) * (ma * mb);
        sum += term;
        if (2 * std::max(m, n) > M) shell += std::abs(term);
      }
    r.value = energy + sum;
    r.truncation_level = M;
    r.tail_bound = shell + std::fabs(energy - energy_half);
    r.tail_certified = false;
    return r;
  }

  const TraceFormSpec &spec_;
  cplx z_;
  double pole_distance_ = 0.0;
  std::map<int, BranchValue> branches_;
};

inline EvalResult eval_form(const TraceFormSpec &spec, cplx z, const Expansion &phi, const Expansion &psi) {
  FormEvaluator ev(spec, z);
  return ev(phi, psi);
}

inline EvalResult eval_form(const TraceFormSpec &spec, cplx z, const BoundaryFunction &phi,
                            const BoundaryFunction &psi) {
  return eval_form(spec, z, expand(spec, phi), expand(spec, psi));
}

/// Robin form: the trace form plus int_Gamma beta phi psi dS.
inline EvalResult robin_form(const TraceFormSpec &spec, cplx z, const BoundaryFunction &phi,
                             const BoundaryFunction &psi) {
  if (!spec.robin_beta) throw std::invalid_argument("robin_form needs a Robin coefficient");
  if (phi.grid != psi.grid) throw std::invalid_argument("robin_form: arguments live on different grids");
  EvalResult r = eval_form(spec, z, phi, psi);
  const auto &g = *phi.grid;
  double offset = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    offset += g.weights[i] * (*spec.robin_beta)(g.nodes[i]) * phi.samples[i] * psi.samples[i];
  r.value += offset;
  return r;
}

/// First `count` functions of the domain's orthonormal boundary basis.
///
/// Square: arclength Fourier modes 1/2, cos(pi k s/2)/sqrt2, sin(pi k s/2)/sqrt2.
inline BoundaryFn basis_function(DomainId domain, int index) {
  switch (domain) {
    case DomainId::Disc:
      return [index](const BoundaryPoint &p) { return circle_basis(index, p.theta); };
    case DomainId::Ball: {
      const int n = static_cast<int>(std::floor(std::sqrt(static_cast<double>(index)) + 1e-9));
      const int l = index - n * n - n;
      return [n, l](const BoundaryPoint &p) { return real_sph_harmonic(n, l, p.theta, p.phi); };
    }
    case DomainId::Square:
      return [index](const BoundaryPoint &p) {
        if (index == 0) return 0.5;
        const int k = (index + 1) / 2;
        const double a = 0.5 * std::numbers::pi * k * p.s;
        return (index % 2 == 1 ? std::cos(a) : std::sin(a)) / std::sqrt(2.0);
      };
  }
  return {};
}

inline std::vector<BoundaryFunction> standard_basis(const GridPtr &grid, int count) {
  std::vector<BoundaryFunction> out;
  for (int i = 0; i < count; ++i) out.push_back(sample(grid, basis_function(grid->domain, i), "basis"));
  return out;
}

/// Galerkin matrix with the largest entry tail bound and the distance to the nearest pole.
struct GalerkinSystem {
  Matrix matrix;
  double tail_bound = 0.0;
  double pole_distance = 0.0;
};

/// Matrix of the form at real lambda on an orthonormal basis; symmetric by construction.
inline GalerkinSystem galerkin_system(const TraceFormSpec &spec, double lambda,
                                      std::span<const BoundaryFunction> basis) {
  const std::size_t n = basis.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      if (std::fabs(inner(basis[i], basis[j]) - (i == j ? 1.0 : 0.0)) > 1e-10)
        throw std::invalid_argument("galerkin_matrix: basis is not orthonormal on the grid");
  std::vector<Expansion> exps;
  exps.reserve(n);
  for (const auto &b : basis) exps.push_back(expand(spec, b));
  FormEvaluator ev(spec, lambda);
  GalerkinSystem out{Matrix(n, n), 0.0, ev.pole_distance()};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const auto r = ev(exps[i], exps[j]);
      out.matrix(i, j) = out.matrix(j, i) = r.value.real();
      out.tail_bound = std::max(out.tail_bound, r.tail_bound);
    }
  return out;
}

inline Matrix galerkin_matrix(const TraceFormSpec &spec, double lambda, std::span<const BoundaryFunction> basis) {
  return galerkin_system(spec, lambda, basis).matrix;
}

// ---------------------------------------------------------------------------
// Laurent data

/// Scalar Laurent data of the diagonal form at a Dirichlet eigenvalue.
struct LaurentData {
  double E = 0.0;
  double residue = 0.0;
  double regular_part = 0.0;
  int left_limit = 0;   ///< -1 for -infinity, 0 when removable
  int right_limit = 0;  ///< +1 for +infinity, 0 when removable
};

/// Sum over the members of (int_Gamma d_nu v psi dS)^2.
inline double mode_residue(const DirichletMode &mode, const BoundaryFunction &psi) {
  double res = 0.0;
  for (std::size_t i = 0; i < members(mode).size(); ++i) {
    const double flux = -mode.E * coupling(mode, i, psi);
    res += flux * flux;
  }
  return res;
}

inline LaurentData laurent_data(const TraceFormSpec &spec, const DirichletMode &mode, const BoundaryFunction &psi) {
  LaurentData out;
  out.E = mode.E;
  out.residue = mode_residue(mode, psi);
  const Expansion ex = expand(spec, psi);
  if (spec.domain == DomainId::Square) {
    const auto &full = detail::square_basis(spec.harmonic_degree);
    double reg = bilinear(full.energy(), ex.coeffs, ex.coeffs);
    const double pi2 = std::numbers::pi * std::numbers::pi;
    for (int m = 1; m <= ex.modes; ++m)
      for (int n = 1; n <= ex.modes; ++n) {
        const double Ep = pi2 * (m * m + n * n);
        const double mom = detail::square_moment(ex.edge_sines, ex.modes, m, n);
        if (std::fabs(Ep - mode.E) <= 1e-9 * mode.E) reg += mom * mom / mode.E;
        else reg += mode.E * mom * mom / (Ep * (mode.E - Ep));
      }
    out.regular_part = reg;
  } else {
    std::map<int, int> pole_index;
    for (const auto &lab : mode.labels) pole_index[lab[0]] = lab[1];
    double reg = 0.0;
    for (int k = 0; k <= ex.modes; ++k) {
      double w = 0.0;
      if (spec.domain == DomainId::Disc) {
        w = k == 0 ? ex.coeffs[0] * ex.coeffs[0]
                   : ex.coeffs[2 * k - 1] * ex.coeffs[2 * k - 1] + ex.coeffs[2 * k] * ex.coeffs[2 * k];
      } else {
        for (int l = -k; l <= k; ++l) w += ex.coeffs[k * k + k + l] * ex.coeffs[k * k + k + l];
      }
      if (w == 0.0) continue;
      const auto it = pole_index.find(k);
      const int skip = it == pole_index.end() ? 0 : it->second;
      reg += w * family_branch(spec.domain, k, mode.E, spec.tolerance, spec.max_terms, skip).value.real();
    }
    out.regular_part = reg;
  }
  double norm2 = 0.0;
  for (std::size_t i = 0; i < psi.samples.size(); ++i) norm2 += psi.grid->weights[i] * psi.samples[i] * psi.samples[i];
  if (out.residue > 1e-12 * std::max(1.0, mode.E * norm2)) {
    out.left_limit = -1;
    out.right_limit = 1;
  }
  return out;
}

/// Residue of f at E from the mean of (z - E) f(z) over `points` nodes on the circle |z - E| = radius.
inline double contour_residue(const std::function<cplx(cplx)> &f, double E, double radius, int points = 8) {
  cplx acc = 0.0;
  for (int j = 0; j < points; ++j) {
    const double ang = 2.0 * std::numbers::pi * (j + 0.5) / points;
    const cplx dz = std::polar(radius, ang);
    acc += dz * f(E + dz);
  }
  return (acc / static_cast<double>(points)).real();
}

// ---------------------------------------------------------------------------
// Branch root finding

/// Root of branch(lambda) = target on (lo, hi) for a branch decreasing from +inf at lo to -inf at hi.
///
/// lo may be -infinity; hi must be a pole.
inline double branch_solve(const std::function<double(double)> &branch, double target, double lo, double hi) {
  const auto f = [&](double x) { return branch(x) - target; };
  const double tol = 1e-9 * std::max(1.0, std::fabs(target));
  double a = 0.0, b = 0.0, fa = 0.0, fb = 0.0;
  if (std::isinf(lo)) {
    double step = std::max(1.0, 0.1 * std::fabs(hi));
    for (a = hi - step; (fa = f(a)) <= 0.0; a = hi - step) {
      step *= 2.0;
      if (step > 1e12) throw ConvergenceError("branch_solve: no left bracket");
    }
  } else {
    double off = 1e-3 * (hi - lo);
    for (a = lo + off; (fa = f(a)) <= 0.0; a = lo + off) {
      off *= 0.1;
      if (off < 1e-11 * (hi - lo)) throw ConvergenceError("branch_solve: no left bracket");
    }
  }
  const double width = std::isinf(lo) ? std::max(1.0, hi - a) : hi - lo;
  double off = 1e-3 * width;
  for (b = hi - off; (fb = f(b)) >= 0.0; b = hi - off) {
    off *= 0.1;
    if (off < 1e-11 * width) throw ConvergenceError("branch_solve: no right bracket");
  }
  if (std::fabs(fa) <= tol) return a;
  if (std::fabs(fb) <= tol) return b;
  int side = 0;
  for (int it = 0; it < 300; ++it) {
    double c = (a * fb - b * fa) / (fb - fa);
    if (!(c > a && c < b)) c = 0.5 * (a + b);
    const double fc = f(c);
    if (std::fabs(fc) <= tol || b - a <= 4e-16 * std::max(1.0, std::fabs(c))) return c;
    if (fc > 0) {
      a = c;
      fa = fc;
      if (side == 1) fb *= 0.5;
      side = 1;
    } else {
      b = c;
      fb = fc;
      if (side == -1) fa *= 0.5;
      side = -1;
    }
  }
  throw ConvergenceError("branch_solve: iteration limit reached");
}

} // namespace dtn

#endif // DTN_TRACEFORM_HPP
