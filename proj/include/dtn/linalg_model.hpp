#ifndef DTN_LINALG_MODEL_HPP
#define DTN_LINALG_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "parallel.hpp"

namespace dtn {

/// Form E on R^n with trace map J: R^n -> R^m.
///
/// The H-inner product is (Pu, Pv) with P the orthogonal projection onto ker J, so
/// E_lambda[v] = v^T (E - lambda P) v and ker J is dense in H as the theory requires.
struct FiniteModel {
  std::size_t n = 0;
  std::size_t m = 0;
  Matrix E;
  Matrix J;
  std::uint64_t seed = 0;

  /// Checks shapes, symmetry, positive semidefiniteness and surjectivity of J.
  void validate() const {
    if (m == 0 || m > n) throw std::invalid_argument("model: need 0 < m <= n");
    if (E.rows() != n || E.cols() != n) throw std::invalid_argument("model: E must be n x n");
    if (J.rows() != m || J.cols() != n) throw std::invalid_argument("model: J must be m x n");
    const double scale = std::max(max_abs(E), 1e-300);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (std::fabs(E(i, j) - E(j, i)) > 1e-12 * scale) throw std::invalid_argument("model: E is not symmetric");
    const auto eig = jacobi_eigen(E);
    const double norm = std::max(std::fabs(eig.values.front()), std::fabs(eig.values.back()));
    if (eig.values.front() < -1e-12 * norm) throw std::invalid_argument("model: E is not positive semidefinite");
    if (row_rank(J) != m) throw std::invalid_argument("model: J is not surjective");
  }
};

/// ker J and the E-harmonic complement H_har = {u : E(u, v) = 0 for v in ker J}, as column bases.
struct Decomposition {
  Matrix kernel;    ///< n x (n - m), orthonormal
  Matrix harmonic;  ///< n x m, orthonormal
  std::size_t rank = 0;  ///< rank of [kernel | harmonic]; n certifies the direct sum
  double trace_condition = 0.0;  ///< |det J H| > 0 certifies H_har intersect ker J = {0}
};

inline Decomposition decompose(const FiniteModel &model) {
  Decomposition d;
  d.kernel = null_space(model.J);
  const Matrix ld = transpose(d.kernel) * model.E * d.kernel;
  const double enorm = std::max(max_abs(model.E), 1e-300);
  if (ld.rows() > 0) {
    const auto eig = jacobi_eigen(ld);
    for (double e : eig.values)
      if (std::fabs(e) <= 1e-10 * enorm) throw DecompositionError("decompose: 0 is an eigenvalue of the Dirichlet operator");
  }
  const Matrix constraint = transpose(d.kernel) * model.E;
  if (row_rank(constraint) != constraint.rows()) throw DecompositionError("decompose: harmonic constraint is rank deficient");
  d.harmonic = null_space(constraint);
  Matrix joined(model.n, model.n);
  for (std::size_t i = 0; i < model.n; ++i) {
    for (std::size_t c = 0; c < d.kernel.cols(); ++c) joined(i, c) = d.kernel(i, c);
    for (std::size_t c = 0; c < d.harmonic.cols(); ++c) joined(i, d.kernel.cols() + c) = d.harmonic(i, c);
  }
  d.rank = row_rank(joined, 1e-10);
  if (d.rank != model.n) throw DecompositionError("decompose: ker J and H_har do not span the space");
  const auto jh = householder_qr(model.J * d.harmonic);
  d.trace_condition = 1.0;
  for (std::size_t i = 0; i < model.m; ++i) d.trace_condition *= std::fabs(jh.r(i, i));
  if (!(d.trace_condition > 0.0)) throw DecompositionError("decompose: H_har meets ker J");
  return d;
}

/// Dirichlet operator L_D = K^T E K on ker J (in the kernel basis K) with its eigenpairs.
struct DirichletSpectrum {
  Matrix operator_matrix;     ///< (n - m) x (n - m)
  std::vector<double> values; ///< E_k ascending
  Matrix vectors;             ///< eigenvectors in kernel coordinates (columns)
  Matrix ambient;             ///< eigenvectors u_k in R^n (columns), orthonormal in ker J
};

inline DirichletSpectrum dirichlet_operator(const FiniteModel &model, const Decomposition &d) {
  DirichletSpectrum s;
  s.operator_matrix = transpose(d.kernel) * model.E * d.kernel;
  const auto eig = jacobi_eigen(s.operator_matrix);
  s.values = eig.values;
  s.vectors = eig.vectors;
  s.ambient = d.kernel * eig.vectors;
  return s;
}

/// Poisson operator Pi = H (J H)^{-1}: the E-harmonic lift of boundary data.
inline Matrix poisson(const FiniteModel &model, const Decomposition &d) {
  const Matrix jh = model.J * d.harmonic;
  const LU lu(jh);
  return d.harmonic * lu.solve(Matrix::identity(model.m));
}

/// Everything the checks need, computed once per model.
struct ModelAnalysis {
  FiniteModel model;
  Decomposition decomposition;
  DirichletSpectrum dirichlet;
  Matrix Pi;           ///< n x m
  Matrix boundary;     ///< A = K^T Pi, (n - m) x m
  Matrix check_form;   ///< Pi^T E Pi, the form at z = 0 in coordinates
  double norm = 0.0;   ///< spectral norm of E
};

inline ModelAnalysis analyze(const FiniteModel &model) {
  ModelAnalysis a;
  a.model = model;
  a.decomposition = decompose(model);
  a.dirichlet = dirichlet_operator(model, a.decomposition);
  a.Pi = poisson(model, a.decomposition);
  a.boundary = transpose(a.decomposition.kernel) * a.Pi;
  a.check_form = transpose(a.Pi) * model.E * a.Pi;
  const auto eig = jacobi_eigen(model.E);
  a.norm = std::max(std::fabs(eig.values.front()), std::fabs(eig.values.back()));
  return a;
}

inline double model_scale(const ModelAnalysis &a, std::span<const double> psi) {
  return std::max({1.0, a.norm, dot(psi, psi)});
}

namespace detail {

inline void require_off_spectrum(const ModelAnalysis &a, double lambda) {
  for (double e : a.dirichlet.values)
    if (std::fabs(lambda - e) <= 1e-10 * std::max(a.norm, 1e-300))
      throw PoleError("finite model: lambda lies on the Dirichlet spectrum", e);
}

/// Distance from lambda to the Dirichlet spectrum (infinity if ker J = {0}).
inline double spectral_gap(const ModelAnalysis &a, double lambda) {
  double g = std::numeric_limits<double>::infinity();
  for (double e : a.dirichlet.values) g = std::min(g, std::fabs(lambda - e));
  return g;
}

inline Matrix shifted(const Matrix &l, double lambda) {
  Matrix s = l;
  for (std::size_t i = 0; i < s.rows(); ++i) s(i, i) -= lambda;
  return s;
}

/// Route (b): check form minus lambda (L_D (L_D - lambda)^{-1} a, a) with a = K^T Pi psi.
inline double representation_value(const ModelAnalysis &a, double lambda, std::span<const double> psi) {
  const auto pipsi = a.Pi * psi;
  const double base = bilinear(a.model.E, pipsi, pipsi);
  if (a.boundary.rows() == 0) return base;
  const auto coords = a.boundary * psi;
  const auto x = LU(shifted(a.dirichlet.operator_matrix, lambda)).solve(coords);
  return base - lambda * dot(coords, a.dirichlet.operator_matrix * x);
}

} // namespace detail

/// The trace form by the three routes.
struct ThreeWay {
  double stationary = 0.0;      ///< (a) constrained stationary value
  double representation = 0.0;  ///< (b) representation formula
  double mittag_leffler = 0.0;  ///< (c) eigen-expansion
  bool indefinite = false;      ///< lambda above E_0: (a) is a saddle value, not a minimum
  std::vector<double> minimizer;  ///< stationary point of (a) in R^n

  double max_discrepancy() const {
    return std::max({std::fabs(stationary - representation), std::fabs(stationary - mittag_leffler),
                     std::fabs(representation - mittag_leffler)});
  }
};

inline ThreeWay trace_eval_threeway(const ModelAnalysis &a, double lambda, std::span<const double> psi) {
  if (psi.size() != a.model.m) throw std::invalid_argument("threeway: psi must have m entries");
  detail::require_off_spectrum(a, lambda);
  ThreeWay out;
  const auto &K = a.decomposition.kernel;
  const std::size_t n = a.model.n;

  // (a) least-norm particular solution plus null-space stationarity of v^T (E - lambda P) v.
  const Matrix J = a.model.J;
  const auto y = solve(J * transpose(J), psi);
  std::vector<double> v0 = transpose(J) * y;
  const Matrix P = K * transpose(K);
  const Matrix form = a.model.E - lambda * P;
  std::vector<double> v = v0;
  if (K.cols() > 0) {
    const Matrix hessian = transpose(K) * form * K;
    const auto grad = transpose(K) * (form * v0);
    const auto w = LU(hessian).solve(grad);
    const auto kw = K * w;
    for (std::size_t i = 0; i < n; ++i) v[i] -= kw[i];
  }
  out.stationary = bilinear(form, v, v);
  out.minimizer = v;
  out.indefinite = !a.dirichlet.values.empty() && lambda > a.dirichlet.values.front();

  // (b) representation formula.
  out.representation = detail::representation_value(a, lambda, psi);

  // (c) finite Mittag-Leffler sum.
  const auto pipsi = a.Pi * psi;
  double ml = bilinear(a.model.E, pipsi, pipsi);
  for (std::size_t k = 0; k < a.dirichlet.values.size(); ++k) {
    const auto uk = a.dirichlet.ambient.col(k);
    const double c = dot(uk, pipsi);
    const double ek = a.dirichlet.values[k];
    ml += lambda * ek / (lambda - ek) * c * c;
  }
  out.mittag_leffler = ml;
  return out;
}

/// Pi psi + lambda (L_D - lambda)^{-1} P Pi psi, lifted to R^n: the stationary point predicted by theory.
inline std::vector<double> predicted_minimizer(const ModelAnalysis &a, double lambda, std::span<const double> psi) {
  auto out = a.Pi * psi;
  if (a.boundary.rows() == 0) return out;
  const auto coords = a.boundary * psi;
  auto w = LU(detail::shifted(a.dirichlet.operator_matrix, lambda)).solve(coords);
  for (double &x : w) x *= lambda;
  const auto lift = a.decomposition.kernel * w;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += lift[i];
  return out;
}

struct DerivativeCheck {
  double analytic = 0.0;         ///< -|L_D (L_D - lambda)^{-1} a|^2
  double finite_difference = 0.0;
  double quoted_expression = 0.0;  ///< -|L_D^{1/2} (L_D - lambda)^{-1} a|^2
  double step = 0.0;

  double relative_error() const {
    const double denom = std::max(std::fabs(analytic), std::numeric_limits<double>::min());
    return analytic == 0.0 && finite_difference == 0.0 ? 0.0 : std::fabs(analytic - finite_difference) / denom;
  }
};

inline DerivativeCheck derivative_check(const ModelAnalysis &a, double lambda, std::span<const double> psi) {
  detail::require_off_spectrum(a, lambda);
  DerivativeCheck out;
  if (a.boundary.rows() > 0) {
    const auto coords = a.boundary * psi;
    const auto x = LU(detail::shifted(a.dirichlet.operator_matrix, lambda)).solve(coords);
    const auto lx = a.dirichlet.operator_matrix * x;
    out.analytic = -dot(lx, lx);
    out.quoted_expression = -dot(x, lx);
  }
  const double gap = detail::spectral_gap(a, lambda);
  out.step = 1e-6 * (std::isfinite(gap) ? gap : std::max(1.0, std::fabs(lambda)));
  out.finite_difference = (detail::representation_value(a, lambda + out.step, psi) -
                           detail::representation_value(a, lambda - out.step, psi)) /
                          (2.0 * out.step);
  return out;
}

struct LaurentCheck {
  double E = 0.0;
  std::size_t multiplicity = 0;
  double residue_formula = 0.0;  ///< E^2 sum over the eigenspace of (u_k, Pi psi)^2
  double numeric_limit = 0.0;
  double offset = 0.0;
  int left_sign = 0;   ///< sign of the form just below E
  int right_sign = 0;  ///< sign of the form just above E
  bool removable = false;

  double relative_error() const {
    if (removable) return 0.0;
    return std::fabs(residue_formula - numeric_limit) / std::max(std::fabs(residue_formula), 1e-300);
  }
};

/// Residue at the k-th Dirichlet eigenvalue (its full eigenspace) against the numeric limit
/// of (z - E) times the representation formula at |z - E| = 1e-5 gap.
inline LaurentCheck laurent_check(const ModelAnalysis &a, std::size_t k, std::span<const double> psi) {
  const auto &vals = a.dirichlet.values;
  if (k >= vals.size()) throw std::out_of_range("laurent_check: eigenvalue index");
  LaurentCheck out;
  out.E = vals[k];
  const double cluster = 1e-8 * std::max(a.norm, 1.0);
  double gap = std::numeric_limits<double>::infinity();
  const auto pipsi = a.Pi * psi;
  double sum = 0.0;
  for (std::size_t j = 0; j < vals.size(); ++j) {
    if (std::fabs(vals[j] - out.E) <= cluster) {
      const double c = dot(a.dirichlet.ambient.col(j), pipsi);
      sum += c * c;
      ++out.multiplicity;
    } else {
      gap = std::min(gap, std::fabs(vals[j] - out.E));
    }
  }
  if (!std::isfinite(gap)) gap = std::max(out.E, 1.0);
  out.residue_formula = out.E * out.E * sum;
  out.offset = 1e-5 * gap;
  const auto h = [&](double delta) {
    const double up = delta * detail::representation_value(a, out.E + delta, psi);
    const double down = -delta * detail::representation_value(a, out.E - delta, psi);
    return 0.5 * (up + down);
  };
  out.numeric_limit = (4.0 * h(out.offset) - h(2.0 * out.offset)) / 3.0;
  const double scale = model_scale(a, psi);
  out.removable = std::fabs(out.residue_formula) <= 1e-12 * scale && std::fabs(out.numeric_limit) <= 1e-12 * scale;
  // One-sided signs at a distance where the pole term dominates the regular part.
  const double regular = 0.5 * (detail::representation_value(a, out.E + out.offset, psi) +
                                detail::representation_value(a, out.E - out.offset, psi));
  double side = out.offset;
  if (std::fabs(regular) > 0 && out.residue_formula > 0)
    side = std::min(side, std::max(0.1 * out.residue_formula / std::fabs(regular), 1e-12 * std::max(out.E, 1.0)));
  const double below = detail::representation_value(a, out.E - side, psi);
  const double above = detail::representation_value(a, out.E + side, psi);
  out.left_sign = below > 0 ? 1 : (below < 0 ? -1 : 0);
  out.right_sign = above > 0 ? 1 : (above < 0 ? -1 : 0);
  return out;
}

/// Generator of the trace form in the coordinate basis of R^m.
inline Matrix trace_generator(const ModelAnalysis &a, double lambda) {
  detail::require_off_spectrum(a, lambda);
  Matrix g = a.check_form;
  if (a.boundary.rows() == 0 || lambda == 0.0) return g;
  const Matrix x = LU(detail::shifted(a.dirichlet.operator_matrix, lambda)).solve(a.boundary);
  const Matrix correction = transpose(a.boundary) * (a.dirichlet.operator_matrix * x);
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) -= lambda * 0.5 * (correction(i, j) + correction(j, i));
  return g;
}

struct GeneratorPositivity {
  double lambda = 0.0;
  bool is_pp = false;            ///< every off-diagonal entry <= 0 (to 1e-12 max |entry|)
  double offdiag_max = 0.0;
  std::size_t witness_i = 0, witness_j = 0;
  bool exp_sampling_pp = false;  ///< exp(-t L) entrywise >= -1e-10 max |entry| at all sampled t
  double exp_min_relative = 0.0;
  std::vector<double> times;
  bool consistent() const { return is_pp == exp_sampling_pp; }
};

inline GeneratorPositivity generator_positivity(const ModelAnalysis &a, double lambda) {
  GeneratorPositivity out;
  out.lambda = lambda;
  const Matrix g = trace_generator(a, lambda);
  const std::size_t m = g.rows();
  const double scale = std::max(max_abs(g), 1e-300);
  out.offdiag_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j && g(i, j) > out.offdiag_max) {
        out.offdiag_max = g(i, j);
        out.witness_i = i;
        out.witness_j = j;
      }
  if (m == 1) out.offdiag_max = 0.0;
  out.is_pp = out.offdiag_max <= 1e-12 * scale;

  // exp(-tL) = exp(-t mu) exp(-t (L - mu)); the positive factor does not affect signs.
  const double mu = jacobi_eigen(g).values.front();
  const Matrix centred = detail::shifted(g, mu);
  out.times = {0.1, 1.0, 10.0, 1e-3 / scale};
  out.exp_sampling_pp = true;
  out.exp_min_relative = std::numeric_limits<double>::infinity();
  for (double t : out.times) {
    const Matrix T = expm(-t * centred);
    const double big = std::max(max_abs(T), 1e-300);
    for (double v : T.values()) out.exp_min_relative = std::min(out.exp_min_relative, v / big);
  }
  out.exp_sampling_pp = out.exp_min_relative >= -1e-10;
  return out;
}

// ---------------------------------------------------------------------------
// Model generators

/// E = B^T B + shift I with B_ij ~ N(0, 1/n) and Gaussian J.
inline FiniteModel random_model(std::size_t n, std::size_t m, std::mt19937_64 &rng, double shift = 0.1) {
  std::normal_distribution<double> normal(0.0, 1.0);
  FiniteModel model;
  model.n = n;
  model.m = m;
  Matrix B(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) B(i, j) = normal(rng) / std::sqrt(static_cast<double>(n));
  model.E = transpose(B) * B;
  for (std::size_t i = 0; i < n; ++i) model.E(i, i) += shift;
  model.J = Matrix(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) model.J(i, j) = normal(rng);
  return model;
}

/// Symmetric, strictly diagonally dominant chain with nonpositive couplings; J reads the coordinates
/// listed in `boundary`.
inline FiniteModel m_matrix_model(std::size_t n, std::span<const std::size_t> boundary, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> coupling(0.2, 1.0), extra(0.01, 0.5);
  FiniteModel model;
  model.n = n;
  model.m = boundary.size();
  model.E = Matrix(n, n);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double c = coupling(rng);
    model.E(i, i + 1) = model.E(i + 1, i) = -c;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row += std::fabs(model.E(i, j));
    model.E(i, i) = row + extra(rng);
  }
  model.J = Matrix(model.m, n);
  for (std::size_t r = 0; r < boundary.size(); ++r) model.J(r, boundary[r]) = 1.0;
  return model;
}

/// The model with E replaced by (I - u u^T) E (I - u u^T), u the unit ground Dirichlet eigenvector:
/// still positive semidefinite, but with 0 in the Dirichlet spectrum.
inline FiniteModel singular_perturbation(const ModelAnalysis &a) {
  FiniteModel out = a.model;
  const auto u = a.dirichlet.ambient.col(0);
  Matrix proj = Matrix::identity(out.n);
  for (std::size_t i = 0; i < out.n; ++i)
    for (std::size_t j = 0; j < out.n; ++j) proj(i, j) -= u[i] * u[j];
  out.E = proj * out.E * proj;
  for (std::size_t i = 0; i < out.n; ++i)
    for (std::size_t j = i + 1; j < out.n; ++j) out.E(i, j) = out.E(j, i) = 0.5 * (out.E(i, j) + out.E(j, i));
  return out;
}

/// E + c P: the same functional at lambda + c, with a different harmonic space.
inline FiniteModel shifted_model(const ModelAnalysis &a, double c) {
  FiniteModel out = a.model;
  const auto &K = a.decomposition.kernel;
  out.E = out.E + c * (K * transpose(K));
  return out;
}

/// Sample points: one below E_0, the midpoint of every gap, one above the top.
inline std::vector<double> gap_points(const ModelAnalysis &a) {
  const auto &v = a.dirichlet.values;
  if (v.empty()) return {-1.0, 0.5, 1.0};
  std::vector<double> out{0.5 * v.front(), -0.5 * v.front()};
  for (std::size_t k = 0; k + 1 < v.size(); ++k)
    if (v[k + 1] - v[k] > 1e-6 * std::max(a.norm, 1.0)) out.push_back(0.5 * (v[k] + v[k + 1]));
  out.push_back(v.back() + 0.5 * (v.back() - v.front()) + 0.5);
  return out;
}

/// Smallest relative separation of distinct Dirichlet eigenvalues.
inline double min_relative_gap(const ModelAnalysis &a) {
  const auto &v = a.dirichlet.values;
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < v.size(); ++k) g = std::min(g, (v[k + 1] - v[k]) / std::max(a.norm, 1.0));
  return g;
}

// ---------------------------------------------------------------------------
// Suite

/// One named residual with its tolerance.
struct Residual {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  std::size_t samples = 0;
  bool passed() const { return value <= tolerance; }
};

struct SuiteConfig {
  std::size_t n = 0;      ///< 0: random in [3, 20]
  std::size_t m = 0;      ///< 0: random in [1, n - 1]
  std::size_t trials = 200;
  std::uint64_t seed = 7;
  std::size_t beurling_deny_lambdas = 5;
};

struct SuiteReport {
  SuiteConfig config;
  std::size_t models = 0;
  std::size_t rejected = 0;  ///< generated models discarded for singular or clustered Dirichlet spectra
  std::vector<Residual> residuals;
  bool passed() const {
    return std::all_of(residuals.begin(), residuals.end(), [](const Residual &r) { return r.passed(); });
  }
  const Residual &get(const std::string &name) const {
    for (const auto &r : residuals)
      if (r.name == name) return r;
    throw std::out_of_range("no residual named " + name);
  }
};

namespace detail {

struct TrialResiduals {
  double threeway = 0, mittag_leffler = 0, derivative = 0, laurent = 0, minimizer = 0, uniqueness = 0,
         principle = 0, isometry = 0, poisson_inverse = 0, shift = 0;
  double laurent_sign_failures = 0, beurling_deny_disagreements = 0, rank_failures = 0, singular_undetected = 0,
         derivative_sign_failures = 0;
  std::size_t threeway_n = 0, derivative_n = 0, laurent_n = 0, beurling_deny_n = 0, principle_n = 0;
  std::size_t rejections = 0;
};

inline std::vector<double> gaussian_vector(std::size_t len, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(len);
  for (double &x : v) x = normal(rng);
  return v;
}

inline void model_checks(const ModelAnalysis &a, std::mt19937_64 &rng, std::size_t bd_lambdas, TrialResiduals &r);

inline TrialResiduals random_trial(const SuiteConfig &cfg, std::size_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(trial)};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<std::size_t> pick_n(3, 20);
  const std::size_t n = cfg.n > 0 ? cfg.n : pick_n(rng);
  std::uniform_int_distribution<std::size_t> pick_m(1, n - 1);
  const std::size_t m = cfg.m > 0 ? cfg.m : pick_m(rng);
  TrialResiduals r;
  ModelAnalysis a;
  for (bool accepted = false; !accepted;) {
    FiniteModel model = random_model(n, m, rng);
    model.seed = cfg.seed;
    try {
      a = analyze(model);
      accepted = min_relative_gap(a) >= 1e-3;
    } catch (const DecompositionError &) {
    }
    if (!accepted && ++r.rejections > 1000) throw NumericalError("model suite: generator keeps producing rejected models");
  }
  model_checks(a, rng, cfg.beurling_deny_lambdas, r);
  return r;
}

/// Every per-model check of the suite on one analysed model, accumulated into r.
inline void model_checks(const ModelAnalysis &a, std::mt19937_64 &rng, std::size_t bd_lambdas, TrialResiduals &r) {
  const std::size_t n = a.model.n, m = a.model.m;
  if (a.decomposition.rank != n) r.rank_failures += 1;

  const auto psi = gaussian_vector(m, rng);
  const double scale = model_scale(a, psi);
  const auto lambdas = gap_points(a);
  for (double lambda : lambdas) {
    const auto tw = trace_eval_threeway(a, lambda, psi);
    r.threeway = std::max(r.threeway, tw.max_discrepancy() / scale);
    r.mittag_leffler = std::max(r.mittag_leffler, std::fabs(tw.mittag_leffler - tw.representation) / scale);
    const auto predicted = predicted_minimizer(a, lambda, psi);
    double diff = 0, size = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      diff = std::max(diff, std::fabs(predicted[i] - tw.minimizer[i]));
      size = std::max(size, std::fabs(tw.minimizer[i]));
    }
    r.minimizer = std::max(r.minimizer, diff / size);
    ++r.threeway_n;

    const auto dc = derivative_check(a, lambda, psi);
    r.derivative = std::max(r.derivative, dc.relative_error());
    if (dc.analytic > 0) r.derivative_sign_failures += 1;
    ++r.derivative_n;

    // u = minimizer + (u - minimizer) with the second part in ker J, for a random feasible u.
    const auto noise = gaussian_vector(n - m, rng);
    auto u = tw.minimizer;
    const auto lift = a.decomposition.kernel * noise;
    for (std::size_t i = 0; i < n; ++i) u[i] += lift[i];
    std::vector<double> rest(n);
    for (std::size_t i = 0; i < n; ++i) rest[i] = u[i] - tw.minimizer[i];
    r.uniqueness = std::max(r.uniqueness, norm2(a.model.J * rest) / scale);

    if (!a.dirichlet.values.empty() && lambda < a.dirichlet.values.front()) {
      const Matrix form = a.model.E - lambda * (a.decomposition.kernel * transpose(a.decomposition.kernel));
      for (int s = 0; s < 100; ++s) {
        auto v = tw.minimizer;
        const auto step = a.decomposition.kernel * gaussian_vector(n - m, rng);
        for (std::size_t i = 0; i < n; ++i) v[i] += step[i];
        r.principle = std::max(r.principle, (tw.stationary - bilinear(form, v, v)) / scale);
        ++r.principle_n;
      }
    }
  }

  for (std::size_t k = 0; k < a.dirichlet.values.size(); ++k) {
    const auto lc = laurent_check(a, k, psi);
    r.laurent = std::max(r.laurent, lc.relative_error());
    if (!lc.removable && lc.residue_formula > 0 && (lc.left_sign != -1 || lc.right_sign != 1))
      r.laurent_sign_failures += 1;
    ++r.laurent_n;
  }

  // Beurling-Deny: off-diagonal test against exponential sampling.
  std::vector<double> bd = lambdas;
  bd.resize(std::min(bd.size(), bd_lambdas));
  while (bd.size() < bd_lambdas) bd.push_back(-static_cast<double>(bd.size()));
  for (double lambda : bd) {
    const auto gp = generator_positivity(a, lambda);
    if (!gp.consistent()) r.beurling_deny_disagreements += 1;
    ++r.beurling_deny_n;
  }

  // Isometry: the form at 0 computed by route (a) plus |psi|^2 equals E[Pi psi] + |J Pi psi|^2.
  const auto tw0 = trace_eval_threeway(a, 0.0, psi);
  const auto pipsi = a.Pi * psi;
  const auto jpi = a.model.J * pipsi;
  r.isometry = std::abs(tw0.stationary + dot(psi, psi) - bilinear(a.model.E, pipsi, pipsi) - dot(jpi, jpi)) / scale;

  // Pi J u = u on the harmonic basis.
  const Matrix round_trip = a.Pi * (a.model.J * a.decomposition.harmonic);
  r.poisson_inverse = max_abs(round_trip - a.decomposition.harmonic);

  // Shifting E by c P shifts the spectral parameter by c.
  const double c = 0.5 * (1.0 + (a.dirichlet.values.empty() ? 0.0 : a.dirichlet.values.front()));
  const auto shifted_analysis = analyze(shifted_model(a, c));
  for (double lambda : lambdas) {
    const double base = representation_value(a, lambda, psi);
    const double moved = representation_value(shifted_analysis, lambda + c, psi);
    r.shift = std::max(r.shift, std::fabs(base - moved) / scale);
    const auto g0 = generator_positivity(a, lambda), g1 = generator_positivity(shifted_analysis, lambda + c);
    if (g0.is_pp != g1.is_pp) r.shift = std::max(r.shift, 1.0);
  }

  // Making L_D singular must be refused.
  try {
    (void)decompose(singular_perturbation(a));
    r.singular_undetected += 1;
  } catch (const DecompositionError &) {
  }
}

struct MMatrixResiduals {
  double pi_negative = 0.0;
  double below_ground_failures = 0.0;
  double flip_failures = 0.0;
  double beurling_deny_disagreements = 0.0;
};

inline MMatrixResiduals m_matrix_trial(const SuiteConfig &cfg, std::size_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed ^ 0x4D4D), static_cast<std::uint32_t>(trial)};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<std::size_t> pick_n(4, 20);
  const std::size_t n = pick_n(rng);
  const std::vector<std::size_t> boundary{0, n - 1};
  const auto a = analyze(m_matrix_model(n, boundary, rng));
  MMatrixResiduals r;
  for (double v : a.Pi.values()) r.pi_negative = std::max(r.pi_negative, -v);
  const double e0 = a.dirichlet.values.front();
  for (double lambda : {-1.0, 0.0, 0.5 * e0, 0.99 * e0}) {
    const auto gp = generator_positivity(a, lambda);
    if (!gp.is_pp) r.below_ground_failures += 1;
    if (!gp.consistent()) r.beurling_deny_disagreements += 1;
  }
  const double gap = a.dirichlet.values.size() > 1 ? a.dirichlet.values[1] - e0 : e0;
  const auto left = generator_positivity(a, e0 - 1e-3 * gap), right = generator_positivity(a, e0 + 1e-3 * gap);
  if (!(left.is_pp && !right.is_pp)) r.flip_failures += 1;
  if (!left.consistent() || !right.consistent()) r.beurling_deny_disagreements += 1;
  return r;
}

} // namespace detail

namespace detail {
inline std::vector<Residual> model_residuals(const TrialResiduals &agg, std::size_t models);
} // namespace detail

/// Random-model verification sweep with named residuals (maxima over all models and sample points).
inline SuiteReport run_model_suite(const SuiteConfig &cfg) {
  if (cfg.n != 0 && (cfg.n < 2 || (cfg.m != 0 && cfg.m >= cfg.n)))
    throw std::invalid_argument("model suite: need n >= 2 and 0 < m < n");
  if (cfg.trials == 0) throw std::invalid_argument("model suite: trials must be positive");
  std::vector<detail::TrialResiduals> trials(cfg.trials);
  std::vector<detail::MMatrixResiduals> mtrials(cfg.trials);
  parallel_for(cfg.trials, [&](std::size_t i) {
    trials[i] = detail::random_trial(cfg, i);
    mtrials[i] = detail::m_matrix_trial(cfg, i);
  });
  SuiteReport rep;
  rep.config = cfg;
  detail::TrialResiduals agg;
  detail::MMatrixResiduals magg;
  for (const auto &t : trials) {
    rep.rejected += t.rejections;
    ++rep.models;
    agg.threeway = std::max(agg.threeway, t.threeway);
    agg.mittag_leffler = std::max(agg.mittag_leffler, t.mittag_leffler);
    agg.derivative = std::max(agg.derivative, t.derivative);
    agg.laurent = std::max(agg.laurent, t.laurent);
    agg.minimizer = std::max(agg.minimizer, t.minimizer);
    agg.uniqueness = std::max(agg.uniqueness, t.uniqueness);
    agg.principle = std::max(agg.principle, t.principle);
    agg.isometry = std::max(agg.isometry, t.isometry);
    agg.poisson_inverse = std::max(agg.poisson_inverse, t.poisson_inverse);
    agg.shift = std::max(agg.shift, t.shift);
    agg.laurent_sign_failures += t.laurent_sign_failures;
    agg.beurling_deny_disagreements += t.beurling_deny_disagreements;
    agg.rank_failures += t.rank_failures;
    agg.singular_undetected += t.singular_undetected;
    agg.derivative_sign_failures += t.derivative_sign_failures;
    agg.threeway_n += t.threeway_n;
    agg.derivative_n += t.derivative_n;
    agg.laurent_n += t.laurent_n;
    agg.beurling_deny_n += t.beurling_deny_n;
    agg.principle_n += t.principle_n;
  }
  for (const auto &t : mtrials) {
    magg.pi_negative = std::max(magg.pi_negative, t.pi_negative);
    magg.below_ground_failures += t.below_ground_failures;
    magg.flip_failures += t.flip_failures;
    magg.beurling_deny_disagreements += t.beurling_deny_disagreements;
  }
  const std::size_t mm = cfg.trials;
  rep.residuals = detail::model_residuals(agg, rep.models);
  for (auto &r : rep.residuals)
    if (r.name == "beurling_deny_disagreements") {
      r.value += magg.beurling_deny_disagreements;
      r.samples += 6 * mm;
    }
  const std::vector<Residual> m_matrix = {
      {"poisson_positivity", magg.pi_negative, 1e-10, mm},
      {"m_matrix_below_ground_failures", magg.below_ground_failures, 0.0, 4 * mm},
      {"m_matrix_flip_failures", magg.flip_failures, 0.0, mm},
  };
  rep.residuals.insert(rep.residuals.end(), m_matrix.begin(), m_matrix.end());
  return rep;
}

namespace detail {

inline std::vector<Residual> model_residuals(const TrialResiduals &agg, std::size_t models) {
  return {
      {"threeway_agreement", agg.threeway, 1e-9, agg.threeway_n},
      {"mittag_leffler_exactness", agg.mittag_leffler, 1e-10, agg.threeway_n},
      {"minimizer_reconstruction", agg.minimizer, 1e-9, agg.threeway_n},
      {"uniqueness_kernel_part", agg.uniqueness, 1e-11, agg.threeway_n},
      {"dirichlet_principle", agg.principle, 1e-10, agg.principle_n},
      {"derivative_vs_finite_difference", agg.derivative, 1e-6, agg.derivative_n},
      {"derivative_sign_failures", agg.derivative_sign_failures, 0.0, agg.derivative_n},
      {"laurent_limit", agg.laurent, 1e-6, agg.laurent_n},
      {"laurent_sign_failures", agg.laurent_sign_failures, 0.0, agg.laurent_n},
      {"beurling_deny_disagreements", agg.beurling_deny_disagreements, 0.0, agg.beurling_deny_n},
      {"poisson_isometry", agg.isometry, 1e-10, models},
      {"poisson_inverse", agg.poisson_inverse, 1e-11, models},
      {"shift_invariance", agg.shift, 1e-9, agg.threeway_n},
      {"rank_certificate_failures", agg.rank_failures, 0.0, models},
      {"singular_dirichlet_undetected", agg.singular_undetected, 0.0, models},
  };
}

} // namespace detail

/// Residual checks of one model (the per-model part of the suite).
struct ModelReport {
  ModelAnalysis analysis;
  std::vector<Residual> residuals;
  bool passed() const {
    return std::all_of(residuals.begin(), residuals.end(), [](const Residual &r) { return r.passed(); });
  }
};

inline ModelReport check_model(const FiniteModel &model, std::uint64_t seed = 7, std::size_t bd_lambdas = 5) {
  model.validate();
  ModelReport rep;
  rep.analysis = analyze(model);
  std::mt19937_64 rng(seed);
  detail::TrialResiduals r;
  detail::model_checks(rep.analysis, rng, bd_lambdas, r);
  rep.residuals = detail::model_residuals(r, 1);
  return rep;
}

} // namespace dtn

#endif // DTN_LINALG_MODEL_HPP
