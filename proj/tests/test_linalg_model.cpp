#include <cmath>
#include <random>

#include "doctest.h"
#include "dtn/linalg_model.hpp"

using namespace dtn;

namespace {

FiniteModel coordinate_model(const Matrix &E, std::size_t m) {
  FiniteModel model;
  model.n = E.rows();
  model.m = m;
  model.E = E;
  model.J = Matrix(m, model.n);
  for (std::size_t i = 0; i < m; ++i) model.J(i, i) = 1.0;
  return model;
}

std::vector<double> gaussian(std::size_t len, std::mt19937_64 &rng) {
  std::normal_distribution<double> nd;
  std::vector<double> v(len);
  for (double &x : v) x = nd(rng);
  return v;
}

ModelAnalysis random_analysis(std::size_t n, std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return analyze(random_model(n, m, rng));
}

} // namespace

TEST_CASE("model validation") {
  std::mt19937_64 rng(1);
  auto model = random_model(5, 2, rng);
  CHECK_NOTHROW(model.validate());
  auto bad = model;
  bad.E(0, 1) += 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = model;
  for (std::size_t j = 0; j < 5; ++j) bad.J(1, j) = 2.0 * bad.J(0, j);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = model;
  bad.E(0, 0) = -5.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("decompose: injective J and identity form") {
  std::mt19937_64 rng(2);
  auto model = random_model(4, 4, rng);
  const auto d = decompose(model);
  CHECK(d.kernel.cols() == 0);
  CHECK(d.harmonic.cols() == 4);
  CHECK(d.rank == 4);

  const auto id = coordinate_model(Matrix::identity(6), 2);
  const auto a = analyze(id);
  CHECK(a.decomposition.harmonic.cols() == 2);
  // span of the first two coordinate vectors: the projector onto it is diag(1, 1, 0, ...).
  const Matrix proj = a.decomposition.harmonic * transpose(a.decomposition.harmonic);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) CHECK(std::fabs(proj(i, j) - (i == j && i < 2 ? 1.0 : 0.0)) <= 1e-14);
  for (double e : a.dirichlet.values) CHECK(e == doctest::Approx(1.0).epsilon(1e-14));
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::fabs(a.Pi(i, j) - (i == j ? 1.0 : 0.0)) <= 1e-14);
}

TEST_CASE("decompose detects a singular Dirichlet operator") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = random_analysis(8 + seed % 5, 3, seed);
    CHECK(a.decomposition.rank == a.model.n);
    CHECK_THROWS_AS(decompose(singular_perturbation(a)), DecompositionError);
  }
}

TEST_CASE("Dirichlet operator of the second-difference form") {
  const std::size_t n = 10;
  Matrix E(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    E(i, i) = 2.0;
    if (i + 1 < n) E(i, i + 1) = E(i + 1, i) = -1.0;
  }
  FiniteModel model;
  model.n = n;
  model.m = 2;
  model.E = E;
  model.J = Matrix(2, n);
  model.J(0, 0) = model.J(1, n - 1) = 1.0;
  const auto a = analyze(model);
  // Independent route: the explicit compression to the interior coordinates.
  Matrix interior(n - 2, n - 2);
  for (std::size_t i = 0; i < n - 2; ++i)
    for (std::size_t j = 0; j < n - 2; ++j) interior(i, j) = E(i + 1, j + 1);
  const auto direct = jacobi_eigen(interior);
  REQUIRE(direct.values.size() == a.dirichlet.values.size());
  for (std::size_t k = 0; k < direct.values.size(); ++k) {
    CHECK(a.dirichlet.values[k] == doctest::Approx(direct.values[k]).epsilon(1e-13));
    const double s = std::sin((k + 1) * std::numbers::pi / (2.0 * (n - 1)));
    CHECK(a.dirichlet.values[k] == doctest::Approx(4 * s * s).epsilon(1e-12));
  }
}

TEST_CASE("Dirichlet spectrum does not depend on the kernel basis") {
  const auto a = random_analysis(9, 3, 5);
  std::mt19937_64 rng(6);
  const std::size_t r = a.decomposition.kernel.cols();
  Matrix g(r, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) g(i, j) = gaussian(1, rng)[0];
  const auto q = householder_qr(g).q;
  const Matrix other = a.decomposition.kernel * q;
  const auto eig = jacobi_eigen(transpose(other) * a.model.E * other);
  for (std::size_t k = 0; k < r; ++k) CHECK(eig.values[k] == doctest::Approx(a.dirichlet.values[k]).epsilon(1e-12));
}

TEST_CASE("Poisson operator") {
  std::mt19937_64 rng(7);
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    const auto a = random_analysis(12, 4, seed);
    CHECK(max_abs(a.model.J * a.Pi - Matrix::identity(4)) <= 1e-12);
    // range in H_har: E(Pi psi, v) = 0 for v in ker J.
    CHECK(max_abs(transpose(a.decomposition.kernel) * a.model.E * a.Pi) <= 1e-12 * a.norm);
    // Pi J u = u on H_har.
    CHECK(max_abs(a.Pi * (a.model.J * a.decomposition.harmonic) - a.decomposition.harmonic) <= 1e-11);
    for (int t = 0; t < 50; ++t) {
      const auto psi = gaussian(4, rng);
      const auto pipsi = a.Pi * std::span<const double>(psi);
      const double form = bilinear(a.check_form, psi, psi);
      const auto jp = a.model.J * std::span<const double>(pipsi);
      const double lhs = form + dot(psi, psi);
      const double rhs = bilinear(a.model.E, pipsi, pipsi) + dot(jp, jp);
      CHECK(std::fabs(lhs - rhs) <= 1e-10 * model_scale(a, psi));
    }
  }
}

TEST_CASE("Poisson positivity for M-matrix forms") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 6 + t % 9;
    const std::vector<std::size_t> boundary{0, n / 2, n - 1};
    const auto a = analyze(m_matrix_model(n, boundary, rng));
    for (double v : a.Pi.values()) CHECK(v >= -1e-12);
  }
}

TEST_CASE("three routes agree") {
  std::mt19937_64 rng(9);
  for (std::uint64_t seed = 30; seed < 60; ++seed) {
    const auto a = random_analysis(6 + seed % 12, 1 + seed % 5, seed);
    const auto psi = gaussian(a.model.m, rng);
    const auto zero = trace_eval_threeway(a, 0.0, psi);
    const auto pipsi = a.Pi * std::span<const double>(psi);
    const double energy = bilinear(a.model.E, pipsi, pipsi);
    const double scale = model_scale(a, psi);
    CHECK(std::fabs(zero.stationary - energy) <= 1e-10 * scale);
    CHECK(std::fabs(zero.representation - energy) <= 1e-12 * scale);
    CHECK(std::fabs(zero.mittag_leffler - energy) <= 1e-12 * scale);
    for (double lam : gap_points(a)) {
      const auto r = trace_eval_threeway(a, lam, psi);
      CHECK(r.max_discrepancy() <= 1e-9 * scale);
      CHECK(r.indefinite == (lam > a.dirichlet.values.front()));
      const auto w = predicted_minimizer(a, lam, psi);
      double diff = 0;
      for (std::size_t i = 0; i < w.size(); ++i) diff = std::max(diff, std::fabs(w[i] - r.minimizer[i]));
      CHECK(diff <= 1e-9 * std::max(1.0, norm2(w)));
    }
  }
}

TEST_CASE("pole proximity is refused") {
  const auto a = random_analysis(8, 3, 3);
  const std::vector<double> psi{1.0, 0.0, -1.0};
  CHECK_THROWS_AS(trace_eval_threeway(a, a.dirichlet.values[1], psi), PoleError);
  CHECK_THROWS_AS(derivative_check(a, a.dirichlet.values[0], psi), PoleError);
}

TEST_CASE("Dirichlet principle below the ground eigenvalue") {
  std::mt19937_64 rng(12);
  for (std::uint64_t seed = 70; seed < 80; ++seed) {
    const auto a = random_analysis(10, 3, seed);
    const auto psi = gaussian(3, rng);
    const double lam = 0.5 * a.dirichlet.values.front();
    const auto r = trace_eval_threeway(a, lam, psi);
    const Matrix P = a.decomposition.kernel * transpose(a.decomposition.kernel);
    const Matrix form = a.model.E - lam * P;
    for (int t = 0; t < 100; ++t) {
      auto v = r.minimizer;
      const auto c = gaussian(a.decomposition.kernel.cols(), rng);
      const auto dv = a.decomposition.kernel * std::span<const double>(c);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += dv[i];
      CHECK(bilinear(form, v, v) >= r.stationary - 1e-10 * model_scale(a, psi));
    }
    // minimizer minus Pi psi lies in ker J.
    const auto pipsi = a.Pi * std::span<const double>(psi);
    std::vector<double> rest(r.minimizer.size());
    for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = r.minimizer[i] - pipsi[i];
    CHECK(norm2(a.model.J * std::span<const double>(rest)) <= 1e-11 * std::max(1.0, norm2(rest)));
  }
}

TEST_CASE("derivative of the form") {
  std::mt19937_64 rng(13);
  const auto a = random_analysis(11, 4, 21);
  const std::vector<double> zero(4, 0.0);
  for (double lam : gap_points(a)) {
    const auto d0 = derivative_check(a, lam, zero);
    CHECK(d0.analytic == 0.0);
    const auto psi = gaussian(4, rng);
    const auto d = derivative_check(a, lam, psi);
    CHECK(d.analytic <= 0);
    CHECK(d.relative_error() <= 1e-6);
    std::vector<double> twice = psi;
    for (double &x : twice) x *= 2;
    CHECK(derivative_check(a, lam, twice).analytic == doctest::Approx(4 * d.analytic).epsilon(1e-12));
  }
}

TEST_CASE("Laurent residues") {
  std::mt19937_64 rng(14);
  for (std::uint64_t seed = 40; seed < 50; ++seed) {
    const auto a = random_analysis(9, 3, seed);
    const auto psi = gaussian(3, rng);
    for (std::size_t k = 0; k < a.dirichlet.values.size(); ++k) {
      const auto c = laurent_check(a, k, psi);
      CHECK(c.residue_formula >= 0);
      CHECK(c.relative_error() <= 1e-6);
      if (!c.removable) {
        CHECK(c.left_sign == -1);
        CHECK(c.right_sign == 1);
      }
    }
  }
}

TEST_CASE("removable pole when Pi psi is orthogonal to the eigenspace") {
  const auto a = random_analysis(9, 3, 77);
  // Choose psi in the kernel of u_0^T Pi (a 2-dimensional subspace of R^3).
  const auto row = transpose(a.Pi) * std::span<const double>(a.dirichlet.ambient.col(0));
  std::vector<double> psi{row[1], -row[0], 0.0};
  const auto c = laurent_check(a, 0, psi);
  CHECK(c.removable);
  CHECK(std::fabs(c.residue_formula) <= 1e-12);
  CHECK(std::fabs(c.numeric_limit) <= 1e-12 * model_scale(a, psi));
}

TEST_CASE("Beurling-Deny: M-matrix models are positivity preserving below E0 and flip above") {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 5 + t % 10;
    const std::vector<std::size_t> boundary{0, n - 1};
    const auto a = analyze(m_matrix_model(n, boundary, rng));
    const double e0 = a.dirichlet.values.front();
    for (double lam : {0.0, -2.0, 0.5 * e0, 0.99 * e0}) {
      const auto g = generator_positivity(a, lam);
      CHECK(g.is_pp);
      CHECK(g.consistent());
    }
    const double gap = a.dirichlet.values.size() > 1 ? a.dirichlet.values[1] - e0 : e0;
    const auto above = generator_positivity(a, e0 + 1e-3 * gap);
    CHECK(!above.is_pp);
    CHECK(above.consistent());
    CHECK(above.witness_i != above.witness_j);
  }
}

TEST_CASE("Beurling-Deny tests agree on random models") {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const auto a = random_analysis(8, 4, seed);
    for (double lam : gap_points(a)) CHECK(generator_positivity(a, lam).consistent());
  }
}

TEST_CASE("shifting E by c P shifts the spectral parameter") {
  std::mt19937_64 rng(16);
  const auto a = random_analysis(10, 3, 55);
  const double c = 0.7;
  const auto b = analyze(shifted_model(a, c));
  const auto psi = gaussian(3, rng);
  for (double lam : gap_points(a)) {
    const double lhs = trace_eval_threeway(a, lam, psi).representation;
    const double rhs = trace_eval_threeway(b, lam + c, psi).representation;
    CHECK(std::fabs(lhs - rhs) <= 1e-9 * model_scale(a, psi));
    CHECK(generator_positivity(a, lam).is_pp == generator_positivity(b, lam + c).is_pp);
  }
}

TEST_CASE("model suite and single-model report") {
  SuiteConfig cfg;
  cfg.trials = 20;
  const auto rep = run_model_suite(cfg);
  CHECK(rep.models == 20);
  for (const auto &r : rep.residuals) {
    CAPTURE(r.name);
    CHECK(r.passed());
  }
  CHECK(rep.passed());
  const auto again = run_model_suite(cfg);
  for (std::size_t i = 0; i < rep.residuals.size(); ++i) CHECK(rep.residuals[i].value == again.residuals[i].value);

  std::mt19937_64 rng(17);
  const auto one = check_model(random_model(7, 2, rng));
  CHECK(one.passed());
  CHECK(!one.residuals.empty());

  SuiteConfig bad;
  bad.n = 3;
  bad.m = 3;
  CHECK_THROWS_AS(run_model_suite(bad), std::invalid_argument);
}
