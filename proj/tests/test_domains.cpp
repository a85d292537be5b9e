#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dtn/domains.hpp"
#include "dtn/errors.hpp"
#include "dtn/quadrature.hpp"

using namespace dtn;
constexpr double pi = std::numbers::pi;

TEST_CASE("grid weights sum to the boundary measure") {
  for (auto d : {DomainId::Disc, DomainId::Square, DomainId::Ball})
    for (int res : {4, 9, 32, 64}) CHECK(std::fabs(boundary_quadrature(d, res)->measure() - boundary_measure(d)) <= 1e-12);
  CHECK_THROWS_AS(boundary_quadrature(DomainId::Disc, 3), std::invalid_argument);
}

TEST_CASE("quadrature exactness") {
  const auto circle = boundary_quadrature(DomainId::Disc, 64);
  const auto c5 = sample(circle, [](const BoundaryPoint &p) { return std::cos(5 * p.theta); });
  CHECK(std::fabs(inner(c5, c5) - pi) <= 1e-12);

  const int n = 6;
  const auto square = boundary_quadrature(DomainId::Square, n);
  for (int deg = 0; deg <= 2 * n - 1; ++deg) {
    const auto f = sample(square, [deg](const BoundaryPoint &p) { return std::pow(p.t, deg); });
    double total = 0;
    for (std::size_t i = 0; i < square->size(); ++i) total += square->weights[i] * f.samples[i];
    CHECK(total == doctest::Approx(4.0 / (deg + 1)).epsilon(1e-14));
  }

  const auto sphere = boundary_quadrature(DomainId::Ball, 16);
  const auto y00 = sample(sphere, [](const BoundaryPoint &p) { return real_sph_harmonic(0, 0, p.theta, p.phi); });
  CHECK(std::fabs(inner(y00, y00) - 1.0) <= 1e-12);
}

TEST_CASE("orthonormal boundary bases") {
  const auto circle = boundary_quadrature(DomainId::Disc, 64);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) {
      const auto a = sample(circle, [i](const BoundaryPoint &p) { return circle_basis(i, p.theta); });
      const auto b = sample(circle, [j](const BoundaryPoint &p) { return circle_basis(j, p.theta); });
      CHECK(std::fabs(inner(a, b) - (i == j ? 1.0 : 0.0)) <= 1e-13);
    }
  const auto sphere = boundary_quadrature(DomainId::Ball, 12);
  std::vector<BoundaryFunction> ys;
  for (int n = 0; n <= 4; ++n)
    for (int l = -n; l <= n; ++l)
      ys.push_back(sample(sphere, [n, l](const BoundaryPoint &p) { return real_sph_harmonic(n, l, p.theta, p.phi); }));
  for (std::size_t i = 0; i < ys.size(); ++i)
    for (std::size_t j = 0; j < ys.size(); ++j) CHECK(std::fabs(inner(ys[i], ys[j]) - (i == j ? 1.0 : 0.0)) <= 1e-12);
}

TEST_CASE("batched spherical harmonics agree with single evaluation") {
  double worst = 0;
  for (double th : {0.1, 0.7, 1.5, 2.9, 3.1})
    for (double ph : {0.3, 2.0, 5.5}) {
      const auto v = real_sph_harmonics(20, th, ph);
      for (int n = 0; n <= 20; ++n)
        for (int l = -n; l <= n; ++l) worst = std::max(worst, std::fabs(v[n * n + n + l] - real_sph_harmonic(n, l, th, ph)));
    }
  CHECK(worst <= 1e-12);
}

TEST_CASE("square catalog") {
  const auto modes = enumerate_modes(DomainId::Square, 9 * pi * pi);
  REQUIRE(modes.size() == 3);
  CHECK(modes[0].E == doctest::Approx(2 * pi * pi));
  CHECK(modes[0].multiplicity == 1);
  CHECK(modes[1].E == doctest::Approx(5 * pi * pi));
  CHECK(modes[1].multiplicity == 2);
  CHECK(modes[2].E == doctest::Approx(8 * pi * pi));
  CHECK(modes[2].multiplicity == 1);

  const auto big = enumerate_modes(DomainId::Square, 200 * pi * pi + 1e-9);
  for (const auto &m : big) {
    const long s = std::lround(m.E / (pi * pi));
    int reps = 0;
    for (long a = 1; a * a < s; ++a)
      for (long b = 1; a * a + b * b <= s; ++b)
        if (a * a + b * b == s) ++reps;
    CHECK(m.multiplicity == reps);
    CHECK(static_cast<int>(m.labels.size()) == m.multiplicity);
    if (s == 50) CHECK(m.multiplicity == 3);
  }
  for (std::size_t i = 1; i < big.size(); ++i) CHECK(big[i - 1].E < big[i].E);
}

TEST_CASE("disc and ball catalogs") {
  const auto disc = enumerate_modes(DomainId::Disc, 300);
  REQUIRE(!disc.empty());
  CHECK(disc[0].E == doctest::Approx(5.783185962946785).epsilon(1e-14));
  CHECK(disc[0].multiplicity == 1);
  for (const auto &m : disc) CHECK(m.multiplicity == (m.labels[0][0] == 0 ? 1 : 2));
  for (std::size_t i = 1; i < disc.size(); ++i) CHECK(disc[i - 1].E < disc[i].E);

  const auto ball = enumerate_modes(DomainId::Ball, 300);
  REQUIRE(!ball.empty());
  CHECK(ball[0].E == doctest::Approx(pi * pi).epsilon(1e-14));
  CHECK(ball[0].multiplicity == 1);
  for (const auto &m : ball) CHECK(m.multiplicity == 2 * m.labels[0][0] + 1);

  CHECK(enumerate_modes(DomainId::Disc, 5.0).empty());
  CHECK(enumerate_modes(DomainId::Square, 19.0).empty());
}

TEST_CASE("disc radial normal derivative is the constant j / sqrt(pi)") {
  const auto grid = boundary_quadrature(DomainId::Disc, 32);
  for (const auto &m : enumerate_modes(DomainId::Disc, 200)) {
    if (m.labels[0][0] != 0) continue;
    const double j = std::sqrt(m.E);
    const auto f = normal_derivative(m, 0, grid);
    for (double v : f.samples) CHECK(std::fabs(std::fabs(v) - j / std::sqrt(pi)) <= 1e-12 * j);
  }
}

TEST_CASE("disc radial normalisation by interior quadrature") {
  // u = c J_0(j r), c = 1/(sqrt(pi) |J_0'(j)|): 2 pi int_0^1 u^2 r dr = 1 and |du/dr(1)| = j/sqrt(pi).
  const double j = std::sqrt(enumerate_modes(DomainId::Disc, 10)[0].E);
  const double c = 1.0 / (std::sqrt(pi) * std::fabs(bessel_j_prime(0, j)));
  const double norm = 2 * pi * integrate_gl([&](double r) { return std::pow(c * bessel_j(0, j * r), 2) * r; }, 0, 1, 40);
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(c * j * std::fabs(bessel_j_prime(0, j)) == doctest::Approx(j / std::sqrt(pi)).epsilon(1e-14));
}

TEST_CASE("square normal derivative on the bottom edge") {
  const ModeMember mem{2, 3, 0};
  const auto f = normal_derivative_fn(DomainId::Square, mem);
  for (double x : {0.1, 0.35, 0.8}) CHECK(f(square_point(0, x)) == doctest::Approx(-2 * pi * 3 * std::sin(2 * pi * x)));
}

TEST_CASE("ball normal derivative is sqrt2 alpha times a harmonic") {
  const auto modes = enumerate_modes(DomainId::Ball, 60);
  for (const auto &m : modes) {
    const auto mems = members(m);
    const double alpha = std::sqrt(m.E);
    for (const auto &mem : mems) {
      const auto f = normal_derivative_fn(DomainId::Ball, mem);
      const BoundaryPoint p = sphere_point(0.7, 1.3);
      CHECK(std::fabs(std::fabs(f(p)) - std::sqrt(2.0) * alpha * std::fabs(real_sph_harmonic(mem.a, mem.c, 0.7, 1.3))) <=
            1e-12 * alpha);
    }
  }
}

TEST_CASE("normal derivatives within an eigenspace are orthogonal") {
  for (auto [d, emax] : {std::pair{DomainId::Disc, 200.0}, {DomainId::Square, 100 * pi * pi}, {DomainId::Ball, 150.0}}) {
    const auto grid = boundary_quadrature(d, d == DomainId::Ball ? 24 : 128);
    for (const auto &m : enumerate_modes(d, emax)) {
      const auto mems = members(m);
      std::vector<BoundaryFunction> fs;
      for (std::size_t i = 0; i < mems.size(); ++i) fs.push_back(normal_derivative(m, i, grid));
      double scale = 0;
      for (const auto &f : fs) scale = std::max(scale, inner(f, f));
      for (std::size_t i = 0; i < fs.size(); ++i)
        for (std::size_t j = 0; j < i; ++j) CHECK(std::fabs(inner(fs[i], fs[j])) <= 1e-10 * scale);
    }
  }
}

TEST_CASE("couplings") {
  const auto grid = boundary_quadrature(DomainId::Disc, 128);
  const auto modes = enumerate_modes(DomainId::Disc, 150);
  for (int k = 0; k <= 4; ++k) {
    const auto psi = sample(grid, [k](const BoundaryPoint &p) { return circle_basis(k == 0 ? 0 : 2 * k - 1, p.theta); });
    for (const auto &m : modes) {
      const int mk = m.labels[0][0];
      double e2g2 = 0;
      for (std::size_t i = 0; i < members(m).size(); ++i) {
        const double g = coupling(m, i, psi);
        e2g2 += m.E * m.E * g * g;
      }
      if (mk != k) CHECK(std::fabs(e2g2) <= 1e-20 * m.E * m.E + 1e-22);
      else CHECK(e2g2 == doctest::Approx(2 * m.E).epsilon(1e-12));
    }
  }
}

TEST_CASE("square coupling with cos(pi x) on one edge matches the closed integral") {
  const auto grid = boundary_quadrature(DomainId::Square, 64);
  const auto psi = sample(grid, [](const BoundaryPoint &p) { return p.segment == 0 ? std::cos(pi * p.t) : 0.0; });
  for (const auto &m : enumerate_modes(DomainId::Square, 60 * pi * pi)) {
    const int mm = m.labels[0][0], nn = m.labels[0][1];
    // int_0^1 sin(m pi x) cos(pi x) dx = m (1 + (-1)^m) / (pi (m^2 - 1)) for m != 1, 0 for m = 1.
    const double s = mm == 1 ? 0.0 : mm * (1.0 + (mm % 2 ? -1.0 : 1.0)) / (pi * (mm * mm - 1.0));
    const double expected = -(-2 * pi * nn * s) / m.E;
    CHECK(std::fabs(coupling(m, 0, psi) - expected) <= 1e-10);
  }
}

TEST_CASE("coupling refuses under-resolved grids") {
  const auto coarse = boundary_quadrature(DomainId::Disc, 8);
  const auto psi = sample(coarse, [](const BoundaryPoint &) { return 1.0; });
  const auto modes = enumerate_modes(DomainId::Disc, 400);
  const auto high = std::find_if(modes.begin(), modes.end(), [](const DirichletMode &m) { return m.labels[0][0] > 4; });
  REQUIRE(high != modes.end());
  CHECK_THROWS_AS(coupling(*high, 0, psi), ResolutionError);
}

TEST_CASE("nearest pole") {
  const auto [E, dist] = nearest_pole(DomainId::Ball, 10.0);
  CHECK(E == doctest::Approx(pi * pi));
  CHECK(dist == doctest::Approx(10.0 - pi * pi));
}
