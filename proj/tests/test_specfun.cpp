#include <cmath>
#include <numbers>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "doctest.h"
#include "dtn/quadrature.hpp"
#include "dtn/specfun.hpp"

using namespace dtn;
using Big = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<160>>;

namespace {

/// J_nu(x) from its Taylor series in 160-digit arithmetic; nu = order or order + 1/2.
Big taylor_j(int order, bool half, const Big &x) {
  const Big nu = half ? Big(order) + Big(1) / 2 : Big(order);
  // Gamma(nu + 1) by the recurrence from Gamma(1) or Gamma(1/2).
  Big gamma = half ? boost::multiprecision::sqrt(boost::math::constants::pi<Big>()) : Big(1);
  for (Big t = half ? Big(1) / 2 : Big(1); t < nu + 1; t += 1) gamma *= t;
  const Big h = x / 2, h2 = h * h;
  Big term = boost::multiprecision::pow(h, nu) / gamma, sum = term;
  for (int m = 1; m < 2000; ++m) {
    term *= -h2 / (Big(m) * (nu + m));
    sum += term;
    if (boost::multiprecision::abs(term) < Big("1e-60")) break;
  }
  return sum;
}

double oracle_j(int k, double x) { return static_cast<double>(taylor_j(k, false, Big(x))); }

/// Zero of J_nu by bisection on the high-precision series inside [a, b].
double oracle_zero(int order, bool half, double a, double b) {
  Big lo(a), hi(b);
  const Big flo = taylor_j(order, half, lo);
  for (int it = 0; it < 120; ++it) {
    const Big mid = (lo + hi) / 2;
    if ((taylor_j(order, half, mid) > 0) == (flo > 0)) lo = mid;
    else hi = mid;
  }
  return static_cast<double>((lo + hi) / 2);
}

} // namespace

TEST_CASE("bessel_j matches the high-precision Taylor series to 1e-13 up to x = 200") {
  for (int k : {0, 1, 2, 5, 12, 30, 60})
    for (double x : {0.0, 0.5, 3.0, 11.9, 12.1, 24.0, 50.0, 99.7, 150.0, 199.5}) {
      CAPTURE(k);
      CAPTURE(x);
      CHECK(std::fabs(bessel_j(k, x) - oracle_j(k, x)) <= 1e-13);
    }
}

TEST_CASE("bessel_j values at the origin") {
  CHECK(bessel_j(0, 0.0) == 1.0);
  CHECK(bessel_j(1, 0.0) == 0.0);
  CHECK(std::fabs(bessel_j(0, 2.404825557695773)) <= 1e-12);
}

TEST_CASE("bessel_j_prime recurrences and values") {
  CHECK(std::fabs(bessel_j_prime(0, 1.0) + bessel_j(1, 1.0)) <= 1e-13);
  CHECK(bessel_j_prime(1, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  const double j01 = oracle_zero(0, false, 2.3, 2.5);
  const double expected = -oracle_j(1, j01);
  CHECK(std::fabs(bessel_j_prime(0, j01) - expected) <= 1e-10);
  CHECK(std::fabs(expected - (-0.5191474972894669)) <= 1e-10);
  for (int k = 1; k <= 10; ++k)
    for (double x : {0.7, 4.0, 17.0, 45.0}) {
      const double rec = 0.5 * (bessel_j(k - 1, x) - bessel_j(k + 1, x));
      CHECK(std::fabs(bessel_j_prime(k, x) - rec) <= 1e-13);
    }
}

TEST_CASE("three-term recurrence residual on [0.5, 50]") {
  for (int k = 1; k <= 20; ++k)
    for (int i = 0; i <= 99; ++i) {
      const double x = 0.5 + 49.5 * i / 99.0;
      const double r = bessel_j(k - 1, x) + bessel_j(k + 1, x) - 2.0 * k / x * bessel_j(k, x);
      CHECK(std::fabs(r) <= 1e-11);
    }
}

TEST_CASE("bessel zeros against bisection on the series") {
  CHECK(std::fabs(bessel_zero(0, 1) - oracle_zero(0, false, 2.3, 2.5)) <= 1e-14);
  CHECK(std::fabs(bessel_zero(1, 1) - oracle_zero(1, false, 3.7, 3.9)) <= 1e-14);
  CHECK(bessel_zero(0, 1) == doctest::Approx(2.404825557695773).epsilon(1e-15));
  CHECK(bessel_zero(1, 1) == doctest::Approx(3.831705970207512).epsilon(1e-15));
  CHECK(std::fabs(bessel_zero(0, 50) - 49.75 * std::numbers::pi) <= 1e-3);
  for (int k : {3, 7, 12})
    for (int l : {1, 4, 9}) {
      const double z = bessel_zero(k, l);
      CHECK(std::fabs(z - oracle_zero(k, false, z - 0.05, z + 0.05)) <= 1e-13 * z);
    }
}

TEST_CASE("zero tables: residual, monotonicity, interlacing for k <= 12, l <= 60") {
  std::vector<std::shared_ptr<const ZeroTable>> tables;
  for (int k = 0; k <= 13; ++k) tables.push_back(zero_cache().get(BesselKind::cylindrical, k, 61));
  for (int k = 0; k <= 12; ++k) {
    const auto &t = *tables[k];
    for (int l = 0; l < 60; ++l) {
      CHECK(std::fabs(bessel_j(k, t[l])) <= 1e-12);
      CHECK(t[l] < t[l + 1]);
      CHECK(t[l] < (*tables[k + 1])[l]);
      CHECK((*tables[k + 1])[l] < t[l + 1]);
    }
  }
}

TEST_CASE("zero tables are cached and immutable") {
  const auto a = zero_cache().get(BesselKind::cylindrical, 4, 20);
  const auto zeros = a->zeros;
  const auto b = zero_cache().get(BesselKind::cylindrical, 4, 200);
  CHECK(b->size() >= 200);
  CHECK(a->zeros == zeros);
  for (std::size_t l = 0; l < zeros.size(); ++l) CHECK((*b)[l] == zeros[l]);
}

TEST_CASE("spherical bessel functions and zeros") {
  for (double x : {0.3, 1.0, 5.0, 20.0}) {
    CHECK(spherical_bessel_j(0, x) == doctest::Approx(std::sin(x) / x).epsilon(1e-14));
    CHECK(spherical_bessel_j(1, x) ==
          doctest::Approx(std::sin(x) / (x * x) - std::cos(x) / x).epsilon(1e-12));
  }
  for (int k = 1; k <= 60; ++k) CHECK(std::fabs(spherical_bessel_zero(0, k) - k * std::numbers::pi) <= 1e-13);
  // tan x = x by Newton from 4.5.
  long double x = 4.5L;
  for (int it = 0; it < 50; ++it) {
    const long double f = std::tan(x) - x, df = 1.0L / (std::cos(x) * std::cos(x)) - 1.0L;
    x -= f / df;
  }
  CHECK(std::fabs(spherical_bessel_zero(1, 1) - static_cast<double>(x)) <= 1e-13);
  CHECK(spherical_bessel_zero(1, 1) == doctest::Approx(4.493409457909064).epsilon(1e-15));
}

TEST_CASE("spherical zeros equal zeros of the half-integer-order series") {
  for (int n : {1, 2, 5, 9})
    for (int k : {1, 3, 7}) {
      const double z = spherical_bessel_zero(n, k);
      CHECK(std::fabs(z - oracle_zero(n, true, z - 0.05, z + 0.05)) <= 1e-12);
    }
}

TEST_CASE("spherical bessel values against the half-integer series") {
  for (int n : {0, 1, 3, 8, 20})
    for (double x : {0.3, 2.0, 7.5, 15.0, 40.0}) {
      const Big bx(x);
      const double ref = static_cast<double>(
          boost::multiprecision::sqrt(boost::math::constants::pi<Big>() / (2 * bx)) * taylor_j(n, true, bx));
      CHECK(std::fabs(spherical_bessel_j(n, x) - ref) <= 1e-13);
    }
}

TEST_CASE("associated Legendre functions") {
  for (double t : {-1.0, -0.3, 0.0, 0.8, 1.0}) CHECK(assoc_legendre(0, 0, t) == 1.0);
  for (int n = 1; n <= 6; ++n) {
    const double ref = assoc_legendre(n, n, std::cos(0.4)) / std::pow(std::sin(0.4), n);
    for (double th : {0.1, 0.9, 1.5, 2.2, 3.0})
      CHECK(std::fabs(assoc_legendre(n, n, std::cos(th)) / std::pow(std::sin(th), n) - ref) <= 1e-10 * std::fabs(ref));
  }
  CHECK(std::fabs(integrate_gl([](double t) { return assoc_legendre(2, 1, t) * assoc_legendre(3, 1, t); }, -1.0, 1.0,
                               16)) <= 1e-12);
  // P_2^1(t) = -3 t sqrt(1 - t^2) in the Ferrers convention with the Condon-Shortley phase.
  CHECK(assoc_legendre(2, 1, 0.6) == doctest::Approx(-3.0 * 0.6 * 0.8).epsilon(1e-14));
}

TEST_CASE("Rayleigh sums match direct summation") {
  for (int k : {0, 1, 4}) {
    const auto &t = *zero_cache().get(BesselKind::cylindrical, k, 4000);
    double s1 = 0, s2 = 0, s3 = 0;
    for (std::size_t l = t.size(); l-- > 0;) {
      const double j2 = t[l] * t[l];
      s1 += 1 / j2;
      s2 += 1 / (j2 * j2);
      s3 += 1 / (j2 * j2 * j2);
    }
    // Tail beyond the table from the McMahon spacing j_l ~ (l + k/2 - 1/4) pi, midpoint-integrated.
    const double x0 = t.size() + 0.5 + k / 2.0 - 0.25;
    const auto tail = [x0](int p) { return 1.0 / ((2 * p - 1) * std::pow(std::numbers::pi, 2 * p) * std::pow(x0, 2 * p - 1)); };
    CHECK(std::fabs(s1 + tail(1) - rayleigh_sum1(k)) <= 1e-9 * rayleigh_sum1(k));
    CHECK(std::fabs(s2 + tail(2) - rayleigh_sum2(k)) <= 1e-12 * rayleigh_sum2(k));
    CHECK(std::fabs(s3 - rayleigh_sum3(k)) <= 1e-13 * rayleigh_sum3(k));
  }
}
