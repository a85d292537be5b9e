#ifndef DTN_SPECFUN_HPP
#define DTN_SPECFUN_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace dtn {

namespace detail {

inline long double bessel_j_series(int k, long double x) {
  const long double q = x * x / 4.0L;
  long double term = 1.0L;
  for (int i = 1; i <= k; ++i) term *= (x / 2.0L) / i;
  long double sum = term;
  for (int m = 0; m < 500; ++m) {
    term *= -q / ((m + 1.0L) * (m + 1.0L + k));
    sum += term;
    if (std::fabs(term) <= 1e-21L * std::fabs(sum) && m > q) break;
  }
  return sum;
}

// Backward recurrence normalised by J_0 + 2 sum J_2m = 1.
inline double bessel_j_miller(int k, double x) {
  const double base = std::max<double>(k, x);
  int start = static_cast<int>(base + 15.0 + 12.0 * std::cbrt(x));
  start += start % 2;
  double next = 0.0, cur = 1.0, norm = 0.0, value = 0.0;
  if (start == k) value = cur;
  for (int n = start; n > 0; --n) {
    const double prev = (2.0 * n / x) * cur - next;
    next = cur;
    cur = prev;
    if (std::fabs(cur) > 1e250) {
      cur *= 1e-250;
      next *= 1e-250;
      norm *= 1e-250;
      value *= 1e-250;
    }
    if (n - 1 == k) value = cur;
    if ((n - 1) % 2 == 0 && n - 1 > 0) norm += 2.0 * cur;
  }
  norm += cur;
  return value / norm;
}

// Hankel asymptotic expansion, valid for x >> nu^2.
inline double bessel_j_hankel(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double p = 0.0, q = 0.0, a = 1.0;
  for (int j = 0; j < 40; ++j) {
    if (j > 0) a *= (mu - (2.0 * j - 1) * (2.0 * j - 1)) / (j * 8.0 * x);
    const double signed_a = ((j / 2) % 2 == 0) ? a : -a;
    if (j % 2 == 0) p += signed_a; else q += signed_a;
    if (std::fabs(a) < 1e-18) break;
  }
  const double chi = x - (nu / 2.0 + 0.25) * std::numbers::pi;
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

} // namespace detail

/// Bessel function of the first kind J_k(x) for integer k >= 0.
inline double bessel_j(int k, double x) {
  if (x < 0.0) return (k % 2 ? -1.0 : 1.0) * bessel_j(k, -x);
  if (x == 0.0) return k == 0 ? 1.0 : 0.0;
  if (x <= 12.0) return static_cast<double>(detail::bessel_j_series(k, x));
  if (x <= 1000.0 || k >= x / 2) return detail::bessel_j_miller(k, x);
  double prev = detail::bessel_j_hankel(0.0, x);
  if (k == 0) return prev;
  double cur = detail::bessel_j_hankel(1.0, x);
  for (int n = 1; n < k; ++n) {
    const double next = (2.0 * n / x) * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Derivative J_k'(x) via J_k' = (J_{k-1} - J_{k+1})/2, J_0' = -J_1.
inline double bessel_j_prime(int k, double x) {
  if (k == 0) return -bessel_j(1, x);
  return 0.5 * (bessel_j(k - 1, x) - bessel_j(k + 1, x));
}

/// Ratio I_{k+1}(x)/I_k(x) of modified Bessel functions, x > 0.
inline double bessel_i_ratio(int k, double x) {
  // Modified Lentz on 1/(2(k+1)/x + 1/(2(k+2)/x + ...)).
  const double tiny = 1e-300;
  double f = tiny, c = f, d = 0.0;
  for (int i = 1; i < 1000000; ++i) {
    const double b = 2.0 * (k + i) / x;
    d = b + d;
    if (d == 0.0) d = tiny;
    c = b + 1.0 / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) return f;
  }
  throw ConvergenceError("modified Bessel ratio did not converge");
}

/// Spherical Bessel function j_n(x).
inline double spherical_bessel_j(int n, double x) {
  if (x < 0.0) return (n % 2 ? -1.0 : 1.0) * spherical_bessel_j(n, -x);
  if (x < 1.0) {
    double lead = 1.0;
    for (int i = 1; i <= n; ++i) lead *= x / (2.0 * i + 1.0);
    const double q = x * x / 2.0;
    double term = 1.0, sum = 1.0;
    for (int m = 1; m < 60; ++m) {
      term *= -q / (m * (2.0 * n + 2.0 * m + 1.0));
      sum += term;
      if (std::fabs(term) < 1e-18) break;
    }
    return lead * sum;
  }
  const double j0 = std::sin(x) / x;
  if (n == 0) return j0;
  const double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
  if (n == 1) return j1;
  if (x >= n) {
    double prev = j0, cur = j1;
    for (int m = 1; m < n; ++m) {
      const double next = (2.0 * m + 1.0) / x * cur - prev;
      prev = cur;
      cur = next;
    }
    return cur;
  }
  // Upward recurrence is unstable for x < n: backward recurrence, normalised by j_0 or j_1.
  int start = static_cast<int>(n + 15.0 + 12.0 * std::cbrt(x));
  double next = 0.0, cur = 1e-30, value = 0.0, at1 = 0.0;
  for (int m = start; m > 0; --m) {
    const double prev = (2.0 * m + 1.0) / x * cur - next;
    next = cur;
    cur = prev;
    if (std::fabs(cur) > 1e250) {
      cur *= 1e-250;
      next *= 1e-250;
      value *= 1e-250;
    }
    if (m - 1 == n) value = cur;
    if (m - 1 == 1) at1 = cur;
  }
  if (std::fabs(j0) >= std::fabs(j1)) return value * (j0 / cur);
  return value * (j1 / at1);
}

/// Derivative j_n'(x) = j_{n-1}(x) - (n+1)/x j_n(x), with j_0' = -j_1.
inline double spherical_bessel_j_prime(int n, double x) {
  if (n == 0) return -spherical_bessel_j(1, x);
  return spherical_bessel_j(n - 1, x) - (n + 1.0) / x * spherical_bessel_j(n, x);
}

/// Associated Legendre function P_n^l(t), Ferrers convention with Condon-Shortley phase.
inline double assoc_legendre(int n, int l, double t) {
  double pll = 1.0;
  const double s = std::sqrt(std::max(0.0, (1.0 - t) * (1.0 + t)));
  for (int i = 1; i <= l; ++i) pll *= -(2.0 * i - 1.0) * s;
  if (n == l) return pll;
  double pl1 = t * (2.0 * l + 1.0) * pll;
  if (n == l + 1) return pl1;
  double prev = pll, cur = pl1;
  for (int m = l + 2; m <= n; ++m) {
    const double next = (t * (2.0 * m - 1.0) * cur - (m + l - 1.0) * prev) / (m - l);
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Rayleigh sums sum_l j_{nu,l}^{-2}, sum_l j_{nu,l}^{-4} and sum_l j_{nu,l}^{-6}.
inline double rayleigh_sum1(double nu) { return 1.0 / (4.0 * (nu + 1.0)); }
inline double rayleigh_sum2(double nu) {
  return 1.0 / (16.0 * (nu + 1.0) * (nu + 1.0) * (nu + 2.0));
}
inline double rayleigh_sum3(double nu) {
  return 1.0 / (32.0 * (nu + 1.0) * (nu + 1.0) * (nu + 1.0) * (nu + 2.0) * (nu + 3.0));
}

enum class BesselKind { cylindrical, spherical };
enum class ZeroMethod { series_bisection, newton_mcmahon };

inline std::string to_string(ZeroMethod m) {
  return m == ZeroMethod::series_bisection ? "series-bisection" : "newton-mcmahon";
}

/// Positive zeros of J_k (cylindrical) or j_n (spherical, order n + 1/2).
struct ZeroTable {
  BesselKind kind = BesselKind::cylindrical;
  int order = 0;
  std::vector<double> zeros;
  ZeroMethod method = ZeroMethod::series_bisection;

  double nu() const { return kind == BesselKind::cylindrical ? order : order + 0.5; }
  double operator[](std::size_t l) const { return zeros[l]; }
  std::size_t size() const { return zeros.size(); }
};

namespace detail {

struct BesselFamily {
  BesselKind kind;
  int order;
  double operator()(double x) const {
    return kind == BesselKind::cylindrical ? bessel_j(order, x) : spherical_bessel_j(order, x);
  }
  double prime(double x) const {
    return kind == BesselKind::cylindrical ? bessel_j_prime(order, x)
                                           : spherical_bessel_j_prime(order, x);
  }
  double nu() const { return kind == BesselKind::cylindrical ? order : order + 0.5; }
};

inline double mcmahon_guess(double nu, int l) {
  const double mu = 4.0 * nu * nu;
  const double beta = (l + nu / 2.0 - 0.25) * std::numbers::pi;
  const double b8 = 8.0 * beta;
  return beta - (mu - 1.0) / b8 - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * b8 * b8 * b8) -
         32.0 * (mu - 1.0) * (83.0 * mu * mu - 982.0 * mu + 3779.0) /
             (15.0 * std::pow(b8, 5));
}

inline bool mcmahon_reliable(double nu, int l) {
  return (l + nu / 2.0 - 0.25) * std::numbers::pi >= 3.0 * nu + 10.0;
}

// Safeguarded Newton inside a sign-change bracket [a, b].
inline double refine_root(const BesselFamily &f, double a, double b) {
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0) == (fb > 0)) throw ConvergenceError("zero bracket has no sign change");
  double x = 0.5 * (a + b);
  for (int it = 0; it < 200; ++it) {
    const double fx = f(x);
    if (fx == 0.0) return x;
    if ((fx > 0) == (fa > 0)) { a = x; fa = fx; } else { b = x; }
    const double d = f.prime(x);
    double step = d != 0.0 ? fx / d : 0.0;
    double trial = x - step;
    if (!(trial > a && trial < b) || d == 0.0) {
      trial = 0.5 * (a + b);
      step = x - trial;
    }
    x = trial;
    if (std::fabs(step) <= 4e-16 * std::fabs(x) || b - a <= 4e-16 * std::fabs(x)) {
      // One more Newton polish from the converged point.
      const double d2 = f.prime(x);
      if (d2 != 0.0) {
        const double polished = x - f(x) / d2;
        if (polished >= a && polished <= b && std::fabs(f(polished)) <= std::fabs(f(x)))
          x = polished;
      }
      return x;
    }
  }
  throw ConvergenceError("Bessel zero refinement did not converge");
}

// Scan for the first sign change at or after x0 with unit steps.
inline std::pair<double, double> scan_bracket(const BesselFamily &f, double x0) {
  double a = x0, fa = f(a);
  for (int i = 0; i < 100000; ++i) {
    const double b = a + 1.0, fb = f(b);
    if (fa == 0.0 || (fa > 0) != (fb > 0)) return {a, b};
    a = b;
    fa = fb;
  }
  throw ConvergenceError("no sign change found while scanning for a Bessel zero");
}

inline bool mcmahon_bracket(const BesselFamily &f, int l, double &a, double &b) {
  if (!mcmahon_reliable(f.nu(), l)) return false;
  const double g = mcmahon_guess(f.nu(), l);
  a = g - 1.2;
  b = g + 1.2;
  return (f(a) > 0) != (f(b) > 0);
}

inline double scan_start(const BesselFamily &f) {
  return f.order == 0 && f.kind == BesselKind::cylindrical ? 0.5 : f.nu();
}

} // namespace detail

/// First `count` positive zeros, strictly increasing.
inline ZeroTable build_zero_table(BesselKind kind, int order, int count) {
  const detail::BesselFamily f{kind, order};
  ZeroTable table{kind, order, {}, ZeroMethod::newton_mcmahon};
  table.zeros.reserve(count);
  double prev = 0.0;
  for (int l = 1; l <= count; ++l) {
    double a = 0, b = 0;
    if (!detail::mcmahon_bracket(f, l, a, b)) {
      table.method = ZeroMethod::series_bisection;
      const double start = l == 1 ? detail::scan_start(f) : prev + 3.0;
      std::tie(a, b) = detail::scan_bracket(f, start);
    }
    prev = detail::refine_root(f, a, b);
    table.zeros.push_back(prev);
  }
  return table;
}

/// l-th positive zero of J_k (l >= 1).
inline double bessel_zero(int k, int l) {
  const detail::BesselFamily f{BesselKind::cylindrical, k};
  double a = 0, b = 0;
  if (detail::mcmahon_bracket(f, l, a, b)) return detail::refine_root(f, a, b);
  return build_zero_table(BesselKind::cylindrical, k, l).zeros.back();
}

/// k-th positive zero of the spherical Bessel function j_n (k >= 1).
inline double spherical_bessel_zero(int n, int k) {
  const detail::BesselFamily f{BesselKind::spherical, n};
  double a = 0, b = 0;
  if (detail::mcmahon_bracket(f, k, a, b)) return detail::refine_root(f, a, b);
  return build_zero_table(BesselKind::spherical, n, k).zeros.back();
}

/// Thread-safe cache of immutable zero tables; tables are replaced, never mutated.
class ZeroCache {
public:
  std::shared_ptr<const ZeroTable> get(BesselKind kind, int order, int count) {
    const auto key = std::make_pair(static_cast<int>(kind), order);
    {
      std::lock_guard lock(mutex_);
      auto it = tables_.find(key);
      if (it != tables_.end() && static_cast<int>(it->second->size()) >= count) return it->second;
    }
    auto fresh = std::make_shared<const ZeroTable>(
        build_zero_table(kind, order, std::max(count, 16)));
    std::lock_guard lock(mutex_);
    auto &slot = tables_[key];
    if (!slot || slot->size() < fresh->size()) slot = fresh;
    return slot;
  }

private:
  std::mutex mutex_;
  std::map<std::pair<int, int>, std::shared_ptr<const ZeroTable>> tables_;
};

inline ZeroCache &zero_cache() {
  static ZeroCache cache;
  return cache;
}

} // namespace dtn

#endif // DTN_SPECFUN_HPP
