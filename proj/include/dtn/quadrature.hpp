#ifndef DTN_QUADRATURE_HPP
#define DTN_QUADRATURE_HPP

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>
#include <vector>

namespace dtn {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussRule make_gauss_legendre(int n) {
  GaussRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) { p1 = x; p0 = 1.0; }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = r.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

/// Cached, immutable Gauss-Legendre rules.
inline const GaussRule &gauss_legendre(int n) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<const GaussRule>> cache;
  std::lock_guard lock(mutex);
  auto &slot = cache[n];
  if (!slot) slot = std::make_unique<const GaussRule>(make_gauss_legendre(n));
  return *slot;
}

/// Integral of f over [a, b] with an n-point Gauss-Legendre rule.
template <class F>
double integrate_gl(F &&f, double a, double b, int n) {
  const auto &r = gauss_legendre(n);
  const double h = 0.5 * (b - a), c = 0.5 * (a + b);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += r.weights[i] * f(c + h * r.nodes[i]);
  return h * s;
}

/// Breakpoints of [a, b] at which g changes sign, located by bisection on a sampled scan.
template <class G>
std::vector<double> sign_change_breaks(G &&g, double a, double b, int cells, int probes) {
  std::vector<double> breaks{a};
  const int samples = cells * probes;
  const double h = (b - a) / samples;
  double x0 = a, g0 = g(a);
  for (int i = 1; i <= samples; ++i) {
    const double x1 = i == samples ? b : a + i * h;
    const double g1 = g(x1);
    if ((g0 > 0) != (g1 > 0)) {
      double lo = x0, hi = x1, glo = g0;
      for (int it = 0; it < 80 && hi - lo > 1e-15 * (1.0 + std::fabs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if ((gm > 0) == (glo > 0)) { lo = mid; glo = gm; } else { hi = mid; }
      }
      const double root = 0.5 * (lo + hi);
      if (root > breaks.back() && root < b) breaks.push_back(root);
    }
    x0 = x1;
    g0 = g1;
  }
  breaks.push_back(b);
  return breaks;
}

/// Composite rule on [a, b]: `cells` equal cells, each split at sign changes of g, `order` points per piece.
template <class G>
std::vector<std::pair<double, double>> split_rule(G &&g, double a, double b, int cells, int order) {
  const auto &r = gauss_legendre(order);
  std::vector<double> cuts;
  const double h = (b - a) / cells;
  for (int c = 0; c < cells; ++c) {
    const double c0 = a + c * h, c1 = c == cells - 1 ? b : a + (c + 1) * h;
    auto local = sign_change_breaks(g, c0, c1, 1, 4);
    if (c > 0) local.erase(local.begin());
    if (cuts.empty()) cuts = std::move(local);
    else cuts.insert(cuts.end(), local.begin(), local.end());
  }
  std::vector<std::pair<double, double>> rule;
  rule.reserve((cuts.size() - 1) * order);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i], hi = cuts[i + 1];
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (int q = 0; q < order; ++q) rule.emplace_back(mid + half * r.nodes[q], half * r.weights[q]);
  }
  return rule;
}

} // namespace dtn

#endif // DTN_QUADRATURE_HPP
