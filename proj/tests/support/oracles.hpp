#pragma once

// Test-side oracles that do not reuse library code paths: finite-difference
// derivatives, random generators and closed-form reference values.

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace oracle {

using ScalarFn = std::function<double(std::span<const double>)>;

/// Fornberg's algorithm: weights of the m-th derivative at 0 for the given
/// stencil offsets (in units of h).
inline std::vector<double> fornberg_weights(int m, const std::vector<double>& offsets) {
  const int n = static_cast<int>(offsets.size()) - 1;
  std::vector<std::vector<std::vector<double>>> d(
      static_cast<std::size_t>(m + 1),
      std::vector<std::vector<double>>(static_cast<std::size_t>(n + 1), std::vector<double>(n + 1, 0.0)));
  auto at = [&](int k, int a, int b) -> double& {
    return d[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  };
  at(0, 0, 0) = 1.0;
  double c1 = 1.0;
  for (int a = 1; a <= n; ++a) {
    double c2 = 1.0;
    for (int b = 0; b < a; ++b) {
      const double c3 = offsets[static_cast<std::size_t>(a)] - offsets[static_cast<std::size_t>(b)];
      c2 *= c3;
      for (int k = 0; k <= std::min(a, m); ++k) {
        const double prev = at(k, a - 1, b);
        const double prev_d = k > 0 ? at(k - 1, a - 1, b) : 0.0;
        at(k, a, b) = (offsets[static_cast<std::size_t>(a)] * prev - k * prev_d) / c3;
      }
    }
    for (int k = 0; k <= std::min(a, m); ++k) {
      const double prev = at(k, a - 1, a - 1);
      const double prev_d = k > 0 ? at(k - 1, a - 1, a - 1) : 0.0;
      at(k, a, a) = c1 / c2 * (k * prev_d - offsets[static_cast<std::size_t>(a - 1)] * prev);
    }
    c1 = c2;
  }
  std::vector<double> w(static_cast<std::size_t>(n + 1));
  for (int b = 0; b <= n; ++b) w[static_cast<std::size_t>(b)] = at(m, n, b);
  return w;
}

/// Central stencil with `half` points on each side.
inline std::vector<double> central_offsets(int half) {
  std::vector<double> o;
  for (int s = -half; s <= half; ++s) o.push_back(s);
  return o;
}

/// Mixed partial derivative by nested central differences. `orders[v]` is
/// the order in variable v.
inline double finite_difference(const ScalarFn& f, std::vector<double> point, const std::vector<int>& orders,
                                double h, int half = 5) {
  const auto offsets = central_offsets(half);
  std::function<double(std::size_t)> rec = [&](std::size_t v) -> double {
    while (v < orders.size() && orders[v] == 0) ++v;
    if (v == orders.size()) return f(point);
    const auto w = fornberg_weights(orders[v], offsets);
    const double x0 = point[v];
    double acc = 0.0;
    for (std::size_t s = 0; s < offsets.size(); ++s) {
      if (w[s] == 0.0) continue;
      point[v] = x0 + offsets[s] * h;
      acc += w[s] * rec(v + 1);
    }
    point[v] = x0;
    return acc / std::pow(h, orders[v]);
  };
  return rec(0);
}

struct Box {
  std::vector<double> lo, hi;
};

inline std::vector<double> uniform_point(std::mt19937_64& rng, const Box& b) {
  std::vector<double> p(b.lo.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::uniform_real_distribution<double>(b.lo[i], b.hi[i])(rng);
  return p;
}

/// Random polynomial in x1 with integer-valued coefficients in [-3,3],
/// degree <= max_degree, printed in the expression grammar.
struct Poly {
  std::vector<double> coeffs;  // coeffs[d] * x^d

  double operator()(double x) const {
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  std::string text(const std::string& var = "x1") const {
    std::string s = "0";
    for (std::size_t d = 0; d < coeffs.size(); ++d) {
      if (coeffs[d] == 0.0) continue;
      s += " + (" + std::to_string(coeffs[d]) + ")";
      if (d > 0) s += "*" + var + "^" + std::to_string(d);
    }
    return s;
  }
};

inline Poly random_poly(std::mt19937_64& rng, int max_degree) {
  std::uniform_int_distribution<int> deg(0, max_degree), coef(-3, 3);
  Poly p;
  const int d = deg(rng);
  for (int i = 0; i <= d; ++i) p.coeffs.push_back(coef(rng));
  if (p.coeffs.back() == 0.0) p.coeffs.back() = 1.0;
  return p;
}

/// Integral of a polynomial over [a,b] in closed form.
inline double integrate(const Poly& p, double a, double b) {
  double acc = 0.0;
  for (std::size_t d = 0; d < p.coeffs.size(); ++d)
    acc += p.coeffs[d] * (std::pow(b, d + 1) - std::pow(a, d + 1)) / static_cast<double>(d + 1);
  return acc;
}

inline Poly multiply(const Poly& a, const Poly& b) {
  Poly r;
  r.coeffs.assign(a.coeffs.size() + b.coeffs.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.coeffs.size(); ++i)
    for (std::size_t j = 0; j < b.coeffs.size(); ++j) r.coeffs[i + j] += a.coeffs[i] * b.coeffs[j];
  return r;
}

}  // namespace oracle
