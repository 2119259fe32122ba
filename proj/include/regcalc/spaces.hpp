#pragma once

// Regularity spaces over finite unions of open boxes: C^r seminorms, L^p
// norms, three-valued membership verdicts under grid refinement, the
// conjunction of B_{alpha(i)} and C^{k-beta(i)} claims, and the closure of
// those intersections under multiplication by bump functions.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "regcalc/error.hpp"
#include "regcalc/expr.hpp"
#include "regcalc/grid.hpp"
#include "regcalc/index_algebra.hpp"

namespace regcalc {

enum class Verdict { member, not_member, inconclusive };

inline std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::member: return "member";
    case Verdict::not_member: return "not-member";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

/// Three-valued AND.
inline Verdict conjunction(Verdict a, Verdict b) {
  if (a == Verdict::not_member || b == Verdict::not_member) return Verdict::not_member;
  if (a == Verdict::inconclusive || b == Verdict::inconclusive) return Verdict::inconclusive;
  return Verdict::member;
}

struct Budget {
  /// Intervals per axis of the coarsest grid; 0 picks 64, 32, 8 for dimension 1, 2, >= 3.
  std::size_t base_intervals = 0;
  /// Number of grids, each twice as fine as the previous one (>= 3).
  int refinements = 4;
  /// Number of compact exhaustion levels checked for C^r claims.
  int levels = 3;
  int jobs = 1;

  std::size_t intervals(std::size_t dim, int refinement) const {
    std::size_t m = base_intervals;
    if (m == 0) m = dim <= 1 ? 64 : dim == 2 ? 32 : 8;
    return m << refinement;
  }
};

// ---------------------------------------------------------------------------
// Norms

namespace detail {

/// Coordinate pattern search for a local maximum of |e| inside the closed
/// box, starting at `x` with the given initial steps. Steps stop shrinking at
/// 1/1000 of their initial size, so the resolution follows the grid and an
/// unbounded |e| keeps growing under refinement.
inline double polish_max(const CompiledExpr& e, const Box& box, std::vector<double> x, std::vector<double> step) {
  const std::vector<double> initial = step;
  double best = std::abs(e(x));
  std::vector<double> y(x.size());
  for (int iter = 0; iter < 400; ++iter) {
    bool improved = false;
    for (std::size_t i = 0; i < x.size(); ++i)
      for (double s : {-1.0, 1.0}) {
        y = x;
        y[i] = std::clamp(x[i] + s * step[i], box.lo[i], box.hi[i]);
        const double v = std::abs(e(y));
        if (v > best) {
          best = v;
          x = y;
          improved = true;
        }
      }
    if (!improved) {
      bool done = true;
      for (std::size_t i = 0; i < x.size(); ++i) {
        step[i] *= 0.5;
        done &= step[i] < 1e-3 * initial[i];
      }
      if (done) break;
    }
  }
  return best;
}

}  // namespace detail

/// sup over grid points of |e| on the closed grid of `box`. Throws
/// EvaluationError at the first failing point (in index order). With
/// `polish`, the best grid points of the three best blocks are refined by a
/// local pattern search, which sharpens the estimate for peaked functions.
inline double grid_sup(const CompiledExpr& e, const Box& box, std::size_t intervals, int jobs = 1,
                       bool polish = false) {
  Grid grid(box, intervals, true);
  auto parts = parallel_blocks(grid.size(), jobs, [&](std::size_t b, std::size_t end) {
    std::vector<double> p(box.dim());
    std::pair<double, std::size_t> m{0.0, b};
    for (std::size_t n = b; n < end; ++n) {
      grid.point(n, p);
      const double v = std::abs(e(p));
      if (v > m.first) m = {v, n};
    }
    return m;
  });
  double m = 0.0;
  for (const auto& v : parts) m = std::max(m, v.first);
  if (!polish) return m;
  std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<double> step(box.dim());
  for (std::size_t i = 0; i < box.dim(); ++i) step[i] = grid.step(i);
  for (std::size_t c = 0; c < std::min<std::size_t>(3, parts.size()); ++c)
    m = std::max(m, detail::polish_max(e, box, grid.point(parts[c].second), step));
  return m;
}

/// Sum over components of the sup over |mu| = r of the grid sup of
/// |d^mu f| on the closed box `K`.
inline double ck_seminorm(std::span<const Expr> components, int r, const Box& K, std::size_t intervals,
                          int jobs = 1, bool polish = false) {
  double total = 0.0;
  for (const auto& f : components) {
    double best = 0.0;
    for (const auto& mi : multi_indices(static_cast<int>(K.dim()), r)) {
      CompiledExpr d(differentiate(f, to_multi_index(mi)));
      best = std::max(best, grid_sup(d, K, intervals, jobs, polish));
    }
    total += best;
  }
  return total;
}

inline double ck_seminorm(const Expr& f, int r, const Box& K, std::size_t intervals, int jobs = 1,
                          bool polish = false) {
  return ck_seminorm(std::span<const Expr>(&f, 1), r, K, intervals, jobs, polish);
}

/// (integral over U of |f|^p)^(1/p) by the composite midpoint rule with
/// `intervals` cells per axis of each box. Unions of several boxes use the
/// bounding-box grid restricted to cells whose midpoint lies in U.
inline double lp_norm(const Expr& f, double p, const Domain& U, std::size_t intervals, int jobs = 1) {
  if (!(p >= 1.0)) throw ConfigError("L^p norms need p >= 1");
  CompiledExpr e(f);
  const bool single = U.boxes().size() == 1;
  Grid grid(single ? U.boxes().front() : U.bounding_box(), intervals, false);
  auto parts = parallel_blocks(grid.size(), jobs, [&](std::size_t b, std::size_t end) {
    std::vector<double> pt(grid.box().dim());
    double acc = 0.0;
    for (std::size_t n = b; n < end; ++n) {
      grid.point(n, pt);
      if (!single && !U.contains(pt)) continue;
      acc += std::pow(std::abs(e(pt)), p);
    }
    return acc;
  });
  double acc = 0.0;
  for (double v : parts) acc += v;
  return std::pow(acc * grid.cell_volume(), 1.0 / p);
}

// ---------------------------------------------------------------------------
// Refinement verdicts

struct NormEvidence {
  std::string what;
  std::vector<std::size_t> intervals;
  std::vector<double> values;
  std::string error;
  Verdict verdict = Verdict::inconclusive;
};

/// member: finite values whose last two relative changes are both <= 5%;
/// not-member: a non-finite value, or strictly increasing through every
/// refinement without settling; inconclusive otherwise.
inline Verdict classify_refinements(std::span<const double> v) {
  if (v.size() < 3) throw Error("refinement verdicts need at least three grids");
  for (double x : v)
    if (!std::isfinite(x)) return Verdict::not_member;
  auto change = [&](std::size_t k) {
    const double d = std::abs(v[k] - v[k - 1]);
    const double scale = std::max(std::abs(v[k]), std::abs(v[k - 1]));
    if (d <= 1e-12 * std::max(1.0, scale)) return 0.0;
    return d / scale;
  };
  const std::size_t n = v.size();
  const double last = change(n - 1);
  const double prev = change(n - 2);
  if (last <= 0.05 && prev <= 0.05) return Verdict::member;
  bool increasing = true;
  for (std::size_t k = 1; k < n; ++k) increasing &= v[k] > v[k - 1];
  return increasing ? Verdict::not_member : Verdict::inconclusive;
}

namespace detail {

template <class F>
NormEvidence refine(std::string what, std::size_t dim, const Budget& budget, F&& value_at) {
  NormEvidence ev;
  ev.what = std::move(what);
  try {
    for (int r = 0; r < std::max(3, budget.refinements); ++r) {
      const std::size_t m = budget.intervals(dim, r);
      ev.intervals.push_back(m);
      ev.values.push_back(value_at(m));
    }
    ev.verdict = classify_refinements(ev.values);
  } catch (const EvaluationError& e) {
    ev.error = e.what();
    ev.verdict = Verdict::not_member;
  }
  return ev;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Specs and claims

enum class FamilyKind { lp, ck };

inline std::string_view family_name(FamilyKind k) { return k == FamilyKind::lp ? "lp" : "ck"; }

/// The family B (L^p with B_p = L^p, or C^k with B_m = C^{k-m}) together with
/// the maps alpha, beta and the regularity order k. Infinite k is checked up
/// to `k_check`.
struct RegularitySpec {
  FamilyKind kind = FamilyKind::lp;
  Order k = Order::finite(0);
  int k_check = 6;
  IndexMap alpha;
  IndexMap beta;

  int order() const { return k.infinite ? k_check : static_cast<int>(k.value); }

  /// Smoothness order required by C^{k - m}.
  int ck_order(const Index& m) const {
    if (!is_integral(m)) throw ConfigError("C^{k-m} needs an integral index, got " + to_string(m));
    const auto r = static_cast<std::int64_t>(order()) - m.numerator();
    if (r < 0) throw ConfigError("C^{k-m} with m = " + to_string(m) + " > k = " + k.describe());
    return static_cast<int>(r);
  }

  std::string b_space(const Index& i) const {
    if (kind == FamilyKind::lp) return "L^" + to_string(alpha(i));
    return "C^" + std::to_string(ck_order(alpha(i)));
  }
  std::string c_space(const Index& i) const { return "C^" + std::to_string(ck_order(beta(i))); }
};

struct IntersectionVerdict {
  Verdict b = Verdict::inconclusive;
  Verdict c = Verdict::inconclusive;
  Verdict combined = Verdict::inconclusive;
  std::vector<NormEvidence> evidence;
};

/// Verdicts for f in C^q(U), q = 0..r, with the seminorm evidence.
struct CkProfile {
  std::vector<Verdict> upto;
  std::vector<NormEvidence> evidence;
};

/// f in C^q(U) when every seminorm of order <= q is stable on every
/// exhaustion level. Stops at the first order that fails.
inline CkProfile ck_profile(const Expr& f, int r, const Domain& U, const Budget& budget,
                            const std::string& label = "f") {
  if (r > kMaxDerivativeOrder) throw OrderBudgetError("C^" + std::to_string(r) + " exceeds the derivative budget");
  CkProfile profile;
  Verdict acc = Verdict::member;
  for (int q = 0; q <= r; ++q) {
    if (acc == Verdict::not_member) {
      profile.upto.push_back(acc);
      continue;
    }
    std::vector<CompiledExpr> partial;
    for (const auto& mi : multi_indices(static_cast<int>(U.dim()), q))
      partial.emplace_back(differentiate(f, to_multi_index(mi)));
    for (int level = 0; level < budget.levels && acc != Verdict::not_member; ++level) {
      const auto K = U.exhaustion(level);
      auto ev = detail::refine("C^" + std::to_string(q) + " seminorm of " + label + " on K_" + std::to_string(level),
                               U.dim(), budget, [&](std::size_t m) {
                                 double s = 0.0;
                                 for (const auto& box : K)
                                   for (const auto& d : partial) s = std::max(s, grid_sup(d, box, m, budget.jobs, true));
                                 return s;
                               });
      acc = conjunction(acc, ev.verdict);
      profile.evidence.push_back(std::move(ev));
    }
    profile.upto.push_back(acc);
  }
  return profile;
}

inline Verdict check_ck(const Expr& f, int r, const Domain& U, const Budget& budget, std::vector<NormEvidence>* out,
                        const std::string& label = "f") {
  auto profile = ck_profile(f, r, U, budget, label);
  if (out)
    for (auto& e : profile.evidence) out->push_back(std::move(e));
  return profile.upto.back();
}

inline Verdict check_lp(const Expr& f, double p, const Domain& U, const Budget& budget,
                        std::vector<NormEvidence>* out, const std::string& label = "f") {
  auto ev = detail::refine("L^" + detail::format_number(p) + " norm of " + label, U.dim(), budget,
                           [&](std::size_t m) { return lp_norm(f, p, U, m, budget.jobs); });
  const Verdict v = ev.verdict;
  if (out) out->push_back(std::move(ev));
  return v;
}

/// f in B_{alpha(i)}(U) and f in C^{k-beta(i)}(U), as a conjunction.
inline IntersectionVerdict check_intersection(const Expr& f, const Domain& U, const RegularitySpec& spec,
                                              const Index& i, const Budget& budget,
                                              const std::string& label = "f") {
  IntersectionVerdict out;
  const Index a = spec.alpha(i);
  const int rc = spec.ck_order(spec.beta(i));
  if (spec.kind == FamilyKind::lp) {
    out.b = check_lp(f, boost::rational_cast<double>(a), U, budget, &out.evidence, label);
    out.c = check_ck(f, rc, U, budget, &out.evidence, label);
  } else {
    const int rb = spec.ck_order(a);
    auto profile = ck_profile(f, std::max(rb, rc), U, budget, label);
    out.b = profile.upto[static_cast<std::size_t>(rb)];
    out.c = profile.upto[static_cast<std::size_t>(rc)];
    for (auto& e : profile.evidence) out.evidence.push_back(std::move(e));
  }
  out.combined = conjunction(out.b, out.c);
  return out;
}

struct IndexClaim {
  Index i;
  std::string b_space, c_space;
  Verdict b = Verdict::member;
  Verdict c = Verdict::member;
  Verdict verdict = Verdict::member;
  std::vector<NormEvidence> evidence;
};

/// "f is a (B, k, alpha, beta | S)-function on U" with its numeric verdicts.
struct MembershipClaim {
  std::string function;
  std::string domain;
  std::vector<IndexClaim> per_index;
  Verdict verdict = Verdict::member;

  std::optional<Verdict> at(const Index& i) const {
    for (const auto& c : per_index)
      if (c.i == i) return c.verdict;
    return std::nullopt;
  }
};

/// For every i in S: all partial derivatives of total order i must lie in
/// B_{alpha(i)}(U) and in C^{k-beta(i)}(U).
inline MembershipClaim check_membership(const Expr& f, const Domain& U, const RegularitySpec& spec,
                                        const std::vector<Index>& S, const Budget& budget = {}) {
  MembershipClaim claim;
  claim.function = to_string(f);
  claim.domain = U.describe();
  const int dim = static_cast<int>(U.dim());
  if (f.arity() > dim)
    throw ConfigError("function " + claim.function + " uses more variables than the domain dimension");
  for (const auto& i : S) {
    if (!is_integral(i) || i < Index(0) || i > Index(spec.order()))
      throw ConfigError("derivative order " + to_string(i) + " is outside [0," + spec.k.describe() + "]");
    IndexClaim ic;
    ic.i = i;
    ic.b_space = spec.b_space(i);
    ic.c_space = spec.c_space(i);
    for (const auto& mi : multi_indices(dim, static_cast<int>(i.numerator()))) {
      std::string label = "d^(";
      for (std::size_t v = 0; v < mi.size(); ++v) label += (v ? "," : "") + std::to_string(mi[v]);
      label += ") f";
      auto iv = check_intersection(differentiate(f, to_multi_index(mi)), U, spec, i, budget, label);
      ic.b = conjunction(ic.b, iv.b);
      ic.c = conjunction(ic.c, iv.c);
      for (auto& e : iv.evidence) ic.evidence.push_back(std::move(e));
    }
    ic.verdict = conjunction(ic.b, ic.c);
    claim.verdict = conjunction(claim.verdict, ic.verdict);
    claim.per_index.push_back(std::move(ic));
  }
  return claim;
}

// ---------------------------------------------------------------------------
// Bump closure

/// Compactly supported inside U: exactly zero on every grid point of the
/// bounding box that lies outside the union of the boxes pulled in by 1/64
/// of their width, and C^k on U.
inline Verdict check_bump_class(const Expr& g, const Domain& U, int k, const Budget& budget, std::string* why) {
  CompiledExpr e(g);
  Domain core([&] {
    std::vector<Box> c;
    for (const auto& b : U.boxes()) c.push_back(b.shrunk(1.0 / 64.0));
    return c;
  }());
  const Box bb = U.bounding_box();
  Grid grid(bb, budget.intervals(U.dim(), budget.refinements - 1), true);
  std::vector<double> p(U.dim());
  for (std::size_t n = 0; n < grid.size(); ++n) {
    grid.point(n, p);
    if (core.contains(p)) continue;
    auto r = e.try_evaluate(p);
    if (r.error || r.value != 0.0) {
      if (why) *why = "nonzero near the boundary at " + CompiledExpr::format_point(p);
      return Verdict::not_member;
    }
  }
  const Verdict v = check_ck(g, k, U, budget, nullptr, "g");
  if (v != Verdict::member && why) *why = "not verified C^" + std::to_string(k);
  return v;
}

struct PresheafCase {
  std::size_t bump = 0, test = 0;
  Index i;
  Verdict verdict = Verdict::member;
};

struct PresheafReport {
  /// Inputs that do not satisfy the preconditions, with the reason.
  std::vector<std::string> rejected;
  std::vector<PresheafCase> cases;
  std::vector<PresheafCase> failures;

  bool passed() const { return failures.empty(); }
};

/// For every bump g, member test function f and i in S: g*f must again lie in
/// B_{alpha(i)}(U) and C^{k-beta(i)}(U).
inline PresheafReport check_bkab_presheaf(const RegularitySpec& spec, const Domain& U, const std::vector<Index>& S,
                                          const std::vector<Expr>& tests, const std::vector<Expr>& bumps,
                                          const Budget& budget = {}) {
  PresheafReport report;
  std::vector<bool> bump_ok(bumps.size()), test_ok(tests.size());
  for (std::size_t b = 0; b < bumps.size(); ++b) {
    std::string why;
    bump_ok[b] = check_bump_class(bumps[b], U, spec.order(), budget, &why) == Verdict::member;
    if (!bump_ok[b]) report.rejected.push_back("bump " + std::to_string(b) + " (" + to_string(bumps[b]) + "): " + why);
  }
  for (std::size_t t = 0; t < tests.size(); ++t) {
    test_ok[t] = true;
    for (const auto& i : S) {
      const auto v = check_intersection(tests[t], U, spec, i, budget).combined;
      if (v != Verdict::member) {
        test_ok[t] = false;
        report.rejected.push_back("test " + std::to_string(t) + " (" + to_string(tests[t]) + ") is " +
                                  std::string(verdict_name(v)) + " of " + spec.b_space(i) + " n " + spec.c_space(i));
        break;
      }
    }
  }
  for (std::size_t b = 0; b < bumps.size(); ++b) {
    if (!bump_ok[b]) continue;
    for (std::size_t t = 0; t < tests.size(); ++t) {
      if (!test_ok[t]) continue;
      const Expr product = bumps[b] * tests[t];
      for (const auto& i : S) {
        PresheafCase c{b, t, i, check_intersection(product, U, spec, i, budget).combined};
        report.cases.push_back(c);
        if (c.verdict != Verdict::member) report.failures.push_back(c);
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Sampled norms for inequality checks

/// Values of f at the points of `grid`.
inline std::vector<double> sample(const Expr& f, const Grid& grid) {
  CompiledExpr e(f);
  std::vector<double> out(grid.size());
  std::vector<double> p(grid.box().dim());
  for (std::size_t n = 0; n < grid.size(); ++n) {
    grid.point(n, p);
    out[n] = e(p);
  }
  return out;
}

/// (weight * sum |v|^p)^(1/p).
inline double discrete_lp_norm(std::span<const double> values, double weight, double p) {
  double acc = 0.0;
  for (double v : values) acc += std::pow(std::abs(v), p);
  return std::pow(weight * acc, 1.0 / p);
}

/// (a * b)_n = h * sum_m a_m b_{n-m}, the full discrete convolution of two
/// uniformly sampled functions with step h.
inline std::vector<double> discrete_convolution(std::span<const double> a, std::span<const double> b, double h) {
  if (a.empty() || b.empty()) return {};
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  for (double& v : out) v *= h;
  return out;
}

}  // namespace regcalc
