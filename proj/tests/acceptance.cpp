// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <algorithm>
#include <map>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "regcalc/connection.hpp"
#include "regcalc/multiplicity.hpp"
#include "support/atlases.hpp"
#include "support/corpus.hpp"
#include "support/covariant.hpp"
#include "support/oracles.hpp"

using namespace regcalc;
using fixture::kPi;

namespace {

/// Collects failed expectations; the first few are kept for the report.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (ok) return;
    ++failed_;
    if (messages_.size() < 5) messages_.push_back(what);
  }

  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }

  bool passed() const { return failed_ == 0; }

  std::string summary() const {
    std::string out = std::to_string(count_ - failed_) + "/" + std::to_string(count_) + " checks";
    if (!notes_.empty()) out += "; " + notes_;
    for (const auto& m : messages_) out += "\n      " + m;
    return out;
  }

 private:
  std::size_t count_ = 0, failed_ = 0;
  std::vector<std::string> messages_;
  std::string notes_;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------

void index_laws(Checks& c) {
  auto pointwise = builtin_structure("pointwise_ck", {Order::finite(8), {}});
  auto rep = check_distributive_laws(pointwise);
  c.expect(rep.exhaustive && rep.triples_checked == 729, "pointwise_ck k=8: " + std::to_string(rep.triples_checked) + " triples");
  c.expect(rep.violations.empty(), "pointwise_ck k=8: " + std::to_string(rep.violations.size()) + " violations");
  c.expect(rep.partial.empty(), "pointwise_ck k=8 has partial cases");

  // independent evaluation of both laws with max as eps and delta
  std::size_t oracle_violations = 0;
  for (int i = 0; i <= 8; ++i) {
    if (std::max(i, i) != i) ++oracle_violations;
    for (int j = 0; j <= 8; ++j)
      for (int k = 0; k <= 8; ++k) {
        if (std::max(i, std::max(j, k)) != std::max(std::max(i, j), std::max(i, k))) ++oracle_violations;
        if (std::max(std::max(i, j), k) != std::max(std::max(i, k), std::max(j, k))) ++oracle_violations;
      }
  }
  c.expect(oracle_violations == 0, "max oracle disagrees");

  auto holder = builtin_structure("holder_lp", {std::nullopt, {1, 2, 3, 4, 6, 12}});
  auto h = check_distributive_laws(holder);
  c.expect(h.exhaustive && h.triples_checked == 216, "holder_lp: " + std::to_string(h.triples_checked) + " triples");
  c.expect(h.violations.empty(), "holder_lp: " + std::to_string(h.violations.size()) + " violations");
  c.note("holder partial (one side undefined): " + std::to_string(h.partial.size()));

  // independent oracle: 1/r = 1/i + 1/j in integers, delta = min
  const std::vector<std::int64_t> P{1, 2, 3, 4, 6, 12};
  auto eps = [](std::int64_t i, std::int64_t j) -> std::optional<std::int64_t> {
    if ((i * j) % (i + j) != 0) return std::nullopt;
    return i * j / (i + j);
  };
  auto in_base = [&](std::int64_t v) { return std::find(P.begin(), P.end(), v) != P.end(); };
  std::size_t both_defined_mismatch = 0;
  for (auto i : P)
    for (auto j : P)
      for (auto k : P) {
        auto lhs = eps(i, std::min(j, k));
        auto e1 = eps(i, j), e2 = eps(i, k);
        std::optional<std::int64_t> rhs;
        if (e1 && e2 && in_base(*e1) && in_base(*e2)) rhs = std::min(*e1, *e2);
        if (lhs && !in_base(*lhs)) lhs.reset();
        if (lhs && rhs && *lhs != *rhs) ++both_defined_mismatch;
      }
  c.expect(both_defined_mismatch == 0, "holder oracle finds left-law violations");
}

void gamma_windows(Checks& c) {
  auto ads = AdditiveDegreeSet::integers(Order::finite(10));
  c.expect(gamma_z(ads, 2, 0) == IndexSet::interval(8), "z=0: " + gamma_z(ads, 2, 0).describe());
  c.expect(gamma_z(ads, 2, 8) == IndexSet::finite({0}), "z=8: " + gamma_z(ads, 2, 8).describe());
  for (int z = 0; z <= 8; ++z) {
    const auto g = gamma_z(ads, 2, z);
    // oracle: l in Gamma_10 with z + l <= 10 - 2
    std::vector<Index> expect;
    for (int l = 0; l <= 10; ++l)
      if (z + l <= 8) expect.emplace_back(l);
    c.expect(g.elements() == expect, "z=" + std::to_string(z) + ": " + g.describe());
    if (z > 0) c.expect(g.subset_of(gamma_z(ads, 2, z - 1)), "not antitone at z=" + std::to_string(z));
  }
}

void glued_indices(Checks& c) {
  auto ds = builtin_structure("pointwise_ck", {Order::finite(4), {}});
  const auto dom = IndexSet::interval(4);
  auto id = IndexMap::identity("id", dom);
  auto two = IndexMap::constant("two", dom, Index(2));
  auto r = glued_regularity_indices(ds, id, id, two, two);
  // hand expansion with alpha = beta = id, alpha0(0) = beta0(0) = 2
  const int a1 = 1, a2 = 2, a00 = 2, b1 = 1, b2 = 2, b00 = 2;
  const int cube = std::max(a1, std::max(a1, std::max(a1, a00)));
  const int hand_alpha = std::max(cube, std::max(a2, a1));
  const int hand_beta = std::max(b1, std::max(b2, b00));
  c.expect(r.alpha0 == Index(hand_alpha) && r.alpha0 == Index(2), "alpha'0 = " + to_string(r.alpha0));
  c.expect(r.beta0 == Index(hand_beta) && r.beta0 == Index(2), "beta'0 = " + to_string(r.beta0));
}

void lp_inequalities(Checks& c) {
  const std::vector<Index> P{1, 2, 3, 4, 6, 12};
  auto holder = builtin_structure("holder_lp", {std::nullopt, P});
  auto young = builtin_structure("young_conv", {std::nullopt, P});
  std::mt19937_64 rng(4242);
  const Domain U(Box({0.0}, {1.0}));
  Grid grid(Box({0.0}, {1.0}), 256, false);
  const double h = grid.step(0);
  double worst = -INFINITY;
  std::size_t cases = 0;
  for (int n = 0; n < 200; ++n) {
    const auto pf = oracle::random_poly(rng, 4), pg = oracle::random_poly(rng, 4);
    const Expr f = parse(pf.text()), g = parse(pg.text());
    const Expr fg = f * g;
    const auto a = sample(f, grid), b = sample(g, grid);
    const auto conv = discrete_convolution(a, b, h);
    for (const auto& i : P)
      for (const auto& j : P) {
        const double di = boost::rational_cast<double>(i), dj = boost::rational_cast<double>(j);
        if (auto r = holder.eps(i, j)) {
          const double lhs = lp_norm(fg, boost::rational_cast<double>(*r), U, 256);
          const double rhs = lp_norm(f, di, U, 256) * lp_norm(g, dj, U, 256);
          c.expect(lhs <= rhs + 1e-9, "holder " + pf.text() + " , " + pg.text());
          worst = std::max(worst, lhs - rhs);
          ++cases;
        }
        if (auto r = young.eps(i, j)) {
          const double lhs = discrete_lp_norm(conv, h, boost::rational_cast<double>(*r));
          const double rhs = discrete_lp_norm(a, h, di) * discrete_lp_norm(b, h, dj);
          c.expect(lhs <= rhs + 1e-9, "young " + pf.text() + " , " + pg.text());
          worst = std::max(worst, lhs - rhs);
          ++cases;
        }
      }
  }
  c.note(std::to_string(cases) + " composable cases, max(lhs - rhs) = " + num(worst));
}

/// a0 + a1 sin(x) + a2 cos(2x) + a3 x^2 with random coefficients.
Expr random_c2(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return parse(exact(u(rng)) + " + " + exact(u(rng)) + "*sin(x1) + " + exact(u(rng)) + "*cos(2*x1) + " + exact(u(rng)) +
               "*x1^2");
}

void circle_gluing(Checks& c) {
  std::mt19937_64 rng(17);
  double sym_worst = 0.0, grid_worst = 0.0, oracle_worst = 0.0, grid_oracle_worst = 0.0;
  for (const auto& atlas : {fixture::circle(), fixture::circle_nonlinear()}) {
    auto pou = build_partition(atlas, 0.1);
    for (int trial = 0; trial < 3; ++trial) {
      std::vector<LocalCoefficients> locals{local_connection(atlas, "A", {random_c2(rng)}),
                                            local_connection(atlas, "B", {random_c2(rng)})};
      auto sym = glue(atlas, pou, locals);
      auto grid = glue(atlas, pou, locals, GlueMode::grid);
      const auto ls = verify_connection_law(sym, 64);
      const auto lg = verify_connection_law(grid, 64);
      sym_worst = std::max(sym_worst, ls.max_residual());
      grid_worst = std::max(grid_worst, lg.max_residual());
      c.expect(ls.max_residual() <= 1e-6, "symbolic law residual " + num(ls.max_residual()));
      c.expect(lg.max_residual() <= 1e-3, "grid law residual " + num(lg.max_residual()));

      // finite-difference oracle: Gamma_A must be Gamma_B acting on the A-frame
      const Overlap* o = atlas.overlap(0, 1);
      for (std::size_t p = 0; p < o->pieces.size(); ++p) {
        const Box& d = o->pieces[p].domain;
        CompiledExpr y(o->pieces[p].map[0]);
        oracle::VecFn yfn = [&](const std::vector<double>& x) { return std::vector<double>{y(x)}; };
        for (const auto* field : {static_cast<const CoefficientField*>(&sym), static_cast<const CoefficientField*>(&grid)}) {
          oracle::VecFn gfn = [&](const std::vector<double>& w) { return field->evaluate(1, w); };
          for (int i = 1; i < 25; ++i) {
            const std::vector<double> x{d.lo[0] + i * d.width(0) / 25};
            const double expect = oracle::covariant_coefficients(yfn, gfn, x)[0];
            const double got = field->evaluate(0, x)[0];
            const double err = std::abs(got - expect);
            if (field == &sym) {
              oracle_worst = std::max(oracle_worst, err);
              c.expect(err <= 1e-6, "symbolic vs oracle at " + num(x[0]) + ": " + num(err));
            } else {
              grid_oracle_worst = std::max(grid_oracle_worst, err);
              c.expect(err <= 1e-3, "grid vs oracle at " + num(x[0]) + ": " + num(err));
            }
          }
        }
      }
    }
  }
  c.note("symbolic law " + num(sym_worst) + ", grid law " + num(grid_worst) + ", symbolic vs oracle " +
         num(oracle_worst) + ", grid vs oracle " + num(grid_oracle_worst));
}

void partition_exactness(Checks& c) {
  std::mt19937_64 rng(99);
  for (const auto& [name, atlas, margin] :
       {std::tuple{"S1", fixture::circle(), 0.1}, std::tuple{"T2", fixture::torus(), 0.2}}) {
    auto pou = build_partition(atlas, margin);
    double worst = 0.0;
    const std::size_t per_chart = 1000 / atlas.size() + 1;
    std::size_t points = 0;
    for (std::size_t s = 0; s < atlas.size(); ++s) {
      const Box b = atlas.chart(s).image.bounding_box();
      for (std::size_t n = 0; n < per_chart; ++n) {
        const auto x = oracle::uniform_point(rng, {b.lo, b.hi});
        double sum = 0.0;
        for (double v : pou.values(s, x)) {
          sum += v;
          c.expect(v >= 0.0, std::string(name) + ": negative psi");
        }
        worst = std::max(worst, std::abs(sum - 1.0));
        ++points;
      }
      for (const auto& sb : pou.support(s))
        for (std::size_t i = 0; i < sb.dim(); ++i)
          c.expect(sb.lo[i] > b.lo[i] && sb.hi[i] < b.hi[i], std::string(name) + ": support touches the chart boundary");
    }
    c.expect(points >= 1000, "too few points");
    c.expect(worst <= 1e-12, std::string(name) + ": |sum - 1| = " + num(worst));
    const auto rep = verify_partition(pou, 1000);
    c.expect(rep.passed(1e-12) && rep.supports_interior, std::string(name) + ": verify_partition failed");
    c.note(std::string(name) + " max |sum - 1| = " + num(std::max(worst, rep.max_sum_error)));
  }
}

void affine_laws(Checks& c) {
  double round_trip = 0.0, tensorial = 0.0;
  std::mt19937_64 rng(5);
  for (const auto& atlas : {fixture::circle_nonlinear(), fixture::circle()}) {
    auto pou = build_partition(atlas, 0.05);
    auto g = glue(atlas, pou, {local_connection(atlas, "A", {random_c2(rng)}), local_connection(atlas, "B", {random_c2(rng)})});
    auto h = glue(atlas, pou, {local_connection(atlas, "A", {random_c2(rng)}), local_connection(atlas, "B", {random_c2(rng)})});
    auto w = difference(h, g);
    tensorial = std::max(tensorial, check_tensorial(w, 100).max_residual());
    auto back = add(g, w);
    for (std::size_t s = 0; s < atlas.size(); ++s) {
      const Box b = atlas.chart(s).image.bounding_box();
      for (int i = 1; i < 200; ++i) {
        const std::vector<double> x{b.lo[0] + i * b.width(0) / 200};
        round_trip = std::max(round_trip, std::abs(back.evaluate(s, x)[0] - h.evaluate(s, x)[0]));
      }
    }
  }
  auto torus = fixture::torus();
  auto pou = build_partition(torus, 0.2);
  std::vector<LocalCoefficients> lg, lh;
  for (std::size_t s = 0; s < torus.size(); ++s) {
    std::vector<Expr> f(8, Expr::constant(0.0)), k(8, Expr::constant(0.0));
    f[0] = parse("0.1*sin(x1)");
    k[7] = parse("0.2*cos(x2)");
    lg.push_back(local_connection(torus, torus.chart(s).name, f));
    lh.push_back(local_connection(torus, torus.chart(s).name, k));
  }
  auto w = difference(glue(torus, pou, lh), glue(torus, pou, lg));
  tensorial = std::max(tensorial, check_tensorial(w, 12).max_residual());
  c.expect(round_trip <= 1e-9, "round trip " + num(round_trip));
  c.expect(tensorial <= 1e-6, "tensoriality " + num(tensorial));
  c.note("round trip " + num(round_trip) + ", tensoriality " + num(tensorial));
}

Expr random_wave(std::mt19937_64& rng, double min_amplitude) {
  std::uniform_int_distribution<int> freq(-3, 3);
  std::uniform_real_distribution<double> phase(0.0, 2 * kPi), amp(min_amplitude, 2.0);
  return parse(exact(amp(rng)) + " * sin(" + std::to_string(freq(rng)) + "*x1 + " + std::to_string(freq(rng)) +
               "*x2 + " + exact(phase(rng)) + ")");
}

/// Every point of a grid 10x finer than the scan grid over `box` has the same
/// strict sign.
bool robust_on_refined_grid(const Expr& d, const Box& box, std::size_t scan_intervals, const Box& chart) {
  CompiledExpr f(d);
  std::vector<std::size_t> m(box.dim());
  for (std::size_t i = 0; i < box.dim(); ++i) {
    const double cell = chart.width(i) / static_cast<double>(scan_intervals);
    m[i] = static_cast<std::size_t>(std::ceil(box.width(i) / cell - 1e-9)) * 10;
  }
  std::vector<double> x(box.dim());
  int sign = 0;
  std::vector<std::size_t> idx(box.dim(), 0);
  while (true) {
    for (std::size_t i = 0; i < box.dim(); ++i) x[i] = box.lo[i] + box.width(i) * idx[i] / static_cast<double>(m[i]);
    const double v = f(x);
    const int s = v > kDifferenceThreshold ? 1 : v < -kDifferenceThreshold ? -1 : 0;
    if (s == 0 || (sign != 0 && s != sign)) return false;
    sign = s;
    std::size_t i = 0;
    while (i < idx.size() && ++idx[i] > m[i]) idx[i++] = 0;
    if (i == idx.size()) break;
  }
  return true;
}

void multiplicity_suite(Checks& c) {
  std::mt19937_64 rng(2024);
  auto atlas = fixture::torus(Order::infinity());
  WitnessBudget budget;
  budget.intervals = 24;
  int pairs = 0, rejected = 0;
  std::size_t witnesses = 0;
  while (pairs < 50) {
    std::vector<std::vector<Expr>> f(atlas.size()), g(atlas.size());
    for (std::size_t s = 0; s < atlas.size(); ++s)
      for (int k = 0; k < 8; ++k) {
        f[s].push_back(random_wave(rng, 0.0));
        g[s].push_back(f[s].back() + random_wave(rng, 0.5));
      }
    ThreeParamFamily F(atlas, f), G(atlas, g);
    if (!additively_different(F, G, budget.intervals).holds()) {
      ++rejected;
      continue;
    }
    ++pairs;
    auto rep = locally_different(F, G, budget);
    c.expect(rep.entries.size() == 32, "expected 32 entries");
    for (const auto& e : rep.entries) {
      const bool found = e.outcome == WitnessOutcome::found && e.box;
      c.expect(found, "pair " + std::to_string(pairs) + " " + e.chart + ": " + e.reason);
      if (!found) continue;
      ++witnesses;
      const std::size_t s = atlas.chart_index(e.chart);
      const Expr d = F.at(s, e.c, e.a, e.b) - G.at(s, e.c, e.a, e.b);
      c.expect(robust_on_refined_grid(d, *e.box, budget.intervals, atlas.chart(s).image.bounding_box()),
               "witness box " + e.box->describe() + " not robust");
    }
  }
  c.note(std::to_string(witnesses) + " witness boxes over " + std::to_string(pairs) + " pairs (" +
         std::to_string(rejected) + " candidate pairs not additively different)");
}

void identity_coherence(Checks& c) {
  constexpr int k = 4;
  auto atlas = fixture::circle();
  const auto gk = IndexSet::interval(k);
  std::map<Index, Index> up{{Index(0), Index(2)}, {Index(1), Index(3)}, {Index(2), Index(4)}};
  std::vector<IndexMap> O{IndexMap::constant("alpha", gk, Index(12)), IndexMap::constant("alpha0", gk, Index(3))};
  std::vector<IndexMap> Q{IndexMap::identity("beta", gk),          IndexMap::constant("beta0", gk, Index(2)),
                          IndexMap::constant("three", gk, Index(3)), IndexMap::constant("four", gk, Index(4)),
                          IndexMap("plus", up),                     IndexMap::shift("shift", IndexSet::interval(2), Index(2))};
  auto cs = identity_connective(k, O, Q, Index(0));
  RegularitySpec structure{FamilyKind::lp, Order::finite(k), 6, IndexMap::constant("alpha", gk, Index(12)),
                           IndexMap::identity("beta", gk)};
  std::vector<LocalCoefficients> locals{local_connection(atlas, "A", {parse("bump((x1 - 3)/2) * x1")}),
                                        local_connection(atlas, "B", {parse("bump((x1 - 2.5)/2)")})};
  const std::vector<Expr> tests{parse("bump((x1 - 3)/1.5)"), parse("x1^2"), parse("1")};
  const std::vector<Expr> bumps{parse("bump((x1 - 3)/2)")};
  PipelineInput in{atlas,
                   structure,
                   builtin_structure("holder_lp", {std::nullopt, {1, 2, 3, 4, 6, 12}}),
                   IndexMap::constant("alpha0", gk, Index(12)),
                   IndexMap::constant("beta0", gk, Index(2)),
                   cs,
                   Index(0),
                   IndexMap::constant("theta", gk, Index(3)),
                   IndexMap("vartheta", up),
                   locals,
                   0.1,
                   tests,
                   bumps,
                   std::nullopt,
                   {},
                   {},
                   64,
                   1e-6};
  const auto res = regular_existence_pipeline(in);
  c.expect(res.xi == "identity", "xi is " + res.xi);
  c.expect(res.verdict == Verdict::member, "pipeline verdict " + std::string(verdict_name(res.verdict)));

  // bit identity against an independent plain gluing
  const auto pou = build_partition(atlas, 0.1);
  const auto plain = glue(atlas, pou, locals);
  std::size_t compared = 0;
  for (std::size_t s = 0; s < atlas.size(); ++s)
    for (const auto& cell : atlas.cells(s)) {
      const auto& a = res.connection.coefficients(s, cell.sig);
      const auto& b = plain.coefficients(s, cell.sig);
      c.expect(a.size() == b.size(), "coefficient count differs");
      for (std::size_t q = 0; q < a.size() && q < b.size(); ++q) c.expect(to_string(a[q]) == to_string(b[q]), "expressions differ");
    }
  for (std::size_t s = 0; s < atlas.size(); ++s) {
    const Box bb = atlas.chart(s).image.bounding_box();
    for (int i = 1; i < 500; ++i) {
      const std::vector<double> x{bb.lo[0] + i * bb.width(0) / 500};
      const double u = res.connection.evaluate(s, x)[0], v = plain.evaluate(s, x)[0];
      c.expect(std::memcmp(&u, &v, sizeof u) == 0, "values differ at " + num(x[0]));
      ++compared;
    }
  }
  c.note(std::to_string(compared) + " bit-identical values");

  const Domain probe = atlas.chart(0).image;
  const auto nice = check_nice(cs, probe, tests, bumps, k);
  c.expect(nice.nice(), "niceness: " + nice.first_failure());
  c.expect(check_distributive(cs, probe, tests).passed, "distributivity");
  for (int r = 0; r <= k; ++r) c.expect(check_degree(cs, atlas, r).passed(), "degree " + std::to_string(r));
  c.expect(check_partition_preservation(cs, build_partition(atlas, 0.1)).passed(), "partition preservation on S1");
  Budget coarse;
  coarse.base_intervals = 8;  // 64 quotient bumps in two variables
  const auto torus = fixture::torus();
  c.expect(check_partition_preservation(cs, build_partition(torus, 0.2), {}, 2, coarse).passed(),
           "partition preservation on T2");
}

void derivative_oracle(Checks& c) {
  std::mt19937_64 rng(10);
  std::size_t evaluations = 0;
  double worst = 0.0;
  for (const auto& entry : corpus::expressions()) {
    Expr e = parse(entry.text);
    CompiledExpr f(e);
    const int dim = static_cast<int>(entry.box.lo.size());
    oracle::ScalarFn fn = [&](std::span<const double> p) { return f(p); };
    for (int order = 1; order <= 2; ++order)
      for (const auto& mi : multi_indices(dim, order)) {
        CompiledExpr d(differentiate(e, to_multi_index(mi)));
        for (int n = 0; n < 100; ++n) {
          const auto p = oracle::uniform_point(rng, entry.box);
          const double got = d(p);
          const double fd = oracle::finite_difference(fn, p, mi, 2e-3 * order);
          const double tol = std::max(1e-6, 1e-6 * std::abs(got));
          worst = std::max(worst, std::abs(got - fd) / tol);
          c.expect(std::abs(got - fd) <= tol, entry.text + " order " + std::to_string(order) + " at " +
                                                  CompiledExpr::format_point(p) + ": " + num(got) + " vs " + num(fd));
          ++evaluations;
        }
      }
  }
  c.note(std::to_string(corpus::expressions().size()) + " expressions, " + std::to_string(evaluations) +
         " comparisons, worst error/tolerance " + num(worst));
}

struct Criterion {
  int id;
  const char* title;
  double limit_s;  // 0: untimed
  std::function<void(Checks&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "index laws (pointwise_ck k=8, holder_lp)", 1.0, index_laws},
      {2, "Gamma_k[z] endpoints and antitonicity", 0.0, gamma_windows},
      {3, "glued regularity indices vs nested-max expansion", 0.0, glued_indices},
      {4, "Hoelder/Young inequalities on 200 random polynomial pairs", 0.0, lp_inequalities},
      {5, "S1 gluing: symbolic and grid laws vs finite-difference oracle", 10.0, circle_gluing},
      {6, "partition of unity exactness on S1 and T2", 0.0, partition_exactness},
      {7, "affine-space round trip and tensoriality", 0.0, affine_laws},
      {8, "multiplicity witnesses on 50 random pairs", 60.0, multiplicity_suite},
      {9, "identity-xi coherence of the existence pipeline", 0.0, identity_coherence},
      {10, "symbolic derivatives vs central differences on the corpus", 0.0, derivative_oracle},
  };
  int failures = 0;
  for (const auto& cr : criteria) {
    Checks checks;
    const auto start = std::chrono::steady_clock::now();
    try {
      cr.run(checks);
    } catch (const std::exception& e) {
      checks.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cr.limit_s > 0) checks.expect(secs < cr.limit_s, "took " + num(secs) + " s, limit " + num(cr.limit_s) + " s");
    const bool ok = checks.passed();
    if (!ok) ++failures;
    std::printf("%s %2d  %s  [%.2f s]  %s\n", ok ? "PASS" : "FAIL", cr.id, cr.title, secs, checks.summary().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
