#pragma once

// Three-parameter families Omega^c_ab on an atlas, the (additively) different
// predicates with explicit witness boxes, and the residual of the
// nonhomogeneous system F^c_xi(f) = Omega^c.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "regcalc/atlas.hpp"
#include "regcalc/connection.hpp"
#include "regcalc/connective.hpp"
#include "regcalc/error.hpp"
#include "regcalc/expr.hpp"
#include "regcalc/grid.hpp"
#include "regcalc/spaces.hpp"

namespace regcalc {

inline constexpr double kDifferenceThreshold = 1e-12;

class ThreeParamFamily {
 public:
  ThreeParamFamily(Atlas atlas, std::vector<std::vector<Expr>> omega, std::optional<SourceSpaces> claim = std::nullopt)
      : atlas_(std::move(atlas)), omega_(std::move(omega)), claim_(std::move(claim)) {
    const std::size_t n = atlas_.dim();
    if (omega_.size() != atlas_.size()) throw ConfigError("family needs one coefficient table per chart");
    for (std::size_t s = 0; s < omega_.size(); ++s) {
      if (omega_[s].size() != n * n * n)
        throw ConfigError("family on chart '" + atlas_.chart(s).name + "' needs " + std::to_string(n * n * n) +
                          " functions, got " + std::to_string(omega_[s].size()));
      for (const auto& e : omega_[s])
        if (e.arity() > static_cast<int>(n))
          throw ConfigError("family on chart '" + atlas_.chart(s).name + "' uses too many variables");
    }
  }

  /// Constant family: every Omega^c_ab equals `value` on every chart.
  static ThreeParamFamily constant(const Atlas& atlas, double value) {
    const std::size_t n = atlas.dim();
    return {atlas, std::vector<std::vector<Expr>>(atlas.size(), std::vector<Expr>(n * n * n, Expr::constant(value)))};
  }

  const Atlas& atlas() const { return atlas_; }
  const std::optional<SourceSpaces>& claim() const { return claim_; }
  const Expr& at(std::size_t s, std::size_t c, std::size_t a, std::size_t b) const {
    return omega_.at(s).at(coeff_index(atlas_.dim(), c, a, b));
  }
  const std::vector<Expr>& chart(std::size_t s) const { return omega_.at(s); }

  /// Omega^c = sum over a, b of Omega^c_ab.
  Expr sum(std::size_t s, std::size_t c) const {
    const std::size_t n = atlas_.dim();
    Expr out = at(s, c, 0, 0);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (a + b > 0) out = out + at(s, c, a, b);
    return out;
  }

  /// Membership of every Omega^c_ab in the claimed spaces on its chart image.
  std::vector<MembershipClaim> verify_claim(const Budget& budget = {}) const {
    if (!claim_) throw ConfigError("family has no claimed spaces");
    std::vector<MembershipClaim> out;
    for (std::size_t s = 0; s < omega_.size(); ++s)
      for (const auto& e : omega_[s]) out.push_back(check_membership(e, atlas_.chart(s).image, claim_->spec, claim_->S, budget));
    return out;
  }

 private:
  Atlas atlas_;
  std::vector<std::vector<Expr>> omega_;
  std::optional<SourceSpaces> claim_;
};

namespace detail {

inline void require_same_atlas(const ThreeParamFamily& F, const ThreeParamFamily& G) {
  if (!F.atlas().same_as(G.atlas())) throw ConfigError("families live on different atlases");
}

/// Open-grid midpoints of each box of the chart image, box by box.
inline std::vector<std::vector<double>> chart_grid(const Atlas& atlas, std::size_t s, std::size_t intervals) {
  std::vector<std::vector<double>> out;
  for (const auto& box : atlas.chart(s).image.boxes()) {
    Grid g(box, intervals, false);
    for (std::size_t i = 0; i < g.size(); ++i) out.push_back(g.point(i));
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Additively different

struct AdditiveEntry {
  std::string chart;
  std::size_t c = 0;
  bool different = false;
  double max_difference = 0.0;
  std::vector<double> witness;  // first grid point with a difference above threshold
};

struct AdditiveReport {
  std::vector<AdditiveEntry> entries;
  bool holds() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.different; });
  }
};

/// For each chart and c: Omega^c and the other family's Omega^c differ at
/// some open-grid point of the chart image by more than 1e-12.
inline AdditiveReport additively_different(const ThreeParamFamily& F, const ThreeParamFamily& G,
                                           std::size_t intervals = 0) {
  detail::require_same_atlas(F, G);
  const Atlas& atlas = F.atlas();
  const std::size_t n = atlas.dim();
  if (intervals == 0) intervals = Budget{}.intervals(n, 0);
  AdditiveReport rep;
  for (std::size_t s = 0; s < atlas.size(); ++s) {
    const auto pts = detail::chart_grid(atlas, s, intervals);
    for (std::size_t c = 0; c < n; ++c) {
      CompiledExpr d(F.sum(s, c) - G.sum(s, c));
      AdditiveEntry e{atlas.chart(s).name, c, false, 0.0, {}};
      for (const auto& x : pts) {
        const double v = std::abs(d(x));
        e.max_difference = std::max(e.max_difference, v);
        if (v > kDifferenceThreshold && !e.different) {
          e.different = true;
          e.witness = x;
        }
      }
      rep.entries.push_back(std::move(e));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Locally different

struct WitnessBudget {
  /// Intervals per axis of the scan grid; 0 picks the spaces default.
  std::size_t intervals = 0;
  /// Refinement factor of the robustness check over a witness box.
  std::size_t refine = 10;
  /// Seeds tried per (a, b, c) before giving up.
  std::size_t seeds = 64;
  int jobs = 1;
};

enum class WitnessOutcome { found, inconclusive };

inline std::string_view outcome_name(WitnessOutcome o) { return o == WitnessOutcome::found ? "found" : "inconclusive"; }

struct WitnessEntry {
  std::string chart;
  std::size_t a = 0, b = 0, c = 0;
  WitnessOutcome outcome = WitnessOutcome::inconclusive;
  std::optional<Box> box;
  std::vector<double> seed;
  double min_difference = 0.0;  // min |difference| on the refined grid of the box
  std::string reason;
};

struct WitnessReport {
  std::vector<WitnessEntry> entries;
  bool all_found() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const auto& e) { return e.outcome == WitnessOutcome::found; });
  }
};

namespace detail {

struct IndexRange {
  std::vector<std::size_t> lo, hi;  // inclusive cell indices per axis
};

inline Box range_box(const Box& box, const IndexRange& r, std::size_t intervals) {
  std::vector<double> lo(box.dim()), hi(box.dim());
  for (std::size_t i = 0; i < box.dim(); ++i) {
    const double h = box.width(i) / static_cast<double>(intervals);
    lo[i] = box.lo[i] + static_cast<double>(r.lo[i]) * h;
    hi[i] = r.hi[i] + 1 == intervals ? box.hi[i] : box.lo[i] + static_cast<double>(r.hi[i] + 1) * h;
  }
  return Box(lo, hi);
}

/// Every cell midpoint of `r` has |d| > threshold with sign `sign`.
inline bool range_clear(const CompiledExpr& d, const Box& box, const IndexRange& r, std::size_t intervals, double sign) {
  const std::size_t n = box.dim();
  std::vector<std::size_t> idx = r.lo;
  std::vector<double> x(n);
  while (true) {
    for (std::size_t i = 0; i < n; ++i)
      x[i] = box.lo[i] + (static_cast<double>(idx[i]) + 0.5) * box.width(i) / static_cast<double>(intervals);
    auto v = d.try_evaluate(x);
    if (v.error || !(sign * v.value > kDifferenceThreshold)) return false;
    std::size_t i = 0;
    for (; i < n && idx[i] == r.hi[i]; ++i) idx[i] = r.lo[i];
    if (i == n) return true;
    ++idx[i];
  }
}

struct RefinedCheck {
  double minimum = 0.0;  // min of sign * d over the open grid
  double slack = 0.0;    // bound on the drift of d within half a grid cell, from neighbour slopes
  bool confirms() const { return minimum > kDifferenceThreshold && minimum > 2.0 * slack; }
};

/// Samples sign * d on the open grid of `w` with cells[i] cells along axis i.
inline RefinedCheck refined_check(const CompiledExpr& d, const Box& w, const std::vector<std::size_t>& cells,
                                  double sign) {
  const std::size_t n = w.dim();
  std::vector<std::size_t> stride(n, 1);
  for (std::size_t i = 1; i < n; ++i) stride[i] = stride[i - 1] * cells[i - 1];
  const std::size_t total = stride[n - 1] * cells[n - 1];
  std::vector<double> h(n), values(total), x(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = w.width(i) / static_cast<double>(cells[i]);
  RefinedCheck out{std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t p = 0; p < total; ++p) {
    for (std::size_t i = 0; i < n; ++i)
      x[i] = w.lo[i] + (static_cast<double>((p / stride[i]) % cells[i]) + 0.5) * h[i];
    auto v = d.try_evaluate(x);
    values[p] = v.error ? -std::numeric_limits<double>::infinity() : sign * v.value;
    out.minimum = std::min(out.minimum, values[p]);
  }
  if (!std::isfinite(out.minimum)) return out;
  for (std::size_t i = 0; i < n; ++i) {
    double slope = 0.0;
    for (std::size_t p = 0; p < total; ++p)
      if ((p / stride[i]) % cells[i] + 1 < cells[i])
        slope = std::max(slope, std::abs(values[p + stride[i]] - values[p]) / h[i]);
    out.slack += slope * h[i] / 2;
  }
  return out;
}

/// `w` with every side moved inward by one grid cell.
inline Box inset(const Box& w, const std::vector<std::size_t>& cells) {
  std::vector<double> lo(w.lo), hi(w.hi);
  for (std::size_t i = 0; i < w.dim(); ++i) {
    const double h = w.width(i) / static_cast<double>(cells[i]);
    lo[i] += h;
    hi[i] -= h;
  }
  return Box(lo, hi);
}

inline WitnessEntry find_witness(const CompiledExpr& d, const Domain& image, std::size_t intervals,
                                 const WitnessBudget& budget) {
  WitnessEntry out;
  std::size_t tried = 0;
  const std::size_t n = image.dim();
  for (const auto& box : image.boxes()) {
    Grid g(box, intervals, false);
    std::vector<double> x(n);
    for (std::size_t p = 0; p < g.size() && tried < budget.seeds; ++p) {
      g.point(p, x);
      auto v = d.try_evaluate(x);
      if (v.error || !(std::abs(v.value) > kDifferenceThreshold)) continue;
      ++tried;
      const double sign = v.value > 0 ? 1.0 : -1.0;
      IndexRange r;
      for (std::size_t i = 0; i < n; ++i) {
        const double h = box.width(i) / static_cast<double>(intervals);
        const auto c = static_cast<std::size_t>(std::clamp((x[i] - box.lo[i]) / h, 0.0, double(intervals - 1)));
        r.lo.push_back(c);
        r.hi.push_back(c);
      }
      // grow one face at a time while the new slab keeps the sign
      for (bool grew = true; grew;) {
        grew = false;
        for (std::size_t i = 0; i < n; ++i)
          for (int side : {-1, 1}) {
            IndexRange slab = r;
            if (side < 0) {
              if (r.lo[i] == 0) continue;
              slab.lo[i] = slab.hi[i] = r.lo[i] - 1;
            } else {
              if (r.hi[i] + 1 >= intervals) continue;
              slab.lo[i] = slab.hi[i] = r.hi[i] + 1;
            }
            if (!range_clear(d, box, slab, intervals, sign)) continue;
            (side < 0 ? r.lo[i] : r.hi[i]) = slab.lo[i];
            grew = true;
          }
      }
      // shrink toward the seed until the refined grid confirms the sign
      for (int attempt = 0; attempt < 8; ++attempt) {
        const Box w = range_box(box, r, intervals);
        std::vector<std::size_t> fine(n);
        for (std::size_t i = 0; i < n; ++i) fine[i] = budget.refine * (r.hi[i] - r.lo[i] + 1);
        for (const Box& candidate : {w, inset(w, fine)}) {
          const auto check = refined_check(d, candidate, fine, sign);
          if (check.confirms()) {
            out.outcome = WitnessOutcome::found;
            out.box = candidate;
            out.seed = x;
            out.min_difference = check.minimum;
            return out;
          }
        }
        bool shrunk = false;
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t seed_cell = static_cast<std::size_t>(
              std::clamp((x[i] - box.lo[i]) / (box.width(i) / static_cast<double>(intervals)), 0.0,
                         double(intervals - 1)));
          if (r.lo[i] < seed_cell) r.lo[i] = seed_cell - (seed_cell - r.lo[i]) / 2, shrunk = true;
          if (r.hi[i] > seed_cell) r.hi[i] = seed_cell + (r.hi[i] - seed_cell) / 2, shrunk = true;
        }
        if (!shrunk) break;
      }
    }
  }
  out.reason = tried == 0 ? "no grid point with |difference| > 1e-12"
                          : "no witness box survived the refined check after " + std::to_string(tried) + " seeds";
  return out;
}

}  // namespace detail

/// For every chart and (a, b, c): an open box inside the chart image on which
/// Omega^c_ab and the other family's Omega^c_ab differ strictly, confirmed on
/// a 10x refined grid whose minimum also exceeds twice the slope-based drift
/// within half a fine cell. Needs a smooth atlas and the additive difference on
/// every chart and c; a search that finds nothing is inconclusive.
inline WitnessReport locally_different(const ThreeParamFamily& F, const ThreeParamFamily& G,
                                       const WitnessBudget& budget = {}) {
  detail::require_same_atlas(F, G);
  const Atlas& atlas = F.atlas();
  if (!atlas.smooth())
    throw PreconditionError("smooth atlas", "the atlas has class k = " + atlas.k().describe() + ", not infinity");
  const std::size_t n = atlas.dim();
  const std::size_t intervals = budget.intervals ? budget.intervals : Budget{}.intervals(n, 0);
  const auto add = additively_different(F, G, intervals);
  for (const auto& e : add.entries)
    if (!e.different)
      throw PreconditionError("locally additively different",
                              "Omega^" + std::to_string(e.c + 1) + " agrees on chart '" + e.chart + "'");
  const std::size_t per_chart = n * n * n;
  WitnessReport rep;
  rep.entries.resize(atlas.size() * per_chart);
  parallel_for(rep.entries.size(), budget.jobs, [&](std::size_t k) {
    const std::size_t s = k / per_chart, q = k % per_chart;
    const std::size_t b = q % n, a = (q / n) % n, c = q / (n * n);
    CompiledExpr d(F.at(s, c, a, b) - G.at(s, c, a, b));
    auto e = detail::find_witness(d, atlas.chart(s).image, intervals, budget);
    e.chart = atlas.chart(s).name;
    e.a = a;
    e.b = b;
    e.c = c;
    rep.entries[k] = std::move(e);
  });
  return rep;
}

// ---------------------------------------------------------------------------
// Residual of the nonhomogeneous system

struct ResidualEntry {
  std::string chart;
  std::size_t c = 0;
  double sup = 0.0;
  std::vector<double> point;
};

/// sup over open-grid points of each chart image of
/// |sum_ab xi(Gamma)^c_ab - Omega^c|.
inline std::vector<ResidualEntry> residual(const GlobalConnection& connection, const Transformer& xi,
                                           const ThreeParamFamily& omega, std::size_t intervals = 0) {
  const Atlas& atlas = connection.atlas();
  if (!atlas.same_as(omega.atlas())) throw ConfigError("family and connection live on different atlases");
  if (connection.mode() == GlueMode::grid && !xi.is_identity)
    throw ConfigError("a grid-mode connection only supports the identity transformer");
  const std::size_t n = atlas.dim();
  if (intervals == 0) intervals = Budget{}.intervals(n, 0);
  std::vector<ResidualEntry> out;
  for (std::size_t s = 0; s < atlas.size(); ++s) {
    const auto pts = detail::chart_grid(atlas, s, intervals);
    std::vector<CompiledExpr> target;
    for (std::size_t c = 0; c < n; ++c) target.emplace_back(omega.sum(s, c));
    std::vector<ResidualEntry> rows(n);
    for (std::size_t c = 0; c < n; ++c) rows[c] = {atlas.chart(s).name, c, 0.0, {}};
    std::map<Signature, std::vector<CompiledExpr>> sums;
    std::vector<double> gamma(connection.components());
    for (const auto& x : pts) {
      std::vector<double> F(n, 0.0);
      if (connection.mode() == GlueMode::grid) {
        connection.evaluate(s, x, gamma);
        for (std::size_t c = 0; c < n; ++c)
          for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) F[c] += gamma[coeff_index(n, c, a, b)];
      } else {
        const Signature sig = atlas.signature(s, x);
        auto it = sums.find(sig);
        if (it == sums.end()) {
          const auto& coeffs = connection.coefficients(s, sig);
          std::vector<CompiledExpr> per_c;
          for (std::size_t c = 0; c < n; ++c) {
            Expr acc = xi(coeffs[coeff_index(n, c, 0, 0)]);
            for (std::size_t a = 0; a < n; ++a)
              for (std::size_t b = 0; b < n; ++b)
                if (a + b > 0) acc = acc + xi(coeffs[coeff_index(n, c, a, b)]);
            per_c.emplace_back(acc);
          }
          it = sums.emplace(sig, std::move(per_c)).first;
        }
        for (std::size_t c = 0; c < n; ++c) F[c] = it->second[c](x);
      }
      for (std::size_t c = 0; c < n; ++c) {
        const double r = std::abs(F[c] - target[c](x));
        if (r > rows[c].sup || rows[c].point.empty()) {
          rows[c].sup = std::max(rows[c].sup, r);
          rows[c].point = x;
        }
      }
    }
    for (auto& r : rows) out.push_back(std::move(r));
  }
  return out;
}

/// Builds Gamma from the locals as the pipeline does (xi applied to the
/// partition and to the locals), then evaluates the residual.
inline std::vector<ResidualEntry> residual(const std::vector<LocalCoefficients>& locals, const ConnectiveStructure& cs,
                                           const XiKey& key, const Atlas& atlas, const ThreeParamFamily& omega,
                                           double margin = 0.1, std::size_t intervals = 0) {
  const Transformer& xi = cs.xi(key);
  std::vector<LocalCoefficients> moved = locals;
  if (!xi.is_identity)
    for (auto& l : moved)
      for (auto& e : l.f) e = xi(e);
  const auto pou = build_partition(atlas, margin).transformed(xi);
  return residual(glue(atlas, pou, moved), xi, omega, intervals);
}

}  // namespace regcalc
