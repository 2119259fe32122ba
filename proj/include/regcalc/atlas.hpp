#pragma once

// Chart-described manifolds: charts, declared piecewise transitions,
// cocycle verification, regular-structure reports and partitions of unity.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "regcalc/error.hpp"
#include "regcalc/expr.hpp"
#include "regcalc/grid.hpp"
#include "regcalc/index_algebra.hpp"
#include "regcalc/spaces.hpp"
#include "regcalc/transformer.hpp"

namespace regcalc {

struct Chart {
  std::string name;
  Domain image;
};

/// One branch of a transition: on `domain` (source coordinates) the target
/// coordinates are `map`.
struct TransitionPiece {
  Box domain;
  std::vector<Expr> map;
};

struct OverlapDecl {
  std::string from;
  std::string to;
  std::vector<TransitionPiece> pieces;
};

struct Overlap {
  std::size_t from = 0;
  std::size_t to = 0;
  std::vector<TransitionPiece> pieces;
  std::vector<std::vector<CompiledExpr>> compiled;  // per piece, per component
};

/// For a point of chart s: entry t is the index of the transition piece s -> t
/// containing it, -1 when the point is not in chart t, and 0 for t = s.
using Signature = std::vector<int>;

/// Open region of a chart on which the signature is constant.
struct Cell {
  Box box;
  Signature sig;
};

/// Immutable after construction; copies share the same data.
class Atlas {
 public:
  Atlas(std::size_t dim, std::vector<Chart> charts, std::vector<OverlapDecl> overlaps, Order k, int k_check = 6) {
    auto d = std::make_shared<Data>();
    d->dim = dim;
    d->k = k;
    d->k_check = k_check;
    if (dim == 0) throw ConfigError("atlas dimension must be positive");
    if (charts.empty()) throw ConfigError("atlas needs at least one chart");
    if (k_check < 0) throw ConfigError("k_check must be nonnegative");
    for (std::size_t s = 0; s < charts.size(); ++s) {
      const auto& c = charts[s];
      if (c.name.empty()) throw ConfigError("chart " + std::to_string(s) + " has no name");
      if (c.image.boxes().empty()) throw ConfigError("chart '" + c.name + "' has an empty image");
      if (c.image.dim() != dim) throw ConfigError("chart '" + c.name + "' image has the wrong dimension");
      if (!d->by_name.emplace(c.name, s).second) throw ConfigError("duplicate chart name '" + c.name + "'");
    }
    d->charts = std::move(charts);
    auto find = [&](const std::string& name, const std::string& where) {
      auto it = d->by_name.find(name);
      if (it == d->by_name.end()) throw ConfigError(where + ": undeclared chart '" + name + "'");
      return it->second;
    };
    for (auto& decl : overlaps) {
      const std::string where = "overlap " + decl.from + " -> " + decl.to;
      Overlap o;
      o.from = find(decl.from, where);
      o.to = find(decl.to, where);
      if (o.from == o.to) throw ConfigError(where + ": a chart cannot overlap itself");
      if (decl.pieces.empty()) throw ConfigError(where + ": no transition pieces");
      for (std::size_t p = 0; p < decl.pieces.size(); ++p) {
        const auto& piece = decl.pieces[p];
        const std::string at = where + ", piece " + std::to_string(p);
        if (piece.domain.dim() != dim) throw ConfigError(at + ": domain has the wrong dimension");
        const auto& boxes = d->charts[o.from].image.boxes();
        if (std::none_of(boxes.begin(), boxes.end(), [&](const Box& b) { return piece.domain.inside(b); }))
          throw ConfigError(at + ": domain " + piece.domain.describe() + " is not inside the chart image");
        if (piece.map.size() != dim) throw ConfigError(at + ": transition needs " + std::to_string(dim) + " components");
        std::vector<CompiledExpr> comp;
        for (const auto& e : piece.map) {
          if (e.arity() > static_cast<int>(dim)) throw ConfigError(at + ": transition uses too many variables");
          comp.emplace_back(e);
        }
        o.compiled.push_back(std::move(comp));
      }
      for (std::size_t p = 0; p < decl.pieces.size(); ++p)
        for (std::size_t q = p + 1; q < decl.pieces.size(); ++q)
          if (decl.pieces[p].domain.intersect(decl.pieces[q].domain))
            throw ConfigError(where + ": pieces " + std::to_string(p) + " and " + std::to_string(q) + " overlap");
      o.pieces = std::move(decl.pieces);
      if (!d->overlap_at.emplace(std::pair{o.from, o.to}, d->overlaps.size()).second)
        throw ConfigError(where + " declared twice");
      d->overlaps.push_back(std::move(o));
    }
    for (const auto& o : d->overlaps)
      if (!d->overlap_at.count({o.to, o.from}))
        throw ConfigError("overlap " + d->charts[o.from].name + " -> " + d->charts[o.to].name +
                          " has no reverse transition");
    std::sort(d->overlaps.begin(), d->overlaps.end(),
              [](const Overlap& a, const Overlap& b) { return std::tie(a.from, a.to) < std::tie(b.from, b.to); });
    for (std::size_t n = 0; n < d->overlaps.size(); ++n)
      d->overlap_at[{d->overlaps[n].from, d->overlaps[n].to}] = n;
    data_ = std::move(d);
  }

  std::size_t dim() const { return data_->dim; }
  std::size_t size() const { return data_->charts.size(); }
  const std::vector<Chart>& charts() const { return data_->charts; }
  const Chart& chart(std::size_t s) const { return data_->charts.at(s); }
  Order k() const { return data_->k; }
  int k_check() const { return data_->k_check; }
  bool smooth() const { return data_->k.infinite; }
  int verification_order() const { return smooth() ? data_->k_check : static_cast<int>(data_->k.value); }

  std::size_t chart_index(const std::string& name) const {
    auto it = data_->by_name.find(name);
    if (it == data_->by_name.end()) throw ConfigError("undeclared chart '" + name + "'");
    return it->second;
  }

  /// Overlaps ordered by (from, to).
  const std::vector<Overlap>& overlaps() const { return data_->overlaps; }

  const Overlap* overlap(std::size_t from, std::size_t to) const {
    auto it = data_->overlap_at.find({from, to});
    return it == data_->overlap_at.end() ? nullptr : &data_->overlaps[it->second];
  }

  /// Charts overlapping s, ascending.
  std::vector<std::size_t> neighbors(std::size_t s) const {
    std::vector<std::size_t> out;
    for (const auto& o : data_->overlaps)
      if (o.from == s) out.push_back(o.to);
    return out;
  }

  bool same_as(const Atlas& other) const { return data_ == other.data_; }

  Signature signature(std::size_t s, std::span<const double> x) const {
    Signature sig(size(), -1);
    sig[s] = 0;
    for (const auto& o : data_->overlaps) {
      if (o.from != s) continue;
      for (std::size_t p = 0; p < o.pieces.size(); ++p)
        if (o.pieces[p].domain.contains(x)) {
          sig[o.to] = static_cast<int>(p);
          break;
        }
    }
    return sig;
  }

  /// Maps x from chart `from` to chart `to`; false when x is outside the overlap.
  bool transition(std::size_t from, std::size_t to, std::span<const double> x, std::span<double> out) const {
    if (from == to) {
      std::copy(x.begin(), x.end(), out.begin());
      return true;
    }
    const Overlap* o = overlap(from, to);
    if (!o) return false;
    for (std::size_t p = 0; p < o->pieces.size(); ++p)
      if (o->pieces[p].domain.contains(x)) {
        for (std::size_t a = 0; a < dim(); ++a) out[a] = o->compiled[p][a](x);
        return true;
      }
    return false;
  }

  /// Cells of chart s: products of the intervals between consecutive bounds of
  /// the image boxes and the transition pieces, kept when inside the image.
  std::vector<Cell> cells(std::size_t s) const {
    const std::size_t n = dim();
    std::vector<std::vector<double>> cuts(n);
    auto add_box = [&](const Box& b) {
      for (std::size_t i = 0; i < n; ++i) {
        cuts[i].push_back(b.lo[i]);
        cuts[i].push_back(b.hi[i]);
      }
    };
    for (const auto& b : chart(s).image.boxes()) add_box(b);
    for (const auto& o : data_->overlaps)
      if (o.from == s)
        for (const auto& p : o.pieces) add_box(p.domain);
    std::size_t total = 1;
    for (auto& c : cuts) {
      std::sort(c.begin(), c.end());
      c.erase(std::unique(c.begin(), c.end()), c.end());
      total *= c.size() - 1;
    }
    std::vector<Cell> out;
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::vector<double> lo(n), hi(n);
      std::size_t r = idx;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = r % (cuts[i].size() - 1);
        r /= cuts[i].size() - 1;
        lo[i] = cuts[i][k];
        hi[i] = cuts[i][k + 1];
      }
      Box b(lo, hi);
      const auto mid = b.midpoint();
      if (!chart(s).image.contains(mid)) continue;
      out.push_back({b, signature(s, mid)});
    }
    return out;
  }

  /// The cells of chart s lying in every chart overlapping s; nullopt when empty.
  std::optional<Domain> common_overlap(std::size_t s) const {
    std::vector<Box> boxes;
    for (auto& c : cells(s))
      if (std::all_of(c.sig.begin(), c.sig.end(), [](int p) { return p >= 0; })) boxes.push_back(c.box);
    if (boxes.empty()) return std::nullopt;
    return Domain(std::move(boxes));
  }

 private:
  struct Data {
    std::size_t dim = 0;
    std::vector<Chart> charts;
    std::map<std::string, std::size_t> by_name;
    std::vector<Overlap> overlaps;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> overlap_at;
    Order k;
    int k_check = 6;
  };
  std::shared_ptr<const Data> data_;
};

/// Product manifold: charts "a*b" with product images and product transitions.
inline Atlas product_atlas(const Atlas& a, const Atlas& b) {
  const std::size_t na = a.dim();
  std::vector<Expr> shifted;
  for (std::size_t i = 0; i < b.dim(); ++i) shifted.push_back(Expr::variable(static_cast<int>(na + i)));
  auto concat = [](const Box& x, const Box& y) {
    auto lo = x.lo, hi = x.hi;
    lo.insert(lo.end(), y.lo.begin(), y.lo.end());
    hi.insert(hi.end(), y.hi.begin(), y.hi.end());
    return Box(lo, hi);
  };
  // Branches of chart s mapped to chart t; the identity on each image box when s == t.
  auto branches = [](const Atlas& m, std::size_t s, std::size_t t) {
    std::vector<TransitionPiece> out;
    if (s == t) {
      std::vector<Expr> id;
      for (std::size_t i = 0; i < m.dim(); ++i) id.push_back(Expr::variable(static_cast<int>(i)));
      for (const auto& box : m.chart(s).image.boxes()) out.push_back({box, id});
    } else if (const Overlap* o = m.overlap(s, t)) {
      out = o->pieces;
    }
    return out;
  };
  std::vector<Chart> charts;
  for (const auto& ca : a.charts())
    for (const auto& cb : b.charts()) {
      std::vector<Box> boxes;
      for (const auto& x : ca.image.boxes())
        for (const auto& y : cb.image.boxes()) boxes.push_back(concat(x, y));
      charts.push_back({ca.name + "*" + cb.name, Domain(std::move(boxes))});
    }
  std::vector<OverlapDecl> overlaps;
  for (std::size_t s1 = 0; s1 < a.size(); ++s1)
    for (std::size_t s2 = 0; s2 < b.size(); ++s2)
      for (std::size_t t1 = 0; t1 < a.size(); ++t1)
        for (std::size_t t2 = 0; t2 < b.size(); ++t2) {
          if (s1 == t1 && s2 == t2) continue;
          auto pa = branches(a, s1, t1);
          auto pb = branches(b, s2, t2);
          if (pa.empty() || pb.empty()) continue;
          OverlapDecl decl{a.chart(s1).name + "*" + b.chart(s2).name, a.chart(t1).name + "*" + b.chart(t2).name, {}};
          for (const auto& x : pa)
            for (const auto& y : pb) {
              TransitionPiece piece{concat(x.domain, y.domain), x.map};
              for (const auto& e : y.map) piece.map.push_back(substitute(e, shifted));
              decl.pieces.push_back(std::move(piece));
            }
          overlaps.push_back(std::move(decl));
        }
  const Order k = a.k().infinite && b.k().infinite ? Order::infinity()
                  : a.k().infinite                  ? b.k()
                  : b.k().infinite                  ? a.k()
                                                    : Order::finite(std::min(a.k().value, b.k().value));
  return Atlas(na + b.dim(), std::move(charts), std::move(overlaps), k, std::min(a.k_check(), b.k_check()));
}

// ---------------------------------------------------------------------------
// Verification

struct ResidualRecord {
  std::vector<std::string> charts;  // (s, t) for inverses, (s, t, u) for cocycles
  double max_residual = 0.0;
  std::vector<double> worst_point;  // in coordinates of the first chart
  std::size_t samples = 0;
  std::string note;
};

struct AtlasReport {
  std::vector<ResidualRecord> inverse;
  std::vector<ResidualRecord> cocycle;
  double tolerance = 1e-8;
  double invertibility = 1e-4;

  double max_residual() const {
    double m = 0.0;
    for (const auto* v : {&inverse, &cocycle})
      for (const auto& r : *v) m = std::max(m, r.max_residual);
    return m;
  }
  bool passed() const { return max_residual() <= tolerance; }

  const ResidualRecord* non_invertible() const {
    for (const auto& r : inverse)
      if (!(r.max_residual <= invertibility)) return &r;
    return nullptr;
  }

  void require_invertible() const {
    if (const auto* r = non_invertible())
      throw AtlasError("transition " + r->charts[0] + " -> " + r->charts[1] +
                       " is not invertible on its overlap: residual " + detail::format_number(r->max_residual) +
                       " at " + CompiledExpr::format_point(r->worst_point) +
                       (r->note.empty() ? "" : " (" + r->note + ")"));
  }
};

namespace detail {

inline void record_residual(ResidualRecord& rec, double r, std::span<const double> x, std::string note = {}) {
  ++rec.samples;
  if (std::isnan(r)) r = INFINITY;
  if (rec.worst_point.empty() || r > rec.max_residual) {
    rec.max_residual = std::max(rec.max_residual, r);
    rec.worst_point.assign(x.begin(), x.end());
    rec.note = std::move(note);
  }
}

inline double max_difference(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace detail

/// Inverse residuals |phi_st(phi_ts(x)) - x| per declared overlap and cocycle
/// residuals |phi_ut(phi_ts(x)) - phi_us(x)| per triple, sampled at the cell
/// midpoints of an `intervals`-per-axis grid on each transition piece.
inline AtlasReport verify_atlas(const Atlas& atlas, std::size_t intervals = 64, int jobs = 1) {
  AtlasReport report;
  const auto& overlaps = atlas.overlaps();
  const std::size_t n = atlas.dim();
  report.inverse.resize(overlaps.size());
  parallel_for(overlaps.size(), jobs, [&](std::size_t k) {
    const auto& o = overlaps[k];
    auto& rec = report.inverse[k];
    rec.charts = {atlas.chart(o.from).name, atlas.chart(o.to).name};
    std::vector<double> y(n), back(n);
    for (std::size_t p = 0; p < o.pieces.size(); ++p) {
      Grid grid(o.pieces[p].domain, intervals, false);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto x = grid.point(g);
        try {
          for (std::size_t a = 0; a < n; ++a) y[a] = o.compiled[p][a](x);
          if (!atlas.transition(o.to, o.from, y, back)) {
            detail::record_residual(rec, INFINITY, x,
                                    "image " + CompiledExpr::format_point(y) + " is outside the reverse overlap");
            continue;
          }
          detail::record_residual(rec, detail::max_difference(back, x), x);
        } catch (const EvaluationError& e) {
          detail::record_residual(rec, INFINITY, x, e.what());
        }
      }
    }
  });
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> triples;
  for (const auto& st : overlaps)
    for (const auto& tu : overlaps)
      if (tu.from == st.to && tu.to != st.from && atlas.overlap(st.from, tu.to))
        triples.emplace_back(st.from, st.to, tu.to);
  report.cocycle.resize(triples.size());
  parallel_for(triples.size(), jobs, [&](std::size_t k) {
    const auto [s, t, u] = triples[k];
    auto& rec = report.cocycle[k];
    rec.charts = {atlas.chart(s).name, atlas.chart(t).name, atlas.chart(u).name};
    const Overlap* st = atlas.overlap(s, t);
    std::vector<double> y(n), via(n), direct(n);
    for (const auto& piece : st->pieces) {
      Grid grid(piece.domain, intervals, false);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto x = grid.point(g);
        try {
          if (!atlas.transition(s, u, x, direct)) continue;
          if (!atlas.transition(s, t, x, y) || !atlas.transition(t, u, y, via)) continue;
          detail::record_residual(rec, detail::max_difference(via, direct), x);
        } catch (const EvaluationError& e) {
          detail::record_residual(rec, INFINITY, x, e.what());
        }
      }
    }
  });
  return report;
}

struct StructureEntry {
  std::string from;
  std::string to;
  std::size_t piece = 0;
  std::size_t component = 0;  // a
  MembershipClaim claim;
};

struct StructureReport {
  std::vector<StructureEntry> entries;

  Verdict verdict() const {
    Verdict v = Verdict::member;
    for (const auto& e : entries) v = conjunction(v, e.claim.verdict);
    return v;
  }
  bool holds() const { return verdict() == Verdict::member; }
};

/// For every overlap piece and coordinate a: the derivatives of phi^a of every
/// order i in [0, k] checked against B_alpha(i) and C^{k - beta(i)} on the piece.
inline StructureReport check_regular_structure(const Atlas& atlas, const RegularitySpec& spec,
                                               const Budget& budget = {}) {
  std::vector<Index> S;
  for (int i = 0; i <= spec.order(); ++i) S.emplace_back(i);
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> jobs;
  for (std::size_t k = 0; k < atlas.overlaps().size(); ++k)
    for (std::size_t p = 0; p < atlas.overlaps()[k].pieces.size(); ++p)
      for (std::size_t a = 0; a < atlas.dim(); ++a) jobs.emplace_back(k, p, a);
  StructureReport report;
  report.entries.resize(jobs.size());
  Budget inner = budget;
  inner.jobs = 1;
  parallel_for(jobs.size(), budget.jobs, [&](std::size_t n) {
    const auto [k, p, a] = jobs[n];
    const auto& o = atlas.overlaps()[k];
    auto& e = report.entries[n];
    e.from = atlas.chart(o.from).name;
    e.to = atlas.chart(o.to).name;
    e.piece = p;
    e.component = a;
    e.claim = check_membership(o.pieces[p].map[a], Domain(o.pieces[p].domain), spec, S, inner);
  });
  return report;
}

// ---------------------------------------------------------------------------
// Partitions of unity

/// Product of one-dimensional bumps supported exactly on `box`.
inline Expr box_bump(const Box& box) {
  Expr out = Expr::constant(1.0);
  bool first = true;
  for (std::size_t i = 0; i < box.dim(); ++i) {
    const double c = 0.5 * (box.lo[i] + box.hi[i]);
    const double h = 0.5 * box.width(i);
    Expr t = (Expr::variable(static_cast<int>(i)) - Expr::constant(c)) / Expr::constant(h);
    out = first ? bump(t) : out * bump(t);
    first = false;
  }
  return out;
}

/// psi_s = bump_s / sum_t bump_t, each bump_t pulled back to the chart in
/// which psi is evaluated. A transformer, when set, is applied to each
/// quotient.
class PartitionOfUnity {
 public:
  PartitionOfUnity(Atlas atlas, std::vector<Expr> bumps, std::vector<std::vector<Box>> supports, double margin,
                   Transformer xi = Transformer::identity())
      : atlas_(std::move(atlas)),
        bumps_(std::move(bumps)),
        supports_(std::move(supports)),
        margin_(margin),
        xi_(std::move(xi)),
        cache_(std::make_shared<Cache>()) {
    if (bumps_.size() != atlas_.size() || supports_.size() != atlas_.size())
      throw ConfigError("partition needs one bump per chart");
  }

  const Atlas& atlas() const { return atlas_; }
  double margin() const { return margin_; }
  const Expr& bump_of(std::size_t s) const { return bumps_.at(s); }
  const std::vector<Box>& support(std::size_t s) const { return supports_.at(s); }
  const Transformer& transformer() const { return xi_; }

  PartitionOfUnity transformed(Transformer xi) const { return {atlas_, bumps_, supports_, margin_, std::move(xi)}; }

  /// Denominator sum_u bump_u(phi_us(x)) over the charts of `sig`.
  Expr denominator(std::size_t s, const Signature& sig) const {
    Expr den = Expr::constant(0.0);
    bool first = true;
    for (std::size_t u = 0; u < sig.size(); ++u) {
      if (sig[u] < 0) continue;
      Expr b = pulled_back(u, s, sig);
      den = first ? b : den + b;
      first = false;
    }
    return den;
  }

  /// psi_t expressed in chart-s coordinates on points with signature `sig`.
  Expr psi(std::size_t t, std::size_t s, const Signature& sig) const {
    if (sig.at(t) < 0) return Expr::constant(0.0);
    const auto members = std::count_if(sig.begin(), sig.end(), [](int p) { return p >= 0; });
    Expr raw = members == 1 ? Expr::constant(1.0) : pulled_back(t, s, sig) / denominator(s, sig);
    return xi_(raw);
  }

  /// Values of every psi_t at the chart-s point x (0 for charts not containing x).
  std::vector<double> values(std::size_t s, std::span<const double> x) const {
    const Signature sig = atlas_.signature(s, x);
    std::vector<double> out(atlas_.size(), 0.0);
    for (std::size_t t = 0; t < sig.size(); ++t)
      if (sig[t] >= 0) out[t] = (*compiled(t, s, sig))(x);
    return out;
  }

  double value(std::size_t t, std::size_t s, std::span<const double> x) const { return values(s, x)[t]; }

  std::shared_ptr<const CompiledExpr> compiled(std::size_t t, std::size_t s, const Signature& sig) const {
    auto key = std::tuple{t, s, sig};
    {
      std::lock_guard lock(cache_->mutex);
      if (auto it = cache_->map.find(key); it != cache_->map.end()) return it->second;
    }
    auto c = std::make_shared<const CompiledExpr>(psi(t, s, sig));
    std::lock_guard lock(cache_->mutex);
    return cache_->map.emplace(key, std::move(c)).first->second;
  }

 private:
  Expr pulled_back(std::size_t t, std::size_t s, const Signature& sig) const {
    if (t == s) return bumps_[t];
    const Overlap* o = atlas_.overlap(s, t);
    return substitute(bumps_[t], o->pieces[static_cast<std::size_t>(sig[t])].map);
  }

  struct Cache {
    std::mutex mutex;
    std::map<std::tuple<std::size_t, std::size_t, Signature>, std::shared_ptr<const CompiledExpr>> map;
  };

  Atlas atlas_;
  std::vector<Expr> bumps_;
  std::vector<std::vector<Box>> supports_;
  double margin_;
  Transformer xi_;
  std::shared_ptr<Cache> cache_;
};

inline std::vector<std::vector<double>> chart_samples(const Atlas& atlas, std::size_t s, std::size_t target) {
  return domain_samples(atlas.chart(s).image, target);
}

/// Bumps on the image boxes shrunk by `margin`; throws CoverageError at the
/// first sampled point lying in several charts but in no shrunk chart. Points
/// lying in a single chart get psi = 1 there and need no cover.
inline PartitionOfUnity build_partition(const Atlas& atlas, double margin, std::size_t samples = 1000) {
  if (!(margin > 0.0)) throw ConfigError("partition margin must be positive");
  std::vector<Expr> bumps;
  std::vector<std::vector<Box>> supports;
  for (std::size_t s = 0; s < atlas.size(); ++s) {
    std::vector<Box> core;
    Expr b = Expr::constant(0.0);
    for (const auto& box : atlas.chart(s).image.boxes())
      if (auto shrunk = box.shrunk_by(margin)) {
        b = core.empty() ? box_bump(*shrunk) : b + box_bump(*shrunk);
        core.push_back(*shrunk);
      }
    bumps.push_back(b);
    supports.push_back(std::move(core));
  }
  PartitionOfUnity pou(atlas, std::move(bumps), std::move(supports), margin);
  for (std::size_t s = 0; s < atlas.size(); ++s)
    for (const auto& x : chart_samples(atlas, s, samples)) {
      const Signature sig = atlas.signature(s, x);
      if (std::count_if(sig.begin(), sig.end(), [](int p) { return p >= 0; }) == 1) continue;
      auto r = CompiledExpr(pou.denominator(s, sig)).try_evaluate(x);
      if (r.error || !(r.value > 0.0))
        throw CoverageError("margin " + detail::format_number(margin) + " leaves the point " +
                                CompiledExpr::format_point(x) + " of chart '" + atlas.chart(s).name +
                                "' uncovered",
                            atlas.chart(s).name, x);
    }
  return pou;
}

struct PartitionReport {
  double max_sum_error = 0.0;
  std::string sum_chart;
  std::vector<double> sum_point;
  double min_value = 0.0;
  bool supports_interior = true;
  std::string support_chart;
  std::vector<double> support_witness;  // psi nonzero outside its declared support
  std::size_t samples = 0;
  std::string error;  // evaluation failure, if any

  bool passed(double tol = 1e-12) const {
    return error.empty() && max_sum_error <= tol && min_value >= -tol && supports_interior;
  }
};

/// Sum, sign and support checks at about `samples` points per chart. The
/// support check skips points that lie in one chart only, where psi = 1.
inline PartitionReport verify_partition(const PartitionOfUnity& pou, std::size_t samples = 1000) {
  PartitionReport rep;
  const Atlas& atlas = pou.atlas();
  for (std::size_t s = 0; s < atlas.size(); ++s) {
    const auto& core = pou.support(s);
    for (const auto& x : chart_samples(atlas, s, samples)) {
      ++rep.samples;
      std::vector<double> v;
      try {
        v = pou.values(s, x);
      } catch (const EvaluationError& e) {
        if (rep.error.empty()) rep.error = std::string(e.what()) + " in chart '" + atlas.chart(s).name + "'";
        continue;
      }
      double sum = 0.0;
      for (double w : v) {
        sum += w;
        rep.min_value = std::min(rep.min_value, w);
      }
      const double err = std::abs(sum - 1.0);
      if (err > rep.max_sum_error) {
        rep.max_sum_error = err;
        rep.sum_chart = atlas.chart(s).name;
        rep.sum_point = x;
      }
      const bool in_core = std::any_of(core.begin(), core.end(), [&](const Box& b) { return b.contains(x); });
      const Signature sig = atlas.signature(s, x);
      const bool alone = std::count_if(sig.begin(), sig.end(), [](int p) { return p >= 0; }) == 1;
      if (!in_core && !alone && v[s] != 0.0 && rep.supports_interior) {
        rep.supports_interior = false;
        rep.support_chart = atlas.chart(s).name;
        rep.support_witness = x;
      }
    }
  }
  return rep;
}

}  // namespace regcalc
