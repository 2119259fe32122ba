#pragma once

// Affine connection coefficients: local families, the change-of-coordinates
// formula, partition-of-unity gluing, transformation-law residuals, the
// index formula for glued coefficients and the regular-existence pipeline.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <tuple>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "regcalc/atlas.hpp"
#include "regcalc/connective.hpp"
#include "regcalc/error.hpp"
#include "regcalc/expr.hpp"
#include "regcalc/index_algebra.hpp"
#include "regcalc/spaces.hpp"

namespace regcalc {

/// Position of Gamma^c_ab in a flat coefficient vector.
inline std::size_t coeff_index(std::size_t n, std::size_t c, std::size_t a, std::size_t b) { return (c * n + a) * n + b; }

inline std::string coeff_name(std::size_t n, std::size_t index) {
  const std::size_t b = index % n, a = (index / n) % n, c = index / (n * n);
  return "^" + std::to_string(c + 1) + "_" + std::to_string(a + 1) + std::to_string(b + 1);
}

inline constexpr double kSingularJacobian = 1e-8;

// ---------------------------------------------------------------------------
// Local coefficients

struct LocalCoefficients {
  std::size_t chart = 0;
  std::string chart_name;
  std::vector<Expr> f;  // n^3, see coeff_index
  std::vector<MembershipClaim> claims;
};

/// Validates n^3 coefficient functions on a chart: each must be verified C^2
/// on the chart image. When `claim` is given, each is also checked against it.
inline LocalCoefficients local_connection(const Atlas& atlas, const std::string& chart, std::vector<Expr> f,
                                          const std::optional<SourceSpaces>& claim = std::nullopt,
                                          const Budget& budget = {}) {
  const std::size_t s = atlas.chart_index(chart);
  const std::size_t n = atlas.dim();
  if (f.size() != n * n * n)
    throw ConfigError("chart '" + chart + "' needs " + std::to_string(n * n * n) + " coefficients, got " +
                      std::to_string(f.size()));
  const Domain& U = atlas.chart(s).image;
  LocalCoefficients out{s, chart, std::move(f), {}};
  for (std::size_t k = 0; k < out.f.size(); ++k) {
    if (out.f[k].arity() > static_cast<int>(n))
      throw ConfigError("coefficient" + coeff_name(n, k) + " on chart '" + chart + "' uses too many variables");
    std::vector<NormEvidence> ev;
    const Verdict v = check_ck(out.f[k], 2, U, budget, &ev);
    if (v != Verdict::member) {
      std::string why;
      for (const auto& e : ev)
        if (!e.error.empty()) why = " (" + e.error + ")";
      throw PreconditionError("C^2 coefficients", "coefficient" + coeff_name(n, k) + " = " + to_string(out.f[k]) +
                                                      " is " + std::string(verdict_name(v)) + " in C^2 on chart '" +
                                                      chart + "'" + why);
    }
    if (claim) out.claims.push_back(check_membership(out.f[k], U, claim->spec, claim->S, budget));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Change of coordinates

namespace detail {

inline Expr determinant(const std::vector<Expr>& M, std::size_t n) {
  if (n == 1) return M[0];
  Expr det = Expr::constant(0.0);
  for (std::size_t col = 0; col < n; ++col) {
    std::vector<Expr> minor;
    for (std::size_t r = 1; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c)
        if (c != col) minor.push_back(M[r * n + c]);
    Expr term = M[col] * determinant(minor, n - 1);
    det = col % 2 == 0 ? det + term : det - term;
  }
  return det;
}

/// Symbolic derivatives of a transition x -> y = map(x).
struct TransitionDerivatives {
  std::vector<Expr> J;     // J[m*n + a] = dy^m/dx^a
  std::vector<Expr> Jinv;  // Jinv[c*n + l] = dx^c/dy^l, as adjugate / det
  std::vector<Expr> H;     // H[(l*n + a)*n + b] = d^2 y^l / dx^a dx^b
  Expr det;
};

inline TransitionDerivatives transition_derivatives(const std::vector<Expr>& map) {
  const std::size_t n = map.size();
  TransitionDerivatives d;
  d.J.reserve(n * n);
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t a = 0; a < n; ++a) d.J.push_back(derivative(map[m], static_cast<int>(a)));
  d.H.reserve(n * n * n);
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) d.H.push_back(derivative(d.J[l * n + a], static_cast<int>(b)));
  d.det = determinant(d.J, n);
  d.Jinv.resize(n * n, Expr::constant(0.0));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      Expr cof = Expr::constant(1.0);
      if (n > 1) {
        std::vector<Expr> minor;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j)
            if (i != r && j != c) minor.push_back(d.J[i * n + j]);
        cof = determinant(minor, n - 1);
        if ((r + c) % 2 == 1) cof = -cof;
      }
      // inverse = transpose of the cofactor matrix over det
      d.Jinv[c * n + r] = cof / d.det;
    }
  return d;
}

}  // namespace detail

/// Coefficients in x-coordinates from coefficients f given in y-coordinates,
/// where y = map(x):
/// out^c_ab = sum_l dx^c/dy^l (sum_mo dy^m/dx^a dy^o/dx^b f^l_mo(y) + d^2 y^l/dx^a dx^b).
inline std::vector<Expr> transform_coefficients(const std::vector<Expr>& f, const std::vector<Expr>& map,
                                                bool affine_term = true) {
  const std::size_t n = map.size();
  const auto d = detail::transition_derivatives(map);
  std::vector<Expr> fy;
  fy.reserve(f.size());
  for (const auto& e : f) fy.push_back(substitute(e, map));
  std::vector<Expr> out(n * n * n, Expr::constant(0.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      std::vector<Expr> inner(n, Expr::constant(0.0));
      for (std::size_t l = 0; l < n; ++l) {
        Expr acc = affine_term ? d.H[(l * n + a) * n + b] : Expr::constant(0.0);
        for (std::size_t m = 0; m < n; ++m)
          for (std::size_t o = 0; o < n; ++o)
            acc = acc + d.J[m * n + a] * d.J[o * n + b] * fy[coeff_index(n, l, m, o)];
        inner[l] = acc;
      }
      for (std::size_t c = 0; c < n; ++c) {
        Expr acc = Expr::constant(0.0);
        for (std::size_t l = 0; l < n; ++l) acc = acc + d.Jinv[c * n + l] * inner[l];
        out[coeff_index(n, c, a, b)] = acc;
      }
    }
  return out;
}

namespace detail {

/// Numeric version of transform_coefficients from J, H at x and f at y; the
/// inverse Jacobian enters through LU solves.
inline void transform_numeric(std::size_t n, std::span<const double> J, std::span<const double> H,
                              std::span<const double> fy, std::span<double> out, bool affine_term,
                              std::span<const double> x, const std::string& chart) {
  Eigen::MatrixXd Jm(n, n);
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t a = 0; a < n; ++a) Jm(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(a)) = J[m * n + a];
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Jm);
  const double det = lu.determinant();
  if (!(std::abs(det) >= kSingularJacobian))
    throw SingularJacobianError("singular transition Jacobian (det = " + format_number(det) + ") at " +
                                    CompiledExpr::format_point(x) + " in chart '" + chart + "'",
                                chart, std::vector<double>(x.begin(), x.end()));
  Eigen::VectorXd inner(n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t l = 0; l < n; ++l) {
        double acc = affine_term ? H[(l * n + a) * n + b] : 0.0;
        for (std::size_t m = 0; m < n; ++m)
          for (std::size_t o = 0; o < n; ++o) acc += J[m * n + a] * J[o * n + b] * fy[coeff_index(n, l, m, o)];
        inner(static_cast<Eigen::Index>(l)) = acc;
      }
      const Eigen::VectorXd sol = lu.solve(inner);
      for (std::size_t c = 0; c < n; ++c) out[coeff_index(n, c, a, b)] = sol(static_cast<Eigen::Index>(c));
    }
}

/// Central differences of a transition at x: J with step 1e-6, H with 1e-4.
inline void difference_transition(const std::vector<CompiledExpr>& map, std::span<const double> x, std::span<double> J,
                                  std::span<double> H) {
  const std::size_t n = map.size();
  std::vector<double> p(x.begin(), x.end());
  auto eval = [&](std::size_t l) { return map[l](p); };
  const double h1 = 1e-6, h2 = 1e-4;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t l = 0; l < n; ++l) {
      p[a] = x[a] + h1;
      const double fp = eval(l);
      p[a] = x[a] - h1;
      const double fm = eval(l);
      p[a] = x[a];
      J[l * n + a] = (fp - fm) / (2 * h1);
    }
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t l = 0; l < n; ++l) {
        double acc = 0.0;
        for (int sa : {1, -1})
          for (int sb : {1, -1}) {
            p.assign(x.begin(), x.end());
            p[a] += sa * h2;
            p[b] += sb * h2;
            acc += sa * sb * eval(l);
          }
        H[(l * n + a) * n + b] = acc / (4 * h2 * h2);
      }
}

}  // namespace detail

namespace detail {

/// Pattern search for a local minimum of |e| inside the open box; points
/// where e fails to evaluate count as zero.
inline std::pair<double, std::vector<double>> polish_min_abs(const CompiledExpr& e, const Box& box,
                                                             std::vector<double> x, std::vector<double> step) {
  auto value = [&](const std::vector<double>& p) {
    auto r = e.try_evaluate(p);
    return r.error ? 0.0 : std::abs(r.value);
  };
  double best = value(x);
  for (int iter = 0; iter < 400 && best > 0.0; ++iter) {
    bool improved = false;
    for (std::size_t i = 0; i < x.size(); ++i)
      for (double sgn : {-1.0, 1.0}) {
        auto y = x;
        y[i] += sgn * step[i];
        if (!box.contains(y)) continue;
        if (const double v = value(y); v < best) best = v, x = y, improved = true;
      }
    if (!improved) {
      bool done = true;
      for (std::size_t i = 0; i < x.size(); ++i) {
        step[i] *= 0.5;
        done &= step[i] < 1e-12 * box.width(i);
      }
      if (done) break;
    }
  }
  return {best, x};
}

}  // namespace detail

struct PieceCoefficients {
  Box domain;
  std::vector<Expr> f;
};

/// The coefficients of `src` (chart t) expressed in chart s on each piece of
/// the overlap s -> t. Throws SingularJacobianError when |det J| < 1e-8 at a
/// sampled point of a piece.
inline std::vector<PieceCoefficients> change_coordinates(const Atlas& atlas, const LocalCoefficients& src,
                                                         std::size_t s, std::size_t samples = 256) {
  if (s == src.chart) return {{atlas.chart(s).image.bounding_box(), src.f}};
  const Overlap* o = atlas.overlap(s, src.chart);
  if (!o) throw ConfigError("charts '" + atlas.chart(s).name + "' and '" + src.chart_name + "' do not overlap");
  std::vector<PieceCoefficients> out;
  for (const auto& piece : o->pieces) {
    const auto d = detail::transition_derivatives(piece.map);
    CompiledExpr det(d.det);
    const auto pts = domain_samples(Domain(piece.domain), samples);
    double low = std::numeric_limits<double>::infinity();
    std::vector<double> where;
    for (const auto& x : pts) {
      auto r = det.try_evaluate(x);
      const double v = r.error ? 0.0 : std::abs(r.value);
      if (v < low) low = v, where = x;
    }
    if (!where.empty() && low >= kSingularJacobian) {
      std::vector<double> step(where.size());
      for (std::size_t i = 0; i < step.size(); ++i) step[i] = piece.domain.width(i) / std::sqrt(double(samples));
      std::tie(low, where) = detail::polish_min_abs(det, piece.domain, where, step);
    }
    if (!where.empty() && !(low >= kSingularJacobian))
      throw SingularJacobianError("singular transition Jacobian (|det| = " + detail::format_number(low) + ") at " +
                                      CompiledExpr::format_point(where) + " in chart '" + atlas.chart(s).name + "'",
                                  atlas.chart(s).name, where);
    out.push_back({piece.domain, transform_coefficients(src.f, piece.map)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coefficient fields

enum class GlueMode { symbolic, grid };

inline std::string_view mode_name(GlueMode m) { return m == GlueMode::symbolic ? "symbolic" : "grid"; }

/// n^3 functions per chart, piecewise over signatures. Symbolic fields hold
/// Exprs built on demand per (chart, signature); grid fields only evaluate.
class CoefficientField {
 public:
  using Builder = std::function<std::vector<Expr>(std::size_t, const Signature&)>;
  using Numeric = std::function<void(std::size_t, std::span<const double>, std::span<double>)>;

  CoefficientField(Atlas atlas, Builder builder, std::string provenance)
      : atlas_(std::move(atlas)), mode_(GlueMode::symbolic), state_(std::make_shared<State>()) {
    state_->builder = std::move(builder);
    state_->provenance = std::move(provenance);
  }

  CoefficientField(Atlas atlas, Numeric numeric, std::string provenance)
      : atlas_(std::move(atlas)), mode_(GlueMode::grid), state_(std::make_shared<State>()) {
    state_->numeric = std::move(numeric);
    state_->provenance = std::move(provenance);
  }

  const Atlas& atlas() const { return atlas_; }
  GlueMode mode() const { return mode_; }
  std::size_t components() const { return atlas_.dim() * atlas_.dim() * atlas_.dim(); }
  const std::string& provenance() const { return state_->provenance; }

  const std::vector<Expr>& coefficients(std::size_t s, const Signature& sig) const { return entry(s, sig).exprs; }

  void evaluate(std::size_t s, std::span<const double> x, std::span<double> out) const {
    if (mode_ == GlueMode::grid) {
      state_->numeric(s, x, out);
      return;
    }
    const auto& e = entry(s, atlas_.signature(s, x));
    for (std::size_t k = 0; k < e.compiled.size(); ++k) out[k] = e.compiled[k](x);
  }

  std::vector<double> evaluate(std::size_t s, std::span<const double> x) const {
    std::vector<double> out(components());
    evaluate(s, x, out);
    return out;
  }

 private:
  struct Entry {
    std::vector<Expr> exprs;
    std::vector<CompiledExpr> compiled;
  };
  struct State {
    Builder builder;
    Numeric numeric;
    std::string provenance;
    std::mutex mutex;
    std::map<std::pair<std::size_t, Signature>, std::shared_ptr<const Entry>> cache;
  };

  const Entry& entry(std::size_t s, const Signature& sig) const {
    if (mode_ != GlueMode::symbolic) throw Error("grid-mode fields have no symbolic coefficients");
    const auto key = std::pair{s, sig};
    {
      std::lock_guard lock(state_->mutex);
      if (auto it = state_->cache.find(key); it != state_->cache.end()) return *it->second;
    }
    auto e = std::make_shared<Entry>();
    e->exprs = state_->builder(s, sig);
    for (const auto& x : e->exprs) e->compiled.emplace_back(x);
    std::lock_guard lock(state_->mutex);
    return *state_->cache.emplace(key, std::move(e)).first->second;
  }

  Atlas atlas_;
  GlueMode mode_;
  std::shared_ptr<State> state_;
};

class GlobalConnection : public CoefficientField {
 public:
  using CoefficientField::CoefficientField;
};

/// Difference of two connections: transforms tensorially on overlaps.
class EndValuedOneForm : public CoefficientField {
 public:
  using CoefficientField::CoefficientField;
};

namespace detail {

inline std::vector<const LocalCoefficients*> locals_by_chart(const Atlas& atlas,
                                                            const std::vector<LocalCoefficients>& locals) {
  std::vector<const LocalCoefficients*> by(atlas.size(), nullptr);
  for (const auto& l : locals) {
    if (l.chart >= atlas.size() || atlas.chart(l.chart).name != l.chart_name)
      throw ConfigError("local coefficients for '" + l.chart_name + "' do not belong to this atlas");
    if (l.f.size() != atlas.dim() * atlas.dim() * atlas.dim())
      throw ConfigError("local coefficients for '" + l.chart_name + "' have the wrong size");
    by[l.chart] = &l;
  }
  for (std::size_t s = 0; s < atlas.size(); ++s)
    if (!by[s]) throw ConfigError("missing local coefficients for chart '" + atlas.chart(s).name + "'");
  return by;
}

}  // namespace detail

/// Gamma_s = sum over charts t containing the point of psi_t * f_{t;s}, in
/// ascending chart order, where f_{t;s} are the coefficients of chart t
/// changed to chart-s coordinates.
inline GlobalConnection glue(const Atlas& atlas, const PartitionOfUnity& pou, const std::vector<LocalCoefficients>& locals,
                             GlueMode mode = GlueMode::symbolic) {
  if (!pou.atlas().same_as(atlas)) throw ConfigError("partition of unity was built on a different atlas");
  const auto by = detail::locals_by_chart(atlas, locals);
  std::vector<LocalCoefficients> own;
  for (const auto* l : by) own.push_back(*l);
  const std::size_t n = atlas.dim();
  if (mode == GlueMode::symbolic) {
    auto transformed = std::make_shared<std::map<std::tuple<std::size_t, std::size_t, int>, std::vector<Expr>>>();
    auto mutex = std::make_shared<std::mutex>();
    auto builder = [atlas, pou, own, transformed, mutex, n](std::size_t s, const Signature& sig) {
      std::vector<Expr> out(n * n * n, Expr::constant(0.0));
      bool first = true;
      for (std::size_t t = 0; t < sig.size(); ++t) {
        if (sig[t] < 0) continue;
        std::vector<Expr> F;
        if (t == s) {
          F = own[t].f;
        } else {
          const auto key = std::tuple{s, t, sig[t]};
          std::lock_guard lock(*mutex);
          auto it = transformed->find(key);
          if (it == transformed->end())
            it = transformed
                     ->emplace(key, transform_coefficients(
                                        own[t].f, atlas.overlap(s, t)->pieces[static_cast<std::size_t>(sig[t])].map))
                     .first;
          F = it->second;
        }
        const Expr psi = pou.psi(t, s, sig);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = first ? psi * F[k] : out[k] + psi * F[k];
        first = false;
      }
      return out;
    };
    return GlobalConnection(atlas, CoefficientField::Builder(builder), "glue (symbolic)");
  }
  if (!pou.transformer().is_identity) throw ConfigError("grid-mode gluing needs the identity transformer");
  struct Compiled {
    std::vector<CompiledExpr> bumps;
    std::vector<std::vector<CompiledExpr>> f;
  };
  auto c = std::make_shared<Compiled>();
  for (std::size_t s = 0; s < atlas.size(); ++s) {
    c->bumps.emplace_back(pou.bump_of(s));
    c->f.emplace_back();
    for (const auto& e : own[s].f) c->f.back().emplace_back(e);
  }
  auto numeric = [atlas, c, n](std::size_t s, std::span<const double> x, std::span<double> out) {
    const Signature sig = atlas.signature(s, x);
    const std::size_t N = n * n * n;
    std::vector<double> weight(sig.size(), 0.0);
    std::vector<std::vector<double>> F(sig.size());
    std::vector<double> y(n), J(n * n), H(n * n * n), fy(N);
    double den = 0.0;
    std::size_t members = 0;
    for (std::size_t t = 0; t < sig.size(); ++t) {
      if (sig[t] < 0) continue;
      ++members;
      F[t].resize(N);
      if (t == s) {
        weight[t] = c->bumps[t](x);
        for (std::size_t k = 0; k < N; ++k) F[t][k] = c->f[t][k](x);
      } else {
        const Overlap* o = atlas.overlap(s, t);
        const auto& map = o->compiled[static_cast<std::size_t>(sig[t])];
        for (std::size_t a = 0; a < n; ++a) y[a] = map[a](x);
        weight[t] = c->bumps[t](y);
        for (std::size_t k = 0; k < N; ++k) fy[k] = c->f[t][k](y);
        detail::difference_transition(map, x, J, H);
        detail::transform_numeric(n, J, H, fy, F[t], true, x, atlas.chart(s).name);
      }
      den += weight[t];
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t t = 0; t < sig.size(); ++t) {
      if (sig[t] < 0) continue;
      const double psi = members == 1 ? 1.0 : weight[t] / den;
      for (std::size_t k = 0; k < N; ++k) out[k] += psi * F[t][k];
    }
  };
  return GlobalConnection(atlas, CoefficientField::Numeric(numeric), "glue (grid)");
}

// ---------------------------------------------------------------------------
// Transformation-law residuals

struct OverlapResidual {
  std::string from;
  std::string to;
  double max_residual = 0.0;
  std::vector<double> worst_point;
  std::string component;
  std::size_t samples = 0;
};

struct TransformationReport {
  std::vector<OverlapResidual> overlaps;
  double tolerance = 1e-6;

  double max_residual() const {
    double m = 0.0;
    for (const auto& r : overlaps) m = std::max(m, r.max_residual);
    return m;
  }
  bool passed() const { return max_residual() <= tolerance; }
};

inline double default_law_tolerance(GlueMode m) { return m == GlueMode::symbolic ? 1e-6 : 1e-3; }

namespace detail {

inline TransformationReport overlap_residuals(const CoefficientField& g, bool affine_term, std::size_t intervals, double tol,
                                   int jobs) {
  const Atlas& atlas = g.atlas();
  const std::size_t n = atlas.dim();
  const std::size_t N = g.components();
  TransformationReport rep;
  rep.tolerance = tol;
  rep.overlaps.resize(atlas.overlaps().size());
  parallel_for(atlas.overlaps().size(), jobs, [&](std::size_t k) {
    const auto& o = atlas.overlaps()[k];
    auto& rec = rep.overlaps[k];
    rec.from = atlas.chart(o.from).name;
    rec.to = atlas.chart(o.to).name;
    std::vector<double> y(n), J(n * n), H(n * n * n), expected(N), actual(N), gy(N);
    for (std::size_t p = 0; p < o.pieces.size(); ++p) {
      std::vector<CompiledExpr> cJ, cH;
      if (g.mode() == GlueMode::symbolic) {
        const auto d = transition_derivatives(o.pieces[p].map);
        for (const auto& e : d.J) cJ.emplace_back(e);
        for (const auto& e : d.H) cH.emplace_back(e);
      }
      Grid grid(o.pieces[p].domain, intervals, false);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto x = grid.point(i);
        for (std::size_t a = 0; a < n; ++a) y[a] = o.compiled[p][a](x);
        if (!atlas.chart(o.to).image.contains(y)) continue;
        if (g.mode() == GlueMode::symbolic) {
          for (std::size_t q = 0; q < cJ.size(); ++q) J[q] = cJ[q](x);
          for (std::size_t q = 0; q < cH.size(); ++q) H[q] = cH[q](x);
        } else {
          difference_transition(o.compiled[p], x, J, H);
        }
        g.evaluate(o.to, y, gy);
        transform_numeric(n, J, H, gy, expected, affine_term, x, rec.from);
        g.evaluate(o.from, x, actual);
        ++rec.samples;
        for (std::size_t q = 0; q < N; ++q) {
          const double r = std::abs(actual[q] - expected[q]);
          if (r > rec.max_residual || rec.worst_point.empty()) {
            rec.max_residual = std::max(rec.max_residual, r);
            rec.worst_point = x;
            rec.component = coeff_name(n, q);
          }
        }
      }
    }
  });
  return rep;
}

}  // namespace detail

/// On each overlap s -> t: sup over grid points x of the piece of
/// |Gamma_s(x) - (Gamma_t changed to chart s)(x)|.
inline TransformationReport verify_connection_law(const GlobalConnection& g, std::size_t intervals = 64,
                                       std::optional<double> tol = std::nullopt, int jobs = 1) {
  return detail::overlap_residuals(g, true, intervals, tol.value_or(default_law_tolerance(g.mode())), jobs);
}

/// The same residuals without the second-derivative term.
inline TransformationReport check_tensorial(const EndValuedOneForm& w, std::size_t intervals = 64,
                                 std::optional<double> tol = std::nullopt, int jobs = 1) {
  return detail::overlap_residuals(w, false, intervals, tol.value_or(default_law_tolerance(w.mode())), jobs);
}

// ---------------------------------------------------------------------------
// Affine-space operations

namespace detail {

template <class Out>
Out combine(const CoefficientField& a, const CoefficientField& b, double sign, std::string provenance) {
  if (!a.atlas().same_as(b.atlas())) throw ConfigError("coefficient fields live on different atlases");
  if (a.mode() == GlueMode::symbolic && b.mode() == GlueMode::symbolic) {
    auto builder = [a, b, sign](std::size_t s, const Signature& sig) {
      const auto& x = a.coefficients(s, sig);
      const auto& y = b.coefficients(s, sig);
      std::vector<Expr> out(x.size(), Expr::constant(0.0));
      for (std::size_t k = 0; k < x.size(); ++k) out[k] = sign > 0 ? x[k] + y[k] : x[k] - y[k];
      return out;
    };
    return Out(a.atlas(), CoefficientField::Builder(builder), std::move(provenance));
  }
  auto numeric = [a, b, sign](std::size_t s, std::span<const double> x, std::span<double> out) {
    std::vector<double> other(out.size());
    a.evaluate(s, x, out);
    b.evaluate(s, x, other);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += sign * other[k];
  };
  return Out(a.atlas(), CoefficientField::Numeric(numeric), std::move(provenance));
}

}  // namespace detail

inline EndValuedOneForm difference(const GlobalConnection& g1, const GlobalConnection& g2) {
  return detail::combine<EndValuedOneForm>(g1, g2, -1.0, "difference");
}

inline GlobalConnection add(const GlobalConnection& g, const EndValuedOneForm& w) {
  return detail::combine<GlobalConnection>(g, w, 1.0, "sum");
}

// ---------------------------------------------------------------------------
// Regularity indices of glued coefficients

struct GluedIndices {
  Index alpha0;
  Index beta0;
};

/// alpha'0 = delta(eps^3(alpha(1), alpha0(0)), eps(alpha(2), alpha(1)));
/// beta'0 = max(beta(1), beta(2), beta0(0)).
inline GluedIndices glued_regularity_indices(const DistributiveStructure& ds, const IndexMap& alpha,
                                             const IndexMap& beta, const IndexMap& alpha0, const IndexMap& beta0) {
  const Index a1 = alpha(Index(1)), a2 = alpha(Index(2)), a00 = alpha0(Index(0));
  auto step = [](const std::string& what, auto&& fn) {
    try {
      return fn();
    } catch (const UndefinedIndexError& e) {
      throw UndefinedIndexError(what + " is undefined: " + e.what());
    }
  };
  const Index cube = step("eps^3(alpha(1), alpha0(0)) = eps^3(" + to_string(a1) + "," + to_string(a00) + ")",
                          [&] { return eps_power(ds, 3, a1, a00); });
  const Index prod = step("eps(alpha(2), alpha(1)) = eps(" + to_string(a2) + "," + to_string(a1) + ")",
                          [&] { return ds.eps_or_throw(a2, a1); });
  const Index a = step("delta(" + to_string(cube) + "," + to_string(prod) + ")",
                       [&] { return ds.delta_or_throw(cube, prod); });
  const Index b = std::max({beta(Index(1)), beta(Index(2)), beta0(Index(0))});
  return {a, b};
}

// ---------------------------------------------------------------------------
// Regular existence pipeline

struct PipelineInput {
  Atlas atlas;
  RegularitySpec structure;  // the B-spec with alpha, beta of the manifold
  DistributiveStructure ds;
  IndexMap local_alpha0;  // claimed regularity of the local coefficients
  IndexMap local_beta0;
  ConnectiveStructure cs;
  Index z;
  IndexMap theta;
  IndexMap vartheta;
  std::vector<LocalCoefficients> locals;
  double margin = 0.1;
  std::vector<Expr> tests;  // niceness probes on `probe_domain`
  std::vector<Expr> bumps;
  std::optional<Domain> probe_domain;
  std::string target_tag;  // empty: the structure's own tag
  Budget budget;
  std::size_t law_intervals = 64;
  double law_tolerance = 1e-6;
};

struct CoefficientRegularity {
  std::string chart;
  Box domain;
  std::string coefficient;
  GlobalizedClaim claim;
};

struct PipelineResult {
  GluedIndices indices;
  GlobalConnection glued;      // plain gluing
  GlobalConnection connection; // with xi applied to partition and locals
  std::string xi;
  TransformationReport law;
  std::vector<std::string> common_overlaps;  // per chart
  std::vector<CoefficientRegularity> regularity;
  Verdict verdict = Verdict::inconclusive;
};

/// Checks each hypothesis in turn (PreconditionError naming the first that
/// fails), glues the locals, applies xi, verifies the transformation law and
/// the regularity of every glued coefficient on U_{N(s)}.
inline PipelineResult regular_existence_pipeline(const PipelineInput& in) {
  const Atlas& atlas = in.atlas;
  const auto& cs = in.cs;
  const int k = in.structure.order();
  if (k < 2) throw PreconditionError("k >= 2", "k = " + std::to_string(k));
  if (cs.k() != k) throw ConfigError("connective structure and B-spec disagree on k");
  {
    auto rep = verify_atlas(atlas);
    if (!rep.passed())
      throw PreconditionError("atlas cocycle", "residual " + detail::format_number(rep.max_residual()));
  }
  {
    auto rep = check_regular_structure(atlas, in.structure, in.budget);
    for (const auto& e : rep.entries)
      if (e.claim.verdict != Verdict::member)
        throw PreconditionError("regular structure", "transition " + e.from + " -> " + e.to + " component " +
                                                         std::to_string(e.component + 1) + " is " +
                                                         std::string(verdict_name(e.claim.verdict)));
  }
  const auto indices =
      glued_regularity_indices(in.ds, in.structure.alpha, in.structure.beta, in.local_alpha0, in.local_beta0);
  if (cs.alpha0_j() != indices.alpha0 || Index(cs.beta0_j()) != indices.beta0)
    throw PreconditionError("connection indices", "the connective structure has (alpha0(j), beta0(j)) = (" +
                                                      to_string(cs.alpha0_j()) + "," + std::to_string(cs.beta0_j()) +
                                                      ") but gluing gives (" + to_string(indices.alpha0) + "," +
                                                      to_string(indices.beta0) + ")");
  if (!in.target_tag.empty() && !cs.compatible_with(in.target_tag))
    throw PreconditionError("compatible scISP", "'" + in.target_tag + "' is not compatible with '" + cs.base_tag() + "'");
  const Domain probe = in.probe_domain ? *in.probe_domain : atlas.chart(0).image;
  {
    auto nice = check_nice(cs, probe, in.tests, in.bumps, k, in.budget);
    if (!nice.nice()) {
      const auto name = nice.first_failure();
      const auto& w = name == "support preserving" ? nice.support.witness
                      : name == "bump preserving"  ? nice.bump.witness
                                                   : nice.unital.witness;
      throw PreconditionError(name, w);
    }
  }
  if (auto d = check_distributive(cs, probe, in.tests); !d.passed) throw PreconditionError("distributive", d.witness);
  if (auto d = check_degree(cs, atlas, 2); !d.passed()) throw PreconditionError("degree r >= 2", d.check.witness);
  auto ads = AdditiveDegreeSet::integers(Order::finite(k));
  IndexSet X;
  try {
    X = gamma_z(ads, cs.beta0_j(), in.z);
  } catch (const Error& e) {
    throw PreconditionError("z in the window [beta0; j]_k", e.what());
  }
  if (auto ord = find_ordinary_sequence(in.theta, in.vartheta, cs.O(), cs.Q(), X, in.z); !ord.ordinary)
    throw PreconditionError("ordinary pair", ord.reason);
  for (const auto& l : X.elements()) {
    auto v = in.vartheta.at(l);
    if (!v || l > *v) throw PreconditionError("i <= vartheta(i)", "fails at i = " + to_string(l));
  }
  {
    const auto dom = IndexSet::interval(0);
    RegularitySpec local_spec{in.structure.kind, Order::finite(k), in.structure.k_check,
                              in.local_alpha0.restricted(dom, "alpha0"), in.local_beta0.restricted(dom, "beta0")};
    for (const auto& l : in.locals)
      for (std::size_t q = 0; q < l.f.size(); ++q) {
        auto claim = check_membership(l.f[q], atlas.chart(l.chart).image, local_spec, {Index(0)}, in.budget);
        if (claim.verdict != Verdict::member)
          throw PreconditionError("local coefficients regular",
                                  "coefficient" + coeff_name(atlas.dim(), q) + " on chart '" + l.chart_name + "' is " +
                                      std::string(verdict_name(claim.verdict)) + " in " + local_spec.b_space(Index(0)) +
                                      " and " + local_spec.c_space(Index(0)));
      }
  }

  const auto pou = build_partition(atlas, in.margin);
  auto glued = glue(atlas, pou, in.locals);
  const XiKey key{cs.roles().alpha0, cs.roles().beta0, in.theta.name(), in.vartheta.name()};
  const Transformer& xi = cs.xi(key);
  std::vector<LocalCoefficients> moved = in.locals;
  if (!xi.is_identity)
    for (auto& l : moved)
      for (auto& e : l.f) e = xi(e);
  auto connection = glue(atlas, pou.transformed(xi), moved);
  auto law = verify_connection_law(connection, in.law_intervals, in.law_tolerance, in.budget.jobs);

  std::vector<CoefficientRegularity> regularity;
  std::vector<std::string> commons;
  Verdict verdict = law.passed() ? Verdict::member : Verdict::not_member;
  for (std::size_t s = 0; s < atlas.size(); ++s) {
    auto common = atlas.common_overlap(s);
    commons.push_back(common ? common->describe() : "empty");
    for (const auto& cell : atlas.cells(s)) {
      if (std::any_of(cell.sig.begin(), cell.sig.end(), [](int p) { return p < 0; })) continue;
      const auto& coeffs = glued.coefficients(s, cell.sig);
      for (std::size_t q = 0; q < coeffs.size(); ++q) {
        auto claim = globalize_regularity(coeffs[q], Domain(cell.box), in.structure.kind, cs, ads, in.z, in.theta,
                                          in.vartheta, in.budget);
        verdict = conjunction(verdict, claim.verdict);
        regularity.push_back({atlas.chart(s).name, cell.box, "Gamma" + coeff_name(atlas.dim(), q), std::move(claim)});
      }
    }
  }
  return {indices, std::move(glued), std::move(connection), xi.name, std::move(law), std::move(commons),
          std::move(regularity), verdict};
}

}  // namespace regcalc
