#pragma once

// Connective structures: the sets O and Q of index maps, composition tables
// and the transformers xi acting on function data, with numeric checks of
// niceness, degree, distributivity and partition preservation.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "regcalc/atlas.hpp"
#include "regcalc/error.hpp"
#include "regcalc/expr.hpp"
#include "regcalc/grid.hpp"
#include "regcalc/index_algebra.hpp"
#include "regcalc/spaces.hpp"
#include "regcalc/transformer.hpp"

namespace regcalc {

/// Builds a transformer from "identity", "scale:<c>", "add:<c>" or
/// "multiply:<expr>".
inline Transformer parse_transformer(std::string_view text) {
  if (text == "identity") return Transformer::identity();
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ConfigError("unknown transformer '" + std::string(text) + "'");
  const auto kind = text.substr(0, colon);
  const std::string arg(text.substr(colon + 1));
  auto number = [&] {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), v);
    if (ec != std::errc{} || ptr != arg.data() + arg.size())
      throw ConfigError("transformer '" + std::string(text) + "' needs a numeric argument");
    return v;
  };
  const std::string name(text);
  if (kind == "scale") {
    const double c = number();
    return Transformer::make(name, [c](const Expr& e) { return Expr::constant(c) * e; });
  }
  if (kind == "add") {
    const double c = number();
    return Transformer::make(name, [c](const Expr& e) { return e + Expr::constant(c); });
  }
  if (kind == "multiply") {
    Expr m = parse(arg);
    return Transformer::make(name, [m](const Expr& e) { return m * e; });
  }
  throw ConfigError("unknown transformer '" + name + "'");
}

/// Source pair (theta, vartheta) and target pair, by map name.
struct XiKey {
  std::string theta;
  std::string vartheta;
  std::string theta_to;
  std::string vartheta_to;

  std::string describe() const { return "(" + theta + "," + vartheta + ") -> (" + theta_to + "," + vartheta_to + ")"; }
  friend auto operator<=>(const XiKey&, const XiKey&) = default;
};

using NamePair = std::pair<std::string, std::string>;

struct ConnectiveTables {
  std::map<NamePair, Transformer> d_o;
  std::map<NamePair, Transformer> d_q;
  std::map<XiKey, Transformer> xi;
  Transformer default_xi = Transformer::identity();
};

/// Names of the required members of O and Q.
struct ConnectiveRoles {
  std::string alpha = "alpha";
  std::string alpha0 = "alpha0";
  std::string beta = "beta";
  std::string beta0 = "beta0";
};

class ConnectiveStructure {
 public:
  ConnectiveStructure(int k, std::vector<IndexMap> O, std::vector<IndexMap> Q, Index j, ConnectiveRoles roles = {},
                      ConnectiveTables tables = {}, std::string base_tag = "X",
                      std::vector<std::string> compatible_tags = {})
      : k_(k),
        O_(std::move(O)),
        Q_(std::move(Q)),
        j_(j),
        roles_(std::move(roles)),
        tables_(std::move(tables)),
        base_tag_(std::move(base_tag)),
        compatible_tags_(std::move(compatible_tags)) {
    if (k_ < 0) throw ConfigError("connective structure needs k >= 0");
    if (!is_integral(j_) || j_ < Index(0) || j_ > Index(k_))
      throw ConfigError("j = " + to_string(j_) + " is not in [0," + std::to_string(k_) + "]");
    auto unique = [](const std::vector<IndexMap>& set, const char* what) {
      for (std::size_t a = 0; a < set.size(); ++a)
        for (std::size_t b = a + 1; b < set.size(); ++b)
          if (set[a].name() == set[b].name())
            throw ConfigError(std::string("duplicate map '") + set[a].name() + "' in " + what);
    };
    unique(O_, "O");
    unique(Q_, "Q");
    auto require = [](const std::vector<IndexMap>& set, const std::string& name, const char* what) {
      if (!find_by_name(set, name)) throw ConfigError("missing required map '" + name + "' in " + what);
    };
    require(O_, roles_.alpha, "O");
    require(O_, roles_.alpha0, "O");
    require(Q_, roles_.beta, "Q");
    require(Q_, roles_.beta0, "Q");
    const auto a0 = alpha0().at(j_);
    const auto b0 = beta0().at(j_);
    if (!a0) throw ConfigError("'" + roles_.alpha0 + "' is undefined at j = " + to_string(j_));
    if (!b0) throw ConfigError("'" + roles_.beta0 + "' is undefined at j = " + to_string(j_));
    if (!is_integral(*b0) || *b0 < Index(2) || *b0 > Index(k_))
      throw ConfigError("beta0(j) = " + to_string(*b0) + " must be an integer in [2," + std::to_string(k_) + "]");
    if (!find_agreeing(O_, IndexMap::constant("alpha_0,j", gamma_k(), *a0), gamma_k()))
      throw ConfigError("missing required map in O: the constant map with value alpha0(j) = " + to_string(*a0));
    const IndexSet shift_domain = IndexSet::interval(b0->numerator());
    if (!find_agreeing(Q_, IndexMap::shift("shift", shift_domain, *b0), shift_domain))
      throw ConfigError("missing required map in Q: the shifting map i -> " + to_string(*b0) + " - i");
    for (const auto& [key, _] : tables_.d_o) {
      require(O_, key.first, "O (D_O table)");
      require(O_, key.second, "O (D_O table)");
    }
    for (const auto& [key, _] : tables_.d_q) {
      require(Q_, key.first, "Q (D_Q table)");
      require(Q_, key.second, "Q (D_Q table)");
    }
    for (const auto& [key, _] : tables_.xi) {
      require(O_, key.theta, "O (xi table)");
      require(Q_, key.vartheta, "Q (xi table)");
      require(O_, key.theta_to, "O (xi table)");
      require(Q_, key.vartheta_to, "Q (xi table)");
    }
  }

  int k() const { return k_; }
  IndexSet gamma_k() const { return IndexSet::interval(k_); }
  const std::vector<IndexMap>& O() const { return O_; }
  const std::vector<IndexMap>& Q() const { return Q_; }
  const Index& j() const { return j_; }
  const ConnectiveRoles& roles() const { return roles_; }
  const ConnectiveTables& tables() const { return tables_; }
  const std::string& base_tag() const { return base_tag_; }

  bool compatible_with(const std::string& tag) const {
    return tag == base_tag_ || std::find(compatible_tags_.begin(), compatible_tags_.end(), tag) != compatible_tags_.end();
  }

  const IndexMap& alpha0() const { return *find_by_name(O_, roles_.alpha0); }
  const IndexMap& beta0() const { return *find_by_name(Q_, roles_.beta0); }
  Index alpha0_j() const { return alpha0()(j_); }
  std::int64_t beta0_j() const { return beta0()(j_).numerator(); }

  /// The table entry for `key`, or the default transformer.
  const Transformer& xi(const XiKey& key) const {
    auto it = tables_.xi.find(key);
    return it == tables_.xi.end() ? tables_.default_xi : it->second;
  }

  /// Every transformer the structure can apply, labelled.
  std::vector<std::pair<std::string, const Transformer*>> transformers() const {
    std::vector<std::pair<std::string, const Transformer*>> out;
    for (const auto& [key, t] : tables_.xi) out.emplace_back(key.describe(), &t);
    out.emplace_back("default", &tables_.default_xi);
    return out;
  }

  bool all_identity() const {
    auto ids = [](const auto& table) {
      return std::all_of(table.begin(), table.end(), [](const auto& kv) { return kv.second.is_identity; });
    };
    return ids(tables_.d_o) && ids(tables_.d_q) && ids(tables_.xi) && tables_.default_xi.is_identity;
  }

 private:
  int k_;
  std::vector<IndexMap> O_;
  std::vector<IndexMap> Q_;
  Index j_;
  ConnectiveRoles roles_;
  ConnectiveTables tables_;
  std::string base_tag_;
  std::vector<std::string> compatible_tags_;
};

/// All D maps and all xi are identities on function data.
inline ConnectiveStructure identity_connective(int k, std::vector<IndexMap> O, std::vector<IndexMap> Q, Index j,
                                               ConnectiveRoles roles = {}, std::string base_tag = "X") {
  ConnectiveTables t;
  for (const auto& a : O)
    for (const auto& b : O) t.d_o.emplace(NamePair{a.name(), b.name()}, Transformer::identity());
  for (const auto& a : Q)
    for (const auto& b : Q) t.d_q.emplace(NamePair{a.name(), b.name()}, Transformer::identity());
  return {k, std::move(O), std::move(Q), j, std::move(roles), std::move(t), std::move(base_tag)};
}

// ---------------------------------------------------------------------------
// Sample comparisons

namespace detail {

/// Largest |a - b| / max(1, |b|) over the points; errors on exactly one side
/// count as infinite, errors on both sides as agreement.
struct Deviation {
  double value = 0.0;
  std::vector<double> point;
};

inline Deviation compare_on(const Expr& a, const Expr& b, const std::vector<std::vector<double>>& points) {
  CompiledExpr ca(a), cb(b);
  Deviation d;
  for (const auto& p : points) {
    auto ra = ca.try_evaluate(p);
    auto rb = cb.try_evaluate(p);
    double dev = 0.0;
    if (ra.error || rb.error) {
      dev = (ra.error && rb.error) ? 0.0 : INFINITY;
    } else {
      dev = std::abs(ra.value - rb.value) / std::max(1.0, std::abs(rb.value));
    }
    if (dev > d.value) {
      d.value = dev;
      d.point = p;
    }
  }
  return d;
}

}  // namespace detail

struct PropertyCheck {
  bool passed = true;
  std::string witness;

  void fail(std::string w) {
    if (passed) witness = std::move(w);
    passed = false;
  }
};

struct LawViolation {
  std::string table;
  std::string triple;
  double deviation = 0.0;
  std::vector<double> point;
};

struct CompositionReport {
  std::size_t triples = 0;
  std::vector<LawViolation> violations;
  bool passed() const { return violations.empty(); }
};

inline constexpr double kTransformerTolerance = 1e-10;

/// D(a, c) = D(b, c) o D(a, b) for every triple with all three entries
/// declared, the same for xi, and D_Q(beta0, v) acting as the identity
/// whenever v <= beta0 pointwise.
inline CompositionReport check_composition_laws(const ConnectiveStructure& cs, const std::vector<Expr>& tests,
                                                const Domain& U, std::size_t samples = 200) {
  CompositionReport rep;
  const auto points = domain_samples(U, samples);
  auto check = [&](const std::string& table, const std::string& triple, const Transformer& direct,
                   const Transformer& first, const Transformer& second) {
    ++rep.triples;
    for (const auto& f : tests) {
      auto d = detail::compare_on(second(first(f)), direct(f), points);
      if (d.value > kTransformerTolerance) {
        rep.violations.push_back({table, triple + " on " + to_string(f), d.value, d.point});
        return;
      }
    }
  };
  auto pairwise = [&](const std::map<NamePair, Transformer>& table, const std::string& name) {
    for (const auto& [ab, t_ab] : table)
      for (const auto& [bc, t_bc] : table) {
        if (bc.first != ab.second) continue;
        auto it = table.find({ab.first, bc.second});
        if (it == table.end()) continue;
        check(name, ab.first + " -> " + ab.second + " -> " + bc.second, it->second, t_ab, t_bc);
      }
  };
  pairwise(cs.tables().d_o, "D_O");
  pairwise(cs.tables().d_q, "D_Q");
  for (const auto& [k1, t1] : cs.tables().xi)
    for (const auto& [k2, t2] : cs.tables().xi) {
      if (k2.theta != k1.theta_to || k2.vartheta != k1.vartheta_to) continue;
      auto it = cs.tables().xi.find({k1.theta, k1.vartheta, k2.theta_to, k2.vartheta_to});
      if (it == cs.tables().xi.end()) continue;
      check("xi", k1.describe() + " then " + k2.describe(), it->second, t1, t2);
    }
  const IndexMap& b0 = cs.beta0();
  for (const auto& v : cs.Q()) {
    auto it = cs.tables().d_q.find({b0.name(), v.name()});
    if (it == cs.tables().d_q.end()) continue;
    bool below = !v.values().empty();
    for (const auto& [i, vi] : v.values()) {
      auto bi = b0.at(i);
      if (!bi || vi > *bi) below = false;
    }
    if (!below) continue;
    check("D_Q inclusion", b0.name() + " -> " + v.name(), Transformer::identity(), Transformer::identity(),
          it->second);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Niceness

struct NicenessReport {
  PropertyCheck support;
  PropertyCheck bump;
  PropertyCheck unital;
  std::size_t transformers = 0;

  bool nice() const { return support.passed && bump.passed && unital.passed; }

  /// Name of the first failing property, in the order support, bump, unital.
  std::string first_failure() const {
    if (!support.passed) return "support preserving";
    if (!bump.passed) return "bump preserving";
    if (!unital.passed) return "unital";
    return {};
  }
};

/// Optional membership requirement on the test inputs.
struct SourceSpaces {
  RegularitySpec spec;
  std::vector<Index> S;
};

/// Support: xi f vanishes wherever f vanishes on a grid neighbourhood.
/// Bump: xi maps each bump to a C^k function. Unital: xi f = 1 wherever
/// f = 1, checked on the constant 1 and on the test points where f = 1.
inline NicenessReport check_nice(const ConnectiveStructure& cs, const Domain& U, const std::vector<Expr>& tests,
                                 const std::vector<Expr>& bumps, int k, const Budget& budget = {},
                                 const std::optional<SourceSpaces>& source = std::nullopt,
                                 std::size_t intervals = 64) {
  for (const auto& g : bumps) {
    std::string why;
    if (check_bump_class(g, U, k, budget, &why) != Verdict::member)
      throw PreconditionError("bump inputs", to_string(g) + " is not a C^" + std::to_string(k) + " bump: " + why);
  }
  if (source)
    for (const auto& f : tests) {
      auto claim = check_membership(f, U, source->spec, source->S, budget);
      if (claim.verdict != Verdict::member)
        throw PreconditionError("tests in source spaces", to_string(f) + " is " +
                                                              std::string(verdict_name(claim.verdict)));
    }
  NicenessReport rep;
  const auto all = cs.transformers();
  rep.transformers = all.size();
  const Box box = U.bounding_box();
  Grid grid(box, intervals, true);
  const std::size_t n = box.dim();
  for (const auto& [label, xi] : all) {
    for (const auto& f : tests) {
      CompiledExpr cf(f), cx((*xi)(f));
      std::vector<double> values(grid.size());
      std::vector<char> ok(grid.size());
      for (std::size_t g = 0; g < grid.size(); ++g) {
        auto r = cf.try_evaluate(grid.point(g));
        ok[g] = r.error == nullptr;
        values[g] = r.value;
      }
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto p = grid.point(g);
        if (!U.contains(p) || !ok[g]) continue;
        if (values[g] == 1.0) {
          auto r = cx.try_evaluate(p);
          if (r.error || std::abs(r.value - 1.0) > kTransformerTolerance)
            rep.unital.fail(label + ": (xi f)(p) != 1 where f(p) = 1 for f = " + to_string(f) + " at " +
                            CompiledExpr::format_point(p));
        }
        if (values[g] != 0.0) continue;
        bool flat = true;
        std::size_t stride = 1;
        for (std::size_t a = 0; a < n && flat; ++a) {
          const std::size_t c = (g / stride) % grid.per_axis();
          if (c > 0 && (!ok[g - stride] || values[g - stride] != 0.0)) flat = false;
          if (c + 1 < grid.per_axis() && (!ok[g + stride] || values[g + stride] != 0.0)) flat = false;
          stride *= grid.per_axis();
        }
        if (!flat) continue;
        auto r = cx.try_evaluate(p);
        if (r.error || std::abs(r.value) > kTransformerTolerance)
          rep.support.fail(label + ": xi f is nonzero outside supp f for f = " + to_string(f) + " at " +
                           CompiledExpr::format_point(p));
      }
    }
    auto one = detail::compare_on((*xi)(Expr::constant(1.0)), Expr::constant(1.0), domain_samples(U, 256));
    if (one.value > kTransformerTolerance)
      rep.unital.fail(label + ": xi(1) != 1 at " + CompiledExpr::format_point(one.point));
    for (const auto& g : bumps)
      if (check_ck((*xi)(g), k, U, budget, nullptr) != Verdict::member)
        rep.bump.fail(label + ": xi(" + to_string(g) + ") is not verified C^" + std::to_string(k));
  }
  return rep;
}

/// xi(f g) = xi f * xi g and xi(f + g) = xi f + xi g on samples.
inline PropertyCheck check_distributive(const ConnectiveStructure& cs, const Domain& U, const std::vector<Expr>& tests,
                                        std::size_t samples = 200) {
  PropertyCheck out;
  const auto points = domain_samples(U, samples);
  for (const auto& [label, xi] : cs.transformers())
    for (const auto& f : tests)
      for (const auto& g : tests) {
        auto prod = detail::compare_on((*xi)(f * g), (*xi)(f) * (*xi)(g), points);
        if (prod.value > kTransformerTolerance)
          out.fail(label + ": xi(f*g) != xi(f)*xi(g) for f = " + to_string(f) + ", g = " + to_string(g) + " at " +
                   CompiledExpr::format_point(prod.point));
        auto sum = detail::compare_on((*xi)(f + g), (*xi)(f) + (*xi)(g), points);
        if (sum.value > kTransformerTolerance)
          out.fail(label + ": xi(f+g) != xi(f)+xi(g) for f = " + to_string(f) + ", g = " + to_string(g) + " at " +
                   CompiledExpr::format_point(sum.point));
      }
  return out;
}

// ---------------------------------------------------------------------------
// Degree

struct DegreeReport {
  int r = 0;
  PropertyCheck check;
  double max_deviation = 0.0;
  std::size_t comparisons = 0;
  bool passed() const { return check.passed; }
};

/// For every transformer and every l <= r with l <= vartheta(l): xi applied
/// to each order-l partial derivative of each transition equals that
/// derivative within 1e-10 at sampled points of the transition piece.
inline DegreeReport check_degree(const ConnectiveStructure& cs, const Atlas& atlas, int r, std::size_t samples = 200) {
  if (r < 0) throw ConfigError("degree must be nonnegative");
  if (r > atlas.verification_order())
    throw ConfigError("degree " + std::to_string(r) + " exceeds the atlas class k = " + atlas.k().describe());
  DegreeReport rep;
  rep.r = r;
  struct Job {
    std::string label;
    const Transformer* xi;
    const IndexMap* vartheta;
  };
  std::vector<Job> jobs;
  for (const auto& [key, t] : cs.tables().xi) jobs.push_back({key.describe(), &t, find_by_name(cs.Q(), key.vartheta)});
  jobs.push_back({"default", &cs.tables().default_xi, nullptr});
  const int dim = static_cast<int>(atlas.dim());
  for (const auto& job : jobs)
    for (int l = 0; l <= r; ++l) {
      if (job.vartheta) {
        auto v = job.vartheta->at(Index(l));
        if (!v || Index(l) > *v) continue;
      }
      for (const auto& o : atlas.overlaps())
        for (const auto& piece : o.pieces) {
          const auto points = domain_samples(Domain(piece.domain), samples);
          for (std::size_t a = 0; a < piece.map.size(); ++a)
            for (const auto& mi : multi_indices(dim, l)) {
              Expr d = differentiate(piece.map[a], to_multi_index(mi));
              auto dev = detail::compare_on((*job.xi)(d), d, points);
              ++rep.comparisons;
              rep.max_deviation = std::max(rep.max_deviation, dev.value);
              if (dev.value > kTransformerTolerance)
                rep.check.fail(job.label + ": xi changes a derivative of order " + std::to_string(l) + " of " +
                               atlas.chart(o.from).name + " -> " + atlas.chart(o.to).name + " at " +
                               CompiledExpr::format_point(dev.point));
            }
        }
    }
  return rep;
}

// ---------------------------------------------------------------------------
// Partition preservation

struct PreservationEntry {
  std::string xi;
  PartitionReport partition;
  Verdict smoothness = Verdict::member;
  bool passed() const { return partition.passed() && smoothness == Verdict::member; }
};

struct PreservationReport {
  std::vector<PreservationEntry> entries;
  bool passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed(); });
  }
};

/// Re-verifies (xi psi_s)_s as a partition of unity for each listed key (all
/// transformers when empty): sum, sign, supports, and C^class_order on the
/// cells of every chart.
inline PreservationReport check_partition_preservation(const ConnectiveStructure& cs, const PartitionOfUnity& pou,
                                                       const std::vector<XiKey>& keys = {}, int class_order = 2,
                                                       const Budget& budget = {}, std::size_t samples = 1000) {
  std::vector<std::pair<std::string, const Transformer*>> list;
  if (keys.empty()) {
    list = cs.transformers();
  } else {
    for (const auto& k : keys) list.emplace_back(k.describe(), &cs.xi(k));
  }
  PreservationReport rep;
  const Atlas& atlas = pou.atlas();
  std::optional<PreservationEntry> identity_entry;  // every identity entry has the same result
  for (const auto& [label, xi] : list) {
    if (xi->is_identity && identity_entry) {
      rep.entries.push_back(*identity_entry);
      rep.entries.back().xi = label;
      continue;
    }
    PreservationEntry e;
    e.xi = label;
    auto transformed = pou.transformed(*xi);
    e.partition = verify_partition(transformed, samples);
    if (class_order >= 0)
      for (std::size_t s = 0; s < atlas.size(); ++s)
        for (const auto& cell : atlas.cells(s))
          for (std::size_t t = 0; t < atlas.size(); ++t) {
            if (cell.sig[t] < 0) continue;
            e.smoothness = conjunction(
                e.smoothness, check_ck(transformed.psi(t, s, cell.sig), class_order, Domain(cell.box), budget, nullptr));
          }
    if (xi->is_identity) identity_entry = e;
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Regularity globalization

struct GlobalizedClaim {
  IndexSet X;
  Verdict source = Verdict::inconclusive;
  std::string source_spaces;
  std::string xi;
  std::vector<IndexClaim> derived;
  Verdict verdict = Verdict::inconclusive;
};

/// From f in B_{alpha0(j)} and C^{k - beta0(j) - z} on U: checks that
/// (theta, vartheta) is ordinary in Gamma_k[z] and that d^l (xi f) lies in
/// B_{theta(l)} and C^{k - vartheta(l)} for every l in Gamma_k[z].
inline GlobalizedClaim globalize_regularity(const Expr& f, const Domain& U, FamilyKind family,
                                            const ConnectiveStructure& cs, const AdditiveDegreeSet& ads,
                                            const Index& z, const IndexMap& theta, const IndexMap& vartheta,
                                            const Budget& budget = {}) {
  GlobalizedClaim out;
  const auto b0 = cs.beta0_j();
  try {
    out.X = gamma_z(ads, b0, z);
  } catch (const Error& e) {
    throw PreconditionError("z in the window [beta0; j]_k", e.what());
  }
  auto ord = find_ordinary_sequence(theta, vartheta, cs.O(), cs.Q(), out.X, z);
  if (!ord.ordinary)
    throw PreconditionError("ordinary pair", ord.reason + (ord.failing_l ? " (l = " + to_string(*ord.failing_l) + ")"
                                                                         : std::string()));
  for (const auto& l : out.X.elements()) {
    auto v = vartheta.at(l);
    if (!v || l > *v) throw PreconditionError("i <= vartheta(i)", "fails at i = " + to_string(l));
  }
  const std::int64_t k = cs.k();
  const Index a0 = cs.alpha0_j();
  const auto c_order = k - b0 - z.numerator();
  if (!is_integral(z) || c_order < 0) throw PreconditionError("z in the window [beta0; j]_k", "k - beta0(j) - z < 0");
  Verdict b = Verdict::inconclusive;
  if (family == FamilyKind::lp) {
    b = check_lp(f, boost::rational_cast<double>(a0), U, budget, nullptr);
    out.source_spaces = "L^" + to_string(a0);
  } else {
    if (!is_integral(a0) || a0 > Index(k)) throw ConfigError("alpha0(j) must be an integer <= k for C^k families");
    b = check_ck(f, static_cast<int>(k - a0.numerator()), U, budget, nullptr);
    out.source_spaces = "C^" + std::to_string(k - a0.numerator());
  }
  out.source_spaces += " and C^" + std::to_string(c_order);
  out.source = conjunction(b, check_ck(f, static_cast<int>(c_order), U, budget, nullptr));
  if (out.source == Verdict::not_member)
    throw PreconditionError("claim verified", to_string(f) + " is not in " + out.source_spaces);
  const XiKey key{cs.roles().alpha0, cs.roles().beta0, theta.name(), vartheta.name()};
  const Transformer& xi = cs.xi(key);
  out.xi = xi.name;
  RegularitySpec spec{family, Order::finite(k), 6, theta.restricted(out.X, theta.name()),
                      vartheta.restricted(out.X, vartheta.name())};
  auto claim = check_membership(xi(f), U, spec, out.X.elements(), budget);
  out.derived = std::move(claim.per_index);
  out.verdict = conjunction(out.source, claim.verdict);
  return out;
}

}  // namespace regcalc
