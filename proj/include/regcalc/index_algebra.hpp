#pragma once

// Index algebra: index sets, distributive structures (epsilon, delta),
// additive degree-k sets, the windows [beta0; j]_k and Gamma_k[z], iterated
// epsilon and ordinary-pair checks.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/rational.hpp>

#include "regcalc/error.hpp"

namespace regcalc {

/// Indices are exact rationals; integrality is checked where it matters.
using Index = boost::rational<std::int64_t>;

inline bool is_integral(const Index& i) { return i.denominator() == 1; }

inline std::string to_string(const Index& i) {
  if (is_integral(i)) return std::to_string(i.numerator());
  return std::to_string(i.numerator()) + "/" + std::to_string(i.denominator());
}

/// Parses "3", "-2" or "3/2".
inline std::optional<Index> parse_index(std::string_view text) {
  auto parse_int = [](std::string_view s) -> std::optional<std::int64_t> {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
  };
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) {
    auto n = parse_int(text);
    if (!n) return std::nullopt;
    return Index(*n);
  }
  auto n = parse_int(text.substr(0, slash));
  auto d = parse_int(text.substr(slash + 1));
  if (!n || !d || *d == 0) return std::nullopt;
  return Index(*n, *d);
}

/// Regularity order k: a nonnegative integer or infinity.
struct Order {
  std::int64_t value = 0;
  bool infinite = false;

  static constexpr Order finite(std::int64_t v) { return Order{v, false}; }
  static constexpr Order infinity() { return Order{0, true}; }

  std::string describe() const { return infinite ? "inf" : std::to_string(value); }
  friend bool operator==(const Order&, const Order&) = default;
};

/// A finite ordered set of rational indices, or the integer interval [0,k]
/// (k finite or infinite).
class IndexSet {
 public:
  IndexSet() = default;

  static IndexSet finite(std::vector<Index> elements) {
    std::sort(elements.begin(), elements.end());
    if (std::adjacent_find(elements.begin(), elements.end()) != elements.end())
      throw ConfigError("index set elements must be distinct");
    IndexSet s;
    s.kind_ = Kind::finite;
    s.elements_ = std::move(elements);
    return s;
  }

  static IndexSet interval(std::int64_t k) {
    if (k < 0) throw ConfigError("interval [0,k] requires k >= 0, got " + std::to_string(k));
    IndexSet s;
    s.kind_ = Kind::interval;
    s.upper_ = k;
    return s;
  }

  static IndexSet interval(Order k) { return k.infinite ? unbounded() : interval(k.value); }

  static IndexSet unbounded() {
    IndexSet s;
    s.kind_ = Kind::unbounded;
    return s;
  }

  bool is_unbounded() const { return kind_ == Kind::unbounded; }
  bool is_interval() const { return kind_ == Kind::interval; }
  bool enumerable() const { return kind_ != Kind::unbounded; }

  /// k for a finite interval descriptor.
  std::optional<std::int64_t> upper() const {
    if (kind_ == Kind::interval) return upper_;
    return std::nullopt;
  }

  bool contains(const Index& i) const {
    switch (kind_) {
      case Kind::finite:
        return std::binary_search(elements_.begin(), elements_.end(), i);
      case Kind::interval:
        return is_integral(i) && i >= 0 && i <= upper_;
      case Kind::unbounded:
        return is_integral(i) && i >= 0;
    }
    return false;
  }

  std::vector<Index> elements() const {
    if (kind_ == Kind::finite) return elements_;
    if (kind_ == Kind::unbounded) throw Error("cannot enumerate the unbounded interval [0,inf)");
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(upper_ + 1));
    for (std::int64_t i = 0; i <= upper_; ++i) out.emplace_back(i);
    return out;
  }

  std::size_t size() const {
    if (kind_ == Kind::finite) return elements_.size();
    if (kind_ == Kind::interval) return static_cast<std::size_t>(upper_ + 1);
    throw Error("the unbounded interval has no finite size");
  }

  bool empty() const { return kind_ == Kind::finite && elements_.empty(); }

  /// Contains every integer of [0, r].
  bool has_degree(std::int64_t r) const {
    if (kind_ == Kind::unbounded) return true;
    if (kind_ == Kind::interval) return upper_ >= r;
    for (std::int64_t i = 0; i <= r; ++i)
      if (!contains(Index(i))) return false;
    return true;
  }

  bool subset_of(const IndexSet& other) const {
    if (kind_ == Kind::unbounded) return other.is_unbounded();
    for (const auto& e : elements())
      if (!other.contains(e)) return false;
    return true;
  }

  std::string describe() const {
    if (kind_ == Kind::unbounded) return "[0,inf)";
    if (kind_ == Kind::interval) return "[0," + std::to_string(upper_) + "]";
    std::string out = "{";
    for (std::size_t n = 0; n < elements_.size(); ++n) {
      if (n) out += ",";
      out += to_string(elements_[n]);
    }
    return out + "}";
  }

  friend bool operator==(const IndexSet& a, const IndexSet& b) {
    if (a.is_unbounded() || b.is_unbounded()) return a.is_unbounded() && b.is_unbounded();
    return a.elements() == b.elements();
  }

 private:
  enum class Kind { finite, interval, unbounded };
  Kind kind_ = Kind::finite;
  std::vector<Index> elements_;
  std::int64_t upper_ = 0;
};

/// A named map between index sets given by a finite table. Used for alpha,
/// beta, theta, vartheta and the members of the sets O and Q.
class IndexMap {
 public:
  IndexMap() = default;
  IndexMap(std::string name, std::map<Index, Index> values)
      : name_(std::move(name)), values_(std::move(values)) {}

  static IndexMap identity(std::string name, const IndexSet& domain) {
    std::map<Index, Index> v;
    for (const auto& i : domain.elements()) v.emplace(i, i);
    return {std::move(name), std::move(v)};
  }

  static IndexMap constant(std::string name, const IndexSet& domain, const Index& value) {
    std::map<Index, Index> v;
    for (const auto& i : domain.elements()) v.emplace(i, value);
    return {std::move(name), std::move(v)};
  }

  /// i -> c - i.
  static IndexMap shift(std::string name, const IndexSet& domain, const Index& c) {
    std::map<Index, Index> v;
    for (const auto& i : domain.elements()) v.emplace(i, c - i);
    return {std::move(name), std::move(v)};
  }

  const std::string& name() const { return name_; }
  const std::map<Index, Index>& values() const { return values_; }

  std::optional<Index> at(const Index& i) const {
    auto it = values_.find(i);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  Index operator()(const Index& i) const {
    auto v = at(i);
    if (!v) throw UndefinedIndexError("map '" + name_ + "' is undefined at " + to_string(i));
    return *v;
  }

  IndexSet domain() const {
    std::vector<Index> d;
    for (const auto& [k, _] : values_) d.push_back(k);
    return IndexSet::finite(std::move(d));
  }

  bool defined_on(const IndexSet& x) const {
    for (const auto& i : x.elements())
      if (!values_.count(i)) return false;
    return true;
  }

  /// Equal values at every point of `x` (both must be defined there).
  bool agrees_with(const IndexMap& other, const IndexSet& x) const {
    for (const auto& i : x.elements()) {
      auto a = at(i);
      auto b = other.at(i);
      if (!a || !b || *a != *b) return false;
    }
    return true;
  }

  /// Agreement on this map's whole domain.
  bool agrees_with(const IndexMap& other) const { return agrees_with(other, domain()); }

  IndexMap restricted(const IndexSet& x, std::string name) const {
    std::map<Index, Index> v;
    for (const auto& i : x.elements()) v.emplace(i, (*this)(i));
    return {std::move(name), std::move(v)};
  }

 private:
  std::string name_;
  std::map<Index, Index> values_;
};

/// Looks up a member of `set` that agrees with `map` on `on`.
inline const IndexMap* find_agreeing(const std::vector<IndexMap>& set, const IndexMap& map,
                                     const IndexSet& on) {
  for (const auto& m : set)
    if (m.agrees_with(map, on)) return &m;
  return nullptr;
}

inline const IndexMap* find_agreeing(const std::vector<IndexMap>& set, const IndexMap& map) {
  return find_agreeing(set, map, map.domain());
}

inline const IndexMap* find_by_name(const std::vector<IndexMap>& set, std::string_view name) {
  for (const auto& m : set)
    if (m.name() == name) return &m;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Distributive structures

using PartialOp = std::function<std::optional<Index>(const Index&, const Index&)>;

enum class StructureKind { pointwise_ck, holder_lp, young_conv, max_interval, custom };

inline std::string_view structure_name(StructureKind k) {
  switch (k) {
    case StructureKind::pointwise_ck: return "pointwise_ck";
    case StructureKind::holder_lp: return "holder_lp";
    case StructureKind::young_conv: return "young_conv";
    case StructureKind::max_interval: return "max_interval";
    case StructureKind::custom: return "custom";
  }
  return "?";
}

/// Index set Gamma with the partial product-index map epsilon and sum-index
/// map delta. Undefined pairs, and arguments outside the base, yield
/// std::nullopt. Results may leave a finite base (eps(2,2) = 1 for Hoelder on
/// {2,3,6}); they are then only usable as values, not as further arguments.
class DistributiveStructure {
 public:
  DistributiveStructure(StructureKind kind, IndexSet base, PartialOp eps, PartialOp delta)
      : kind_(kind), base_(std::move(base)), eps_(std::move(eps)), delta_(std::move(delta)) {}

  StructureKind kind() const { return kind_; }
  std::string_view name() const { return structure_name(kind_); }
  const IndexSet& base() const { return base_; }

  std::optional<Index> eps(const Index& i, const Index& j) const {
    if (!base_.contains(i) || !base_.contains(j)) return std::nullopt;
    return eps_(i, j);
  }

  std::optional<Index> delta(const Index& i, const Index& j) const {
    if (!base_.contains(i) || !base_.contains(j)) return std::nullopt;
    return delta_(i, j);
  }

  Index eps_or_throw(const Index& i, const Index& j) const {
    auto r = eps(i, j);
    if (!r) throw UndefinedIndexError("eps(" + to_string(i) + "," + to_string(j) + ") is undefined");
    return *r;
  }

  Index delta_or_throw(const Index& i, const Index& j) const {
    auto r = delta(i, j);
    if (!r)
      throw UndefinedIndexError("delta(" + to_string(i) + "," + to_string(j) + ") is undefined");
    return *r;
  }

 private:
  StructureKind kind_;
  IndexSet base_;
  PartialOp eps_;
  PartialOp delta_;
};

struct StructureParams {
  /// Interval structures: Gamma = [0,k].
  std::optional<Order> k;
  /// L^p structures: the exponent set (positive integers).
  std::vector<Index> exponents;
};

inline DistributiveStructure builtin_structure(std::string_view name, const StructureParams& params) {
  auto max_op = [](const Index& i, const Index& j) -> std::optional<Index> { return std::max(i, j); };
  auto min_op = [](const Index& i, const Index& j) -> std::optional<Index> { return std::min(i, j); };

  if (name == "pointwise_ck" || name == "max_interval") {
    if (!params.k) throw ConfigError(std::string(name) + " requires parameter k");
    if (!params.k->infinite && params.k->value < 0)
      throw ConfigError(std::string(name) + " requires k >= 0");
    if (name == "pointwise_ck" && params.k->infinite)
      throw ConfigError("pointwise_ck requires a finite k (use max_interval for k = inf)");
    const auto kind = name == "pointwise_ck" ? StructureKind::pointwise_ck : StructureKind::max_interval;
    return {kind, IndexSet::interval(*params.k), max_op, max_op};
  }

  if (name == "holder_lp" || name == "young_conv") {
    if (params.exponents.empty()) throw ConfigError(std::string(name) + " requires a nonempty exponent set");
    for (const auto& e : params.exponents)
      if (!is_integral(e) || e <= 0)
        throw ConfigError(std::string(name) + " exponents must be positive integers, got " + to_string(e));
    auto base = IndexSet::finite(params.exponents);
    if (name == "holder_lp") {
      auto eps = [](const Index& i, const Index& j) -> std::optional<Index> {
        Index r = i * j / (i + j);
        if (!is_integral(r)) return std::nullopt;
        return r;
      };
      return {StructureKind::holder_lp, std::move(base), eps, min_op};
    }
    auto eps = [](const Index& i, const Index& j) -> std::optional<Index> {
      Index denom = i + j - i * j;
      if (denom <= 0) return std::nullopt;
      Index r = i * j / denom;
      if (!is_integral(r)) return std::nullopt;
      return r;
    };
    return {StructureKind::young_conv, std::move(base), eps, min_op};
  }

  throw ConfigError("unknown distributive structure '" + std::string(name) + "'");
}

using IndexTriple = std::tuple<Index, Index, Index>;

/// Explicit epsilon/delta tables over a finite base; missing pairs are undefined.
inline DistributiveStructure custom_structure(IndexSet base, const std::vector<IndexTriple>& eps_table,
                                              const std::vector<IndexTriple>& delta_table) {
  if (!base.enumerable()) throw ConfigError("custom structures need a finite base");
  auto to_map = [&](const std::vector<IndexTriple>& table, const char* what) {
    auto m = std::make_shared<std::map<std::pair<Index, Index>, Index>>();
    for (const auto& [i, j, v] : table) {
      if (!base.contains(i) || !base.contains(j) || !base.contains(v))
        throw ConfigError(std::string(what) + " table entry (" + to_string(i) + "," + to_string(j) + ") -> " +
                          to_string(v) + " leaves the base set");
      if (!m->emplace(std::pair{i, j}, v).second)
        throw ConfigError(std::string(what) + " table defines (" + to_string(i) + "," + to_string(j) + ") twice");
    }
    return [m](const Index& i, const Index& j) -> std::optional<Index> {
      auto it = m->find({i, j});
      if (it == m->end()) return std::nullopt;
      return it->second;
    };
  };
  auto eps = to_map(eps_table, "eps");
  auto delta = to_map(delta_table, "delta");
  return {StructureKind::custom, std::move(base), eps, delta};
}

enum class Law { left_distributive, right_distributive, idempotent_sum };

inline std::string_view law_name(Law l) {
  switch (l) {
    case Law::left_distributive: return "eps(i,delta(j,k)) = delta(eps(i,j),eps(i,k))";
    case Law::right_distributive: return "eps(delta(i,j),k) = delta(eps(i,k),eps(j,k))";
    case Law::idempotent_sum: return "delta(i,i) = i";
  }
  return "?";
}

struct LawCase {
  Law law;
  Index i, j, k;
  std::optional<Index> lhs, rhs;
};

struct LawReport {
  /// Both sides defined and different, or delta(i,i) != i.
  std::vector<LawCase> violations;
  /// Exactly one side defined: documented partiality, not a failure.
  std::vector<LawCase> partial;
  std::size_t triples_checked = 0;
  bool exhaustive = true;

  bool passed() const { return violations.empty(); }
};

struct SampleBudget {
  std::size_t triples = 10000;
  std::int64_t max_index = 64;  // sampling range for unbounded bases
  std::uint64_t seed = 1;
};

inline constexpr std::size_t kExhaustiveLimit = 65;

namespace detail {

inline std::optional<Index> apply_defined(const std::optional<Index>& a, const std::optional<Index>& b,
                                 const std::function<std::optional<Index>(const Index&, const Index&)>& f) {
  if (!a || !b) return std::nullopt;
  return f(*a, *b);
}

inline void check_triple(const DistributiveStructure& ds, const Index& i, const Index& j, const Index& k,
                         LawReport& report) {
  auto eps = [&](const Index& a, const Index& b) { return ds.eps(a, b); };
  auto delta = [&](const Index& a, const Index& b) { return ds.delta(a, b); };
  auto classify = [&](Law law, std::optional<Index> lhs, std::optional<Index> rhs) {
    if (lhs && rhs) {
      if (*lhs != *rhs) report.violations.push_back({law, i, j, k, lhs, rhs});
    } else if (lhs.has_value() != rhs.has_value()) {
      report.partial.push_back({law, i, j, k, lhs, rhs});
    }
  };
  {
    auto d = delta(j, k);
    auto lhs = d ? eps(i, *d) : std::nullopt;
    auto rhs = apply_defined(eps(i, j), eps(i, k), delta);
    classify(Law::left_distributive, lhs, rhs);
  }
  {
    auto d = delta(i, j);
    auto lhs = d ? eps(*d, k) : std::nullopt;
    auto rhs = apply_defined(eps(i, k), eps(j, k), delta);
    classify(Law::right_distributive, lhs, rhs);
  }
  ++report.triples_checked;
}

}  // namespace detail

/// Checks both distributivity laws on every triple and delta(i,i) = i on
/// every element. Exhaustive when the base has at most 65 elements; otherwise
/// samples `budget->triples` triples or throws when no budget is given.
inline LawReport check_distributive_laws(const DistributiveStructure& ds,
                                         std::optional<SampleBudget> budget = std::nullopt) {
  LawReport report;
  const auto& base = ds.base();
  const bool small = base.enumerable() && base.size() <= kExhaustiveLimit;
  if (small) {
    const auto elems = base.elements();
    for (const auto& i : elems) {
      auto d = ds.delta(i, i);
      if (!d || *d != i) report.violations.push_back({Law::idempotent_sum, i, i, i, d, i});
      for (const auto& j : elems)
        for (const auto& k : elems) detail::check_triple(ds, i, j, k, report);
    }
    return report;
  }
  if (!budget)
    throw Error("base " + base.describe() + " is too large for exhaustive law checking; give a sample budget");
  report.exhaustive = false;
  std::mt19937_64 rng(budget->seed);
  std::vector<Index> pool;
  if (base.enumerable()) {
    pool = base.elements();
  } else {
    for (std::int64_t v = 0; v <= budget->max_index; ++v) pool.emplace_back(v);
  }
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (std::size_t n = 0; n < budget->triples; ++n) {
    const Index& i = pool[pick(rng)];
    const Index& j = pool[pick(rng)];
    const Index& k = pool[pick(rng)];
    auto d = ds.delta(i, i);
    if (!d || *d != i) report.violations.push_back({Law::idempotent_sum, i, i, i, d, i});
    detail::check_triple(ds, i, j, k, report);
  }
  return report;
}

/// eps^r(l, m) = eps(l, eps(l, ... eps(l, m))) with r occurrences of l.
inline Index eps_power(const DistributiveStructure& ds, int r, const Index& l, const Index& m) {
  if (r < 1) throw Error("eps_power requires r >= 1");
  Index acc = m;
  for (int n = 0; n < r; ++n) acc = ds.eps_or_throw(l, acc);
  return acc;
}

/// [beta0; j]_k = [0, k - beta0(j)]; [0, inf) when k is infinite.
inline IndexSet beta_window(Order k, std::int64_t beta0_j) {
  if (beta0_j < 2) throw Error("beta0(j) must be >= 2, got " + std::to_string(beta0_j));
  if (k.infinite) return IndexSet::unbounded();
  if (beta0_j > k.value)
    throw Error("beta0(j) must be <= k = " + std::to_string(k.value) + ", got " + std::to_string(beta0_j));
  return IndexSet::interval(k.value - beta0_j);
}

/// A degree-k set Gamma_k inside a degree-2k set Gamma_2k with a sum map
/// extending the integer sum on [0,k].
class AdditiveDegreeSet {
 public:
  static AdditiveDegreeSet integers(Order k) {
    auto plus = [](const Index& a, const Index& b) -> std::optional<Index> { return a + b; };
    if (k.infinite) return AdditiveDegreeSet(k, IndexSet::unbounded(), IndexSet::unbounded(), plus);
    return AdditiveDegreeSet(k, IndexSet::interval(k.value), IndexSet::interval(2 * k.value), plus);
  }

  static AdditiveDegreeSet custom(Order k, IndexSet gamma_k, IndexSet gamma_2k, PartialOp plus) {
    if (k.infinite) throw ConfigError("custom additive sets need a finite degree");
    if (!gamma_k.has_degree(k.value))
      throw ConfigError("Gamma_k " + gamma_k.describe() + " does not have degree " + std::to_string(k.value));
    if (!gamma_2k.has_degree(2 * k.value))
      throw ConfigError("Gamma_2k " + gamma_2k.describe() + " does not have degree " + std::to_string(2 * k.value));
    if (!gamma_k.subset_of(gamma_2k)) throw ConfigError("Gamma_k must be contained in Gamma_2k");
    for (std::int64_t z = 0; z <= k.value; ++z)
      for (std::int64_t l = 0; l <= k.value; ++l) {
        auto s = plus(Index(z), Index(l));
        if (!s || *s != Index(z + l))
          throw ConfigError("additive structure must extend the integer sum: " + std::to_string(z) + " + " +
                            std::to_string(l));
      }
    return AdditiveDegreeSet(k, std::move(gamma_k), std::move(gamma_2k), std::move(plus));
  }

  Order degree() const { return k_; }
  const IndexSet& gamma_k() const { return gamma_k_; }
  const IndexSet& gamma_2k() const { return gamma_2k_; }

  std::optional<Index> plus(const Index& a, const Index& b) const {
    if (!gamma_k_.contains(a) || !gamma_k_.contains(b)) return std::nullopt;
    auto r = plus_(a, b);
    if (r && !gamma_2k_.contains(*r)) return std::nullopt;
    return r;
  }

 private:
  AdditiveDegreeSet(Order k, IndexSet gk, IndexSet g2k, PartialOp plus)
      : k_(k), gamma_k_(std::move(gk)), gamma_2k_(std::move(g2k)), plus_(std::move(plus)) {}

  Order k_;
  IndexSet gamma_k_;
  IndexSet gamma_2k_;
  PartialOp plus_;
};

/// Gamma_k[z] = { l in Gamma_k : z + l in [beta0; j]_k }.
inline IndexSet gamma_z(const AdditiveDegreeSet& ads, std::int64_t beta0_j, const Index& z) {
  const IndexSet window = beta_window(ads.degree(), beta0_j);
  if (!window.contains(z))
    throw Error("z = " + to_string(z) + " lies outside the window " + window.describe());
  if (window.is_unbounded()) return IndexSet::unbounded();
  std::vector<Index> out;
  for (const auto& l : ads.gamma_k().elements()) {
    auto s = ads.plus(z, l);
    if (s && window.contains(*s)) out.push_back(l);
  }
  // Normalize to the interval descriptor when the result is [0,m].
  const auto m = static_cast<std::int64_t>(out.size()) - 1;
  if (m >= 0 && out.front() == Index(0) && out.back() == Index(m)) {
    bool integers = std::all_of(out.begin(), out.end(), [](const Index& i) { return is_integral(i); });
    if (integers) return IndexSet::interval(m);
  }
  return IndexSet::finite(std::move(out));
}

// ---------------------------------------------------------------------------
// Ordinary pairs

using MapPair = std::pair<IndexMap, IndexMap>;

struct OrdinaryResult {
  bool ordinary = false;
  std::optional<MapPair> induced;
  std::optional<Index> failing_l;
  std::string reason;
};

/// A sequence (theta_l, vartheta_l), l in X, is ordinary in X when every pair
/// lies in O x Q and the induced pair theta*(l) = theta_l(z),
/// vartheta*(l) = vartheta_l(z) also lies in O x Q (agreement on X).
inline OrdinaryResult is_ordinary(const std::map<Index, MapPair>& pairs, const std::vector<IndexMap>& O,
                                  const std::vector<IndexMap>& Q, const IndexSet& X, const Index& z) {
  std::map<Index, Index> theta_star, vartheta_star;
  for (const auto& l : X.elements()) {
    auto it = pairs.find(l);
    if (it == pairs.end()) throw Error("sequence of pairs has no entry for l = " + to_string(l));
    const auto& [theta_l, vartheta_l] = it->second;
    auto t = theta_l.at(z);
    auto v = vartheta_l.at(z);
    if (!t || !v)
      throw Error("maps of the pair at l = " + to_string(l) + " are not defined at z = " + to_string(z));
    if (!find_agreeing(O, theta_l))
      return {false, std::nullopt, l, "theta_" + to_string(l) + " ('" + theta_l.name() + "') is not in O"};
    if (!find_agreeing(Q, vartheta_l))
      return {false, std::nullopt, l, "vartheta_" + to_string(l) + " ('" + vartheta_l.name() + "') is not in Q"};
    theta_star.emplace(l, *t);
    vartheta_star.emplace(l, *v);
  }
  IndexMap ts("theta*", std::move(theta_star));
  IndexMap vs("vartheta*", std::move(vartheta_star));
  if (!find_agreeing(O, ts, X)) return {false, std::nullopt, std::nullopt, "induced theta* is not in O"};
  if (!find_agreeing(Q, vs, X)) return {false, std::nullopt, std::nullopt, "induced vartheta* is not in Q"};
  return {true, MapPair{std::move(ts), std::move(vs)}, std::nullopt, {}};
}

/// Decides whether (theta, vartheta) is ordinary in X: searches, for each l,
/// maps theta_l in O and vartheta_l in Q with theta_l(z) = theta(l) and
/// vartheta_l(z) = vartheta(l), then confirms with is_ordinary.
inline OrdinaryResult find_ordinary_sequence(const IndexMap& theta, const IndexMap& vartheta,
                                             const std::vector<IndexMap>& O, const std::vector<IndexMap>& Q,
                                             const IndexSet& X, const Index& z) {
  std::map<Index, MapPair> seq;
  for (const auto& l : X.elements()) {
    auto t = theta.at(l);
    auto v = vartheta.at(l);
    if (!t || !v) return {false, std::nullopt, l, "theta/vartheta undefined at l = " + to_string(l)};
    const IndexMap* tl = nullptr;
    for (const auto& m : O)
      if (m.at(z) == t) {
        tl = &m;
        break;
      }
    const IndexMap* vl = nullptr;
    for (const auto& m : Q)
      if (m.at(z) == v) {
        vl = &m;
        break;
      }
    if (!tl) return {false, std::nullopt, l, "no map in O takes the value " + to_string(*t) + " at z"};
    if (!vl) return {false, std::nullopt, l, "no map in Q takes the value " + to_string(*v) + " at z"};
    seq.emplace(l, MapPair{*tl, *vl});
  }
  auto result = is_ordinary(seq, O, Q, X, z);
  if (result.ordinary) {
    result.induced->first = theta.restricted(X, theta.name());
    result.induced->second = vartheta.restricted(X, vartheta.name());
  }
  return result;
}

}  // namespace regcalc
