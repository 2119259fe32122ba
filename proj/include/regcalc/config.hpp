#pragma once

// Reading run configurations (JSON) into library objects. Every error is a
// ConfigError prefixed with the JSON path of the offending value.

#include <json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "regcalc/atlas.hpp"
#include "regcalc/connection.hpp"
#include "regcalc/connective.hpp"
#include "regcalc/error.hpp"
#include "regcalc/expr.hpp"
#include "regcalc/index_algebra.hpp"
#include "regcalc/multiplicity.hpp"
#include "regcalc/spaces.hpp"

namespace regcalc::config {

using Json = nlohmann::ordered_json;

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw ConfigError((path.empty() ? "/" : path) + ": " + what);
}

inline std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
inline std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

inline const Json& require(const Json& j, const std::string& path, const std::string& key) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path, "missing key '" + key + "'");
  return *it;
}

inline const Json* optional(const Json& j, const std::string& key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

inline std::string read_string(const Json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

inline double read_double(const Json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

inline std::int64_t read_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<std::int64_t>();
}

template <class T, class F>
T value_or(const Json& j, const std::string& path, const std::string& key, T fallback, F&& read) {
  if (const Json* v = optional(j, key)) return read(*v, child(path, key));
  return fallback;
}

inline Index read_index(const Json& j, const std::string& path) {
  if (j.is_number_integer()) return Index(j.get<std::int64_t>());
  if (j.is_string()) {
    if (auto i = parse_index(j.get<std::string>())) return *i;
    fail(path, "'" + j.get<std::string>() + "' is not an index (integer or p/q)");
  }
  fail(path, "expected an index (integer or \"p/q\")");
}

inline Order read_order(const Json& j, const std::string& path) {
  if (j.is_string() && (j == "inf" || j == "infinity")) return Order::infinity();
  const auto v = read_int(j, path);
  if (v < 0) fail(path, "order must be nonnegative");
  return Order::finite(v);
}

/// {"interval": k} for [0,k], or a list of indices.
inline IndexSet read_index_set(const Json& j, const std::string& path) {
  if (j.is_object()) return IndexSet::interval(read_order(require(j, path, "interval"), child(path, "interval")));
  if (!j.is_array()) fail(path, "expected {\"interval\": k} or a list of indices");
  std::vector<Index> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_index(j[i], child(path, i)));
  return IndexSet::finite(out);
}

/// {"identity": D} | {"constant": v, "domain": D} | {"shift": c, "domain": D}
/// | {"table": {"i": v, ...}}.
inline IndexMap read_map(const std::string& name, const Json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected a map description");
  try {
    if (const Json* d = optional(j, "identity")) return IndexMap::identity(name, read_index_set(*d, child(path, "identity")));
    if (const Json* c = optional(j, "constant"))
      return IndexMap::constant(name, read_index_set(require(j, path, "domain"), child(path, "domain")),
                                read_index(*c, child(path, "constant")));
    if (const Json* c = optional(j, "shift"))
      return IndexMap::shift(name, read_index_set(require(j, path, "domain"), child(path, "domain")),
                             read_index(*c, child(path, "shift")));
    if (const Json* t = optional(j, "table")) {
      if (!t->is_object()) fail(child(path, "table"), "expected an object of index -> value");
      std::map<Index, Index> m;
      for (const auto& [k, v] : t->items()) {
        auto key = parse_index(k);
        if (!key) fail(child(path, "table"), "'" + k + "' is not an index");
        m.emplace(*key, read_index(v, child(child(path, "table"), k)));
      }
      return IndexMap(name, std::move(m));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(path, e.what());
  }
  fail(path, "unknown map kind (expected identity, constant, shift or table)");
}

using MapTable = std::map<std::string, IndexMap>;

inline MapTable read_maps(const Json& root) {
  MapTable out;
  if (const Json* m = optional(root, "maps")) {
    if (!m->is_object()) fail("/maps", "expected an object");
    for (const auto& [name, v] : m->items()) out.emplace(name, read_map(name, v, "/maps/" + name));
  }
  return out;
}

inline const IndexMap& lookup_map(const MapTable& maps, const Json& j, const std::string& path) {
  const auto name = read_string(j, path);
  auto it = maps.find(name);
  if (it == maps.end()) fail(path, "undeclared map '" + name + "'");
  return it->second;
}

inline DistributiveStructure read_structure(const Json& j, const std::string& path) {
  const auto name = read_string(require(j, path, "name"), child(path, "name"));
  try {
    if (name == "custom") {
      auto base = read_index_set(require(j, path, "base"), child(path, "base"));
      auto table = [&](const char* key) {
        std::vector<IndexTriple> out;
        const Json& t = require(j, path, key);
        if (!t.is_array()) fail(child(path, key), "expected a list of [i, j, value]");
        for (std::size_t i = 0; i < t.size(); ++i) {
          const auto p = child(child(path, key), i);
          if (!t[i].is_array() || t[i].size() != 3) fail(p, "expected [i, j, value]");
          out.emplace_back(read_index(t[i][0], p), read_index(t[i][1], p), read_index(t[i][2], p));
        }
        return out;
      };
      return custom_structure(std::move(base), table("eps"), table("delta"));
    }
    StructureParams params;
    if (const Json* k = optional(j, "k")) params.k = read_order(*k, child(path, "k"));
    if (const Json* e = optional(j, "exponents")) {
      if (!e->is_array()) fail(child(path, "exponents"), "expected a list");
      for (std::size_t i = 0; i < e->size(); ++i)
        params.exponents.push_back(read_index((*e)[i], child(child(path, "exponents"), i)));
    }
    return builtin_structure(name, params);
  } catch (const ConfigError& e) {
    if (std::string(e.what()).rfind("/", 0) == 0) throw;
    fail(path, e.what());
  }
}

inline Expr read_expr(const Json& j, const std::string& path) {
  const auto text = read_string(j, path);
  try {
    return parse(text);
  } catch (const SyntaxError& e) {
    fail(path, std::string("cannot parse '") + text + "': " + e.what());
  }
}

inline std::vector<Expr> read_exprs(const Json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected a list of expressions");
  std::vector<Expr> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_expr(j[i], child(path, i)));
  return out;
}

inline std::vector<double> read_doubles(const Json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].is_string()) {
      // allows "pi", "2*pi" and similar constant expressions
      auto e = read_expr(j[i], child(path, i));
      if (e.arity() > 0) fail(child(path, i), "expected a constant");
      out.push_back(CompiledExpr(e)(std::vector<double>{}));
    } else {
      out.push_back(read_double(j[i], child(path, i)));
    }
  }
  return out;
}

inline Box read_box(const Json& j, const std::string& path) {
  auto lo = read_doubles(require(j, path, "lo"), child(path, "lo"));
  auto hi = read_doubles(require(j, path, "hi"), child(path, "hi"));
  try {
    return Box(std::move(lo), std::move(hi));
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

/// A box or a list of boxes.
inline Domain read_domain(const Json& j, const std::string& path) {
  if (j.is_object()) return Domain(read_box(j, path));
  if (!j.is_array() || j.empty()) fail(path, "expected a box or a nonempty list of boxes");
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < j.size(); ++i) boxes.push_back(read_box(j[i], child(path, i)));
  try {
    return Domain(std::move(boxes));
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

/// {"product": [atlas, atlas]} or
/// {"dim", "k", "k_check", "charts": [{"name", "image"}], "overlaps": [{"from", "to", "pieces": [{"domain", "map"}]}]}.
inline Atlas read_atlas(const Json& j, const std::string& path) {
  if (const Json* p = optional(j, "product")) {
    if (!p->is_array() || p->size() != 2) fail(child(path, "product"), "expected two atlases");
    return product_atlas(read_atlas((*p)[0], child(child(path, "product"), 0)),
                         read_atlas((*p)[1], child(child(path, "product"), 1)));
  }
  const auto dim = read_int(require(j, path, "dim"), child(path, "dim"));
  if (dim < 1) fail(child(path, "dim"), "dimension must be positive");
  const Order k = read_order(require(j, path, "k"), child(path, "k"));
  const int k_check = static_cast<int>(value_or<std::int64_t>(j, path, "k_check", 6, read_int));
  const Json& charts = require(j, path, "charts");
  if (!charts.is_array() || charts.empty()) fail(child(path, "charts"), "expected a nonempty list");
  std::vector<Chart> cs;
  std::set<std::string> names;
  for (std::size_t i = 0; i < charts.size(); ++i) {
    const auto p = child(child(path, "charts"), i);
    auto name = read_string(require(charts[i], p, "name"), child(p, "name"));
    if (!names.insert(name).second) fail(child(p, "name"), "duplicate chart '" + name + "'");
    cs.push_back({std::move(name), read_domain(require(charts[i], p, "image"), child(p, "image"))});
  }
  std::vector<OverlapDecl> ov;
  if (const Json* o = optional(j, "overlaps")) {
    if (!o->is_array()) fail(child(path, "overlaps"), "expected a list");
    for (std::size_t i = 0; i < o->size(); ++i) {
      const auto p = child(child(path, "overlaps"), i);
      const Json& e = (*o)[i];
      OverlapDecl d;
      d.from = read_string(require(e, p, "from"), child(p, "from"));
      d.to = read_string(require(e, p, "to"), child(p, "to"));
      if (!names.count(d.from)) fail(child(p, "from"), "undeclared chart '" + d.from + "'");
      if (!names.count(d.to)) fail(child(p, "to"), "undeclared chart '" + d.to + "'");
      const Json& pieces = require(e, p, "pieces");
      if (!pieces.is_array()) fail(child(p, "pieces"), "expected a list");
      for (std::size_t q = 0; q < pieces.size(); ++q) {
        const auto pp = child(child(p, "pieces"), q);
        d.pieces.push_back({read_box(require(pieces[q], pp, "domain"), child(pp, "domain")),
                            read_exprs(require(pieces[q], pp, "map"), child(pp, "map"))});
      }
      ov.push_back(std::move(d));
    }
  }
  try {
    return Atlas(static_cast<std::size_t>(dim), std::move(cs), std::move(ov), k, k_check);
  } catch (const ConfigError& e) {
    fail(path, e.what());
  }
}

/// {"family": "lp"|"ck", "alpha": name, "beta": name} with k taken from `k`
/// unless given.
inline RegularitySpec read_spec(const Json& j, const std::string& path, const MapTable& maps,
                                std::optional<Order> k = std::nullopt, int k_check = 6) {
  RegularitySpec spec;
  const auto family = read_string(require(j, path, "family"), child(path, "family"));
  if (family == "lp")
    spec.kind = FamilyKind::lp;
  else if (family == "ck")
    spec.kind = FamilyKind::ck;
  else
    fail(child(path, "family"), "unknown family '" + family + "' (expected lp or ck)");
  if (const Json* kk = optional(j, "k"))
    spec.k = read_order(*kk, child(path, "k"));
  else if (k)
    spec.k = *k;
  else
    fail(path, "missing key 'k'");
  spec.k_check = static_cast<int>(value_or<std::int64_t>(j, path, "k_check", k_check, read_int));
  spec.alpha = lookup_map(maps, require(j, path, "alpha"), child(path, "alpha"));
  spec.beta = lookup_map(maps, require(j, path, "beta"), child(path, "beta"));
  return spec;
}

inline std::vector<IndexMap> read_map_list(const Json& j, const std::string& path, const MapTable& maps) {
  if (!j.is_array()) fail(path, "expected a list of map names");
  std::vector<IndexMap> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(lookup_map(maps, j[i], child(path, i)));
  return out;
}

inline Transformer read_transformer(const Json& j, const std::string& path) {
  try {
    return parse_transformer(read_string(j, path));
  } catch (const ConfigError& e) {
    fail(path, e.what());
  } catch (const SyntaxError& e) {
    fail(path, e.what());
  }
}

inline NamePair read_pair(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) fail(path, "expected [theta, vartheta]");
  return {read_string(j[0], child(path, 0)), read_string(j[1], child(path, 1))};
}

inline ConnectiveStructure read_connective(const Json& j, const std::string& path, const MapTable& maps) {
  const auto k = read_int(require(j, path, "k"), child(path, "k"));
  const Index jj = read_index(require(j, path, "j"), child(path, "j"));
  auto O = read_map_list(require(j, path, "O"), child(path, "O"), maps);
  auto Q = read_map_list(require(j, path, "Q"), child(path, "Q"), maps);
  ConnectiveRoles roles;
  if (const Json* r = optional(j, "roles")) {
    const auto p = child(path, "roles");
    roles.alpha = value_or<std::string>(*r, p, "alpha", roles.alpha, read_string);
    roles.alpha0 = value_or<std::string>(*r, p, "alpha0", roles.alpha0, read_string);
    roles.beta = value_or<std::string>(*r, p, "beta", roles.beta, read_string);
    roles.beta0 = value_or<std::string>(*r, p, "beta0", roles.beta0, read_string);
  }
  ConnectiveTables tables;
  if (const Json* d = optional(j, "default_xi")) tables.default_xi = read_transformer(*d, child(path, "default_xi"));
  if (const Json* x = optional(j, "xi")) {
    if (!x->is_array()) fail(child(path, "xi"), "expected a list");
    for (std::size_t i = 0; i < x->size(); ++i) {
      const auto p = child(child(path, "xi"), i);
      const auto from = read_pair(require((*x)[i], p, "from"), child(p, "from"));
      const auto to = read_pair(require((*x)[i], p, "to"), child(p, "to"));
      tables.xi.emplace(XiKey{from.first, from.second, to.first, to.second},
                        read_transformer(require((*x)[i], p, "transformer"), child(p, "transformer")));
    }
  }
  auto read_d = [&](const char* key, std::map<NamePair, Transformer>& out) {
    if (const Json* t = optional(j, key)) {
      if (!t->is_array()) fail(child(path, key), "expected a list");
      for (std::size_t i = 0; i < t->size(); ++i) {
        const auto p = child(child(path, key), i);
        out.emplace(NamePair{read_string(require((*t)[i], p, "from"), child(p, "from")),
                             read_string(require((*t)[i], p, "to"), child(p, "to"))},
                    read_transformer(require((*t)[i], p, "transformer"), child(p, "transformer")));
      }
    }
  };
  read_d("D_O", tables.d_o);
  read_d("D_Q", tables.d_q);
  const auto tag = value_or<std::string>(j, path, "base_tag", "X", read_string);
  std::vector<std::string> tags;
  if (const Json* t = optional(j, "compatible_tags"))
    for (std::size_t i = 0; i < t->size(); ++i) tags.push_back(read_string((*t)[i], child(child(path, "compatible_tags"), i)));
  try {
    return ConnectiveStructure(static_cast<int>(k), std::move(O), std::move(Q), jj, std::move(roles), std::move(tables),
                               tag, std::move(tags));
  } catch (const ConfigError& e) {
    fail(path, e.what());
  }
}

/// {"chart name": [n^3 expressions], ...}, one entry per chart.
inline std::vector<std::vector<Expr>> read_chart_table(const Json& j, const std::string& path, const Atlas& atlas) {
  if (!j.is_object()) fail(path, "expected an object of chart name -> expressions");
  std::vector<std::vector<Expr>> out(atlas.size());
  std::vector<bool> seen(atlas.size(), false);
  for (const auto& [name, v] : j.items()) {
    std::size_t s = 0;
    try {
      s = atlas.chart_index(name);
    } catch (const Error&) {
      fail(child(path, name), "undeclared chart '" + name + "'");
    }
    out[s] = read_exprs(v, child(path, name));
    seen[s] = true;
  }
  for (std::size_t s = 0; s < atlas.size(); ++s)
    if (!seen[s]) fail(path, "missing chart '" + atlas.chart(s).name + "'");
  return out;
}

inline std::vector<LocalCoefficients> read_locals(const Json& j, const std::string& path, const Atlas& atlas,
                                                  const Budget& budget) {
  auto table = read_chart_table(j, path, atlas);
  std::vector<LocalCoefficients> out;
  for (std::size_t s = 0; s < atlas.size(); ++s) {
    try {
      out.push_back(local_connection(atlas, atlas.chart(s).name, std::move(table[s]), std::nullopt, budget));
    } catch (const ConfigError& e) {
      fail(child(path, atlas.chart(s).name), e.what());
    }
  }
  return out;
}

inline ThreeParamFamily read_family(const Json& j, const std::string& path, const Atlas& atlas) {
  try {
    return ThreeParamFamily(atlas, read_chart_table(j, path, atlas));
  } catch (const ConfigError& e) {
    if (std::string(e.what()).rfind("/", 0) == 0) throw;
    fail(path, e.what());
  }
}

}  // namespace regcalc::config
