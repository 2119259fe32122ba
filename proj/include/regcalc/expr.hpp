#pragma once

// Expression language over real variables x1..xn: parser, canonical printer,
// exact symbolic differentiation, composition and compiled evaluation.
//
// Grammar (see docs/expression_grammar.md):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' exponent)?
//   exponent:= integer | '-' integer | '(' expr ')'      (must fold to an integer)
//   primary := number | 'pi' | variable | func '(' expr (',' expr)? ')' | '(' expr ')'
//   variable:= 'x' digit+                                   (x1 is the first coordinate)
//   func    := sin | cos | exp | log | sqrt | bump

#include <algorithm>
#include <array>
#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "regcalc/error.hpp"

namespace regcalc {

enum class Op : std::uint8_t { constant, variable, add, sub, mul, div, neg, pow, sin, cos, exp, log, sqrt, bump };

class Expr;

namespace detail {

struct Node {
  Op op = Op::constant;
  double value = 0.0;  // constant
  int var = 0;         // variable (0-based)
  int exponent = 0;    // pow
  std::shared_ptr<const Node> a, b;
};

using NodePtr = std::shared_ptr<const Node>;

}  // namespace detail

/// Immutable expression tree. Copies share structure.
///
/// `bump(t, g)` is the guarded product exp(-1/(1-t^2)) * g for |t| < 1 and
/// exactly 0 otherwise; `g` is never evaluated outside the support, which
/// keeps every derivative of a bump total. `bump(t)` means `bump(t, 1)`.
class Expr {
 public:
  Expr() : Expr(constant(0.0)) {}

  static Expr constant(double v) {
    auto n = std::make_shared<detail::Node>();
    n->op = Op::constant;
    n->value = v;
    return Expr(std::move(n));
  }

  /// Coordinate x_{index+1}.
  static Expr variable(int index) {
    if (index < 0) throw Error("variable index must be nonnegative");
    auto n = std::make_shared<detail::Node>();
    n->op = Op::variable;
    n->var = index;
    return Expr(std::move(n));
  }

  Op op() const { return node_->op; }
  bool is_constant() const { return node_->op == Op::constant; }
  bool is_constant(double v) const { return is_constant() && node_->value == v; }
  double value() const { return node_->value; }
  int var() const { return node_->var; }
  int exponent() const { return node_->exponent; }
  Expr lhs() const { return Expr(node_->a); }
  Expr rhs() const { return Expr(node_->b); }
  const detail::Node* id() const { return node_.get(); }

  /// 0-based indices of the variables that occur.
  std::set<int> free_variables() const {
    std::set<int> out;
    std::vector<const detail::Node*> stack{node_.get()};
    std::set<const detail::Node*> seen;
    while (!stack.empty()) {
      const auto* n = stack.back();
      stack.pop_back();
      if (!n || !seen.insert(n).second) continue;
      if (n->op == Op::variable) out.insert(n->var);
      stack.push_back(n->a.get());
      stack.push_back(n->b.get());
    }
    return out;
  }

  /// Number of coordinates needed to evaluate (max variable index + 1).
  int arity() const {
    auto fv = free_variables();
    return fv.empty() ? 0 : *fv.rbegin() + 1;
  }

  /// Structural equality.
  friend bool operator==(const Expr& x, const Expr& y) { return equal(x.node_.get(), y.node_.get()); }

  // Folding constructors: constant folding and zero/one elimination only.
  friend Expr operator+(const Expr& x, const Expr& y) {
    if (x.is_constant() && y.is_constant()) return constant(x.value() + y.value());
    if (x.is_constant(0.0)) return y;
    if (y.is_constant(0.0)) return x;
    return binary(Op::add, x, y);
  }
  friend Expr operator-(const Expr& x, const Expr& y) {
    if (x.is_constant() && y.is_constant()) return constant(x.value() - y.value());
    if (y.is_constant(0.0)) return x;
    if (x.is_constant(0.0)) return -y;
    return binary(Op::sub, x, y);
  }
  friend Expr operator*(const Expr& x, const Expr& y) {
    if (x.is_constant() && y.is_constant()) return constant(x.value() * y.value());
    if (x.is_constant(0.0) || y.is_constant(0.0)) return constant(0.0);
    if (x.is_constant(1.0)) return y;
    if (y.is_constant(1.0)) return x;
    return binary(Op::mul, x, y);
  }
  friend Expr operator/(const Expr& x, const Expr& y) {
    if (x.is_constant() && y.is_constant() && y.value() != 0.0) return constant(x.value() / y.value());
    if (x.is_constant(0.0) && !y.is_constant(0.0)) return constant(0.0);
    if (y.is_constant(1.0)) return x;
    return binary(Op::div, x, y);
  }
  friend Expr operator-(const Expr& x) {
    if (x.is_constant()) return constant(-x.value());
    return unary(Op::neg, x);
  }

  friend Expr pow(const Expr& x, int n) {
    if (n == 0) return constant(1.0);
    if (n == 1) return x;
    if (x.is_constant() && !(x.value() == 0.0 && n < 0)) return constant(std::pow(x.value(), n));
    auto node = std::make_shared<detail::Node>();
    node->op = Op::pow;
    node->exponent = n;
    node->a = x.node_;
    return Expr(std::move(node));
  }
  friend Expr sin(const Expr& x) { return x.is_constant() ? constant(std::sin(x.value())) : unary(Op::sin, x); }
  friend Expr cos(const Expr& x) { return x.is_constant() ? constant(std::cos(x.value())) : unary(Op::cos, x); }
  friend Expr exp(const Expr& x) { return x.is_constant() ? constant(std::exp(x.value())) : unary(Op::exp, x); }
  friend Expr log(const Expr& x) {
    if (x.is_constant() && x.value() > 0.0) return constant(std::log(x.value()));
    return unary(Op::log, x);
  }
  friend Expr sqrt(const Expr& x) {
    if (x.is_constant() && x.value() >= 0.0) return constant(std::sqrt(x.value()));
    return unary(Op::sqrt, x);
  }
  /// Guarded product bump(t) * g.
  friend Expr bump(const Expr& t, const Expr& g) {
    if (g.is_constant(0.0)) return constant(0.0);
    if (t.is_constant() && g.is_constant()) {
      const double tv = t.value();
      return constant(std::abs(tv) < 1.0 ? std::exp(-1.0 / (1.0 - tv * tv)) * g.value() : 0.0);
    }
    return binary(Op::bump, t, g);
  }
  friend Expr bump(const Expr& t) { return bump(t, constant(1.0)); }

 private:
  explicit Expr(detail::NodePtr n) : node_(std::move(n)) {}

  static Expr unary(Op op, const Expr& x) {
    auto n = std::make_shared<detail::Node>();
    n->op = op;
    n->a = x.node_;
    return Expr(std::move(n));
  }
  static Expr binary(Op op, const Expr& x, const Expr& y) {
    auto n = std::make_shared<detail::Node>();
    n->op = op;
    n->a = x.node_;
    n->b = y.node_;
    return Expr(std::move(n));
  }

  static bool equal(const detail::Node* x, const detail::Node* y) {
    if (x == y) return true;
    if (!x || !y) return false;
    if (x->op != y->op) return false;
    switch (x->op) {
      case Op::constant: return x->value == y->value;
      case Op::variable: return x->var == y->var;
      case Op::pow: return x->exponent == y->exponent && equal(x->a.get(), y->a.get());
      default: return equal(x->a.get(), y->a.get()) && equal(x->b.get(), y->b.get());
    }
  }

  detail::NodePtr node_;

  friend class CompiledExpr;
  friend Expr derivative(const Expr& e, int var);
  friend Expr substitute(const Expr& e, std::span<const Expr> replacements);
};

inline Expr operator+(const Expr& x, double c) { return x + Expr::constant(c); }
inline Expr operator*(double c, const Expr& x) { return Expr::constant(c) * x; }

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::add:
    case Op::sub: return 1;
    case Op::mul:
    case Op::div: return 2;
    case Op::neg: return 3;
    case Op::pow: return 4;
    case Op::constant: return e.value() < 0.0 || std::signbit(e.value()) ? 3 : 5;
    default: return 5;
  }
}

inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

inline void print(const Expr& e, std::string& out) {
  auto wrap = [&out](const Expr& sub, bool parens) {
    if (parens) out += '(';
    print(sub, out);
    if (parens) out += ')';
  };
  switch (e.op()) {
    case Op::constant: out += format_number(e.value()); return;
    case Op::variable: out += "x" + std::to_string(e.var() + 1); return;
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div: {
      const int p = precedence(e);
      wrap(e.lhs(), precedence(e.lhs()) < p);
      out += e.op() == Op::add ? " + " : e.op() == Op::sub ? " - " : e.op() == Op::mul ? "*" : "/";
      wrap(e.rhs(), precedence(e.rhs()) <= p || precedence(e.rhs()) == 3);
      return;
    }
    case Op::neg:
      out += '-';
      wrap(e.lhs(), precedence(e.lhs()) < 3 || e.lhs().op() == Op::neg ||
                        (e.lhs().is_constant() && precedence(e.lhs()) == 3));
      return;
    case Op::pow:
      wrap(e.lhs(), precedence(e.lhs()) <= 4);
      out += '^';
      out += e.exponent() < 0 ? "(" + std::to_string(e.exponent()) + ")" : std::to_string(e.exponent());
      return;
    case Op::bump:
      out += "bump(";
      print(e.lhs(), out);
      if (!e.rhs().is_constant(1.0)) {
        out += ", ";
        print(e.rhs(), out);
      }
      out += ')';
      return;
    default: {
      static constexpr std::array<std::string_view, 14> names{"", "", "", "", "", "", "", "",
                                                              "sin", "cos", "exp", "log", "sqrt", ""};
      out += names[static_cast<std::size_t>(e.op())];
      out += '(';
      print(e.lhs(), out);
      out += ')';
    }
  }
}

}  // namespace detail

/// Canonical text form; parse(to_string(e)) == e for parser-built trees.
inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print(e, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse() {
    Expr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) throw SyntaxError("unexpected '" + std::string(1, text_[pos_]) + "'", pos_);
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
                                   text_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size()) throw SyntaxError(std::string("expected '") + c + "', got end of input", pos_);
      throw SyntaxError(std::string("expected '") + c + "'", pos_);
    }
  }

  Expr parse_expr() {
    Expr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = lhs + parse_term();
      } else if (accept('-')) {
        lhs = lhs - parse_term();
      } else {
        return lhs;
      }
    }
  }

  Expr parse_term() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = lhs * parse_unary();
      } else if (accept('/')) {
        lhs = lhs / parse_unary();
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (accept('-')) return -parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (!accept('^')) return base;
    skip_ws();
    const std::size_t at = pos_;
    Expr ex = accept('(') ? parse_paren_rest() : (accept('-') ? -parse_primary() : parse_primary());
    if (!ex.is_constant() || std::floor(ex.value()) != ex.value() || std::abs(ex.value()) > 1e6)
      throw SyntaxError("exponent must be an integer constant", at);
    return pow(base, static_cast<int>(ex.value()));
  }

  Expr parse_paren_rest() {
    Expr e = parse_expr();
    expect(')');
    return e;
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw SyntaxError("expected an operand, got end of input", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      return parse_paren_rest();
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
    throw SyntaxError("unexpected '" + std::string(1, c) + "'", pos_);
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
    if (ec != std::errc{}) throw SyntaxError("malformed number", start);
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    return Expr::constant(v);
  }

  Expr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string name(text_.substr(start, pos_ - start));
    if (name == "pi") return Expr::constant(std::numbers::pi);
    if (name.size() >= 2 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      int idx = 0;
      std::from_chars(name.data() + 1, name.data() + name.size(), idx);
      if (idx < 1) throw UnknownIdentifierError(name, start);
      return Expr::variable(idx - 1);
    }
    if (name == "sin" || name == "cos" || name == "exp" || name == "log" || name == "sqrt" || name == "bump") {
      expect('(');
      Expr arg = parse_expr();
      if (name == "bump" && accept(',')) {
        Expr g = parse_expr();
        expect(')');
        return bump(arg, g);
      }
      expect(')');
      if (name == "sin") return sin(arg);
      if (name == "cos") return cos(arg);
      if (name == "exp") return exp(arg);
      if (name == "log") return log(arg);
      if (name == "sqrt") return sqrt(arg);
      return bump(arg);
    }
    throw UnknownIdentifierError(name, start);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse(std::string_view text) { return detail::Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Differentiation and substitution

/// d e / d x_{var+1}. Shared subtrees are differentiated once.
inline Expr derivative(const Expr& e, int var) {
  std::unordered_map<const detail::Node*, Expr> memo;
  auto rec = [&](auto&& self, const Expr& x) -> Expr {
    if (auto it = memo.find(x.id()); it != memo.end()) return it->second;
    Expr d;
    switch (x.op()) {
      case Op::constant: d = Expr::constant(0.0); break;
      case Op::variable: d = Expr::constant(x.var() == var ? 1.0 : 0.0); break;
      case Op::add: d = self(self, x.lhs()) + self(self, x.rhs()); break;
      case Op::sub: d = self(self, x.lhs()) - self(self, x.rhs()); break;
      case Op::neg: d = -self(self, x.lhs()); break;
      case Op::mul: d = self(self, x.lhs()) * x.rhs() + x.lhs() * self(self, x.rhs()); break;
      case Op::div: {
        const Expr& u = x.lhs();
        const Expr& w = x.rhs();
        d = (self(self, u) * w - u * self(self, w)) / pow(w, 2);
        break;
      }
      case Op::pow:
        d = Expr::constant(x.exponent()) * pow(x.lhs(), x.exponent() - 1) * self(self, x.lhs());
        break;
      case Op::sin: d = cos(x.lhs()) * self(self, x.lhs()); break;
      case Op::cos: d = -sin(x.lhs()) * self(self, x.lhs()); break;
      case Op::exp: d = x * self(self, x.lhs()); break;
      case Op::log: d = self(self, x.lhs()) / x.lhs(); break;
      case Op::sqrt: d = self(self, x.lhs()) / (Expr::constant(2.0) * x); break;
      case Op::bump: {
        // (bump(t) g)' = bump(t) (g * (-2t / (1-t^2)^2) * t' + g')
        const Expr& t = x.lhs();
        const Expr& g = x.rhs();
        Expr dt = self(self, t);
        Expr factor = Expr::constant(-2.0) * t / pow(Expr::constant(1.0) - pow(t, 2), 2);
        d = bump(t, g * factor * dt + self(self, g));
        break;
      }
    }
    memo.emplace(x.id(), d);
    return d;
  };
  return rec(rec, e);
}

/// Pairs (variable index, order).
using MultiIndex = std::vector<std::pair<int, int>>;

inline constexpr int kMaxDerivativeOrder = 12;

inline int total_order(const MultiIndex& mi) {
  int t = 0;
  for (const auto& [v, k] : mi) {
    if (v < 0 || k < 0) throw Error("multi-index entries must be nonnegative");
    t += k;
  }
  return t;
}

inline Expr differentiate(const Expr& e, const MultiIndex& mi) {
  if (total_order(mi) > kMaxDerivativeOrder)
    throw OrderBudgetError("derivative order " + std::to_string(total_order(mi)) + " exceeds the budget of " +
                           std::to_string(kMaxDerivativeOrder));
  Expr out = e;
  for (const auto& [v, k] : mi)
    for (int n = 0; n < k; ++n) out = derivative(out, v);
  return out;
}

/// All multi-indices of total order `order` in `dim` variables, as
/// per-variable order vectors (lexicographically descending).
inline std::vector<std::vector<int>> multi_indices(int dim, int order) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(dim), 0);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == dim - 1) {
      cur[static_cast<std::size_t>(pos)] = left;
      out.push_back(cur);
      return;
    }
    for (int k = left; k >= 0; --k) {
      cur[static_cast<std::size_t>(pos)] = k;
      self(self, pos + 1, left - k);
    }
  };
  if (dim == 0) {
    if (order == 0) out.emplace_back();
    return out;
  }
  rec(rec, 0, order);
  return out;
}

inline MultiIndex to_multi_index(const std::vector<int>& orders) {
  MultiIndex mi;
  for (std::size_t v = 0; v < orders.size(); ++v)
    if (orders[v] > 0) mi.emplace_back(static_cast<int>(v), orders[v]);
  return mi;
}

/// All partial derivatives of total order `order`.
inline std::vector<Expr> partials(const Expr& e, int dim, int order) {
  std::vector<Expr> out;
  for (const auto& orders : multi_indices(dim, order)) out.push_back(differentiate(e, to_multi_index(orders)));
  return out;
}

/// Replaces x_{i+1} by replacements[i]. Variables beyond the span stay.
inline Expr substitute(const Expr& e, std::span<const Expr> replacements) {
  std::unordered_map<const detail::Node*, Expr> memo;
  auto rec = [&](auto&& self, const Expr& x) -> Expr {
    if (auto it = memo.find(x.id()); it != memo.end()) return it->second;
    Expr r;
    switch (x.op()) {
      case Op::constant: r = x; break;
      case Op::variable:
        r = static_cast<std::size_t>(x.var()) < replacements.size() ? replacements[static_cast<std::size_t>(x.var())]
                                                                     : x;
        break;
      case Op::add: r = self(self, x.lhs()) + self(self, x.rhs()); break;
      case Op::sub: r = self(self, x.lhs()) - self(self, x.rhs()); break;
      case Op::mul: r = self(self, x.lhs()) * self(self, x.rhs()); break;
      case Op::div: r = self(self, x.lhs()) / self(self, x.rhs()); break;
      case Op::neg: r = -self(self, x.lhs()); break;
      case Op::pow: r = pow(self(self, x.lhs()), x.exponent()); break;
      case Op::sin: r = sin(self(self, x.lhs())); break;
      case Op::cos: r = cos(self(self, x.lhs())); break;
      case Op::exp: r = exp(self(self, x.lhs())); break;
      case Op::log: r = log(self(self, x.lhs())); break;
      case Op::sqrt: r = sqrt(self(self, x.lhs())); break;
      case Op::bump: r = bump(self(self, x.lhs()), self(self, x.rhs())); break;
    }
    memo.emplace(x.id(), r);
    return r;
  };
  return rec(rec, e);
}

// ---------------------------------------------------------------------------
// Evaluation

/// Flattened, deduplicated instruction tape for repeated evaluation.
/// Domain violations poison a slot; bump guards discard poison from their
/// multiplier outside the support. A poisoned result raises EvaluationError.
class CompiledExpr {
 public:
  CompiledExpr() : CompiledExpr(Expr::constant(0.0)) {}

  explicit CompiledExpr(const Expr& e) {
    std::unordered_map<const detail::Node*, int> slot;
    auto rec = [&](auto&& self, const detail::Node* n) -> int {
      if (auto it = slot.find(n); it != slot.end()) return it->second;
      Instr ins;
      ins.op = n->op;
      ins.value = n->value;
      ins.var = n->var;
      ins.exponent = n->exponent;
      if (n->a) ins.a = self(self, n->a.get());
      if (n->b) ins.b = self(self, n->b.get());
      if (n->op == Op::variable) arity_ = std::max(arity_, n->var + 1);
      tape_.push_back(ins);
      const int id = static_cast<int>(tape_.size()) - 1;
      slot.emplace(n, id);
      return id;
    };
    rec(rec, e.node_.get());
  }

  int arity() const { return arity_; }
  std::size_t size() const { return tape_.size(); }

  double operator()(std::span<const double> point) const {
    auto r = try_evaluate(point);
    if (r.error) throw EvaluationError(std::string(r.error) + " at " + format_point(point));
    return r.value;
  }

  struct Result {
    double value = 0.0;
    const char* error = nullptr;
  };

  Result try_evaluate(std::span<const double> point) const {
    thread_local std::vector<double> vals;
    thread_local std::vector<const char*> errs;
    vals.resize(tape_.size());
    errs.resize(tape_.size());
    for (std::size_t n = 0; n < tape_.size(); ++n) {
      const Instr& in = tape_[n];
      const char* err = nullptr;
      double v = 0.0;
      const double a = in.a >= 0 ? vals[static_cast<std::size_t>(in.a)] : 0.0;
      const double b = in.b >= 0 ? vals[static_cast<std::size_t>(in.b)] : 0.0;
      const char* ea = in.a >= 0 ? errs[static_cast<std::size_t>(in.a)] : nullptr;
      const char* eb = in.b >= 0 ? errs[static_cast<std::size_t>(in.b)] : nullptr;
      switch (in.op) {
        case Op::constant: v = in.value; break;
        case Op::variable:
          if (static_cast<std::size_t>(in.var) >= point.size()) {
            err = "point has too few coordinates";
          } else {
            v = point[static_cast<std::size_t>(in.var)];
          }
          break;
        case Op::add: v = a + b; err = ea ? ea : eb; break;
        case Op::sub: v = a - b; err = ea ? ea : eb; break;
        case Op::mul: v = a * b; err = ea ? ea : eb; break;
        case Op::div:
          err = ea ? ea : eb;
          if (!err && b == 0.0) err = "division by zero";
          v = err ? 0.0 : a / b;
          break;
        case Op::neg: v = -a; err = ea; break;
        case Op::pow:
          err = ea;
          if (!err && a == 0.0 && in.exponent < 0) err = "division by zero";
          v = err ? 0.0 : int_pow(a, in.exponent);
          break;
        case Op::sin: v = std::sin(a); err = ea; break;
        case Op::cos: v = std::cos(a); err = ea; break;
        case Op::exp: v = std::exp(a); err = ea; break;
        case Op::log:
          err = ea;
          if (!err && a <= 0.0) err = "log of a nonpositive number";
          v = err ? 0.0 : std::log(a);
          break;
        case Op::sqrt:
          err = ea;
          if (!err && a < 0.0) err = "sqrt of a negative number";
          v = err ? 0.0 : std::sqrt(a);
          break;
        case Op::bump: {
          if (ea) {
            err = ea;
            break;
          }
          const double w = std::abs(a) < 1.0 ? std::exp(-1.0 / (1.0 - a * a)) : 0.0;
          if (w == 0.0) {
            v = 0.0;
          } else {
            err = eb;
            v = w * b;
          }
          break;
        }
      }
      if (!err && !std::isfinite(v)) err = "non-finite value";
      vals[n] = v;
      errs[n] = err;
    }
    if (tape_.empty()) return {};
    return {vals.back(), errs.back()};
  }

  static double int_pow(double a, int n) {
    if (n < 0) return 1.0 / int_pow(a, -n);
    double r = 1.0;
    while (n) {
      if (n & 1) r *= a;
      a *= a;
      n >>= 1;
    }
    return r;
  }

  static std::string format_point(std::span<const double> p) {
    std::string s = "(";
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (i) s += ", ";
      s += detail::format_number(p[i]);
    }
    return s + ")";
  }

 private:
  struct Instr {
    Op op;
    double value;
    int var;
    int exponent;
    int a = -1;
    int b = -1;
  };
  std::vector<Instr> tape_;
  int arity_ = 0;
};

inline double evaluate(const Expr& e, std::span<const double> point) { return CompiledExpr(e)(point); }

inline double evaluate(const Expr& e, std::initializer_list<double> point) {
  return evaluate(e, std::span<const double>(point.begin(), point.size()));
}

}  // namespace regcalc
