#pragma once

#include <functional>
#include <string>
#include <utility>

#include "regcalc/expr.hpp"

namespace regcalc {

/// A map acting on function data. Connective structures apply these to
/// coefficient functions and partition members; the identity leaves every
/// Expr untouched (same node), so results stay bit-identical.
struct Transformer {
  std::string name = "identity";
  std::function<Expr(const Expr&)> fn;
  bool is_identity = true;

  static Transformer identity() { return {}; }

  static Transformer make(std::string name, std::function<Expr(const Expr&)> fn) {
    return {std::move(name), std::move(fn), false};
  }

  Expr operator()(const Expr& e) const { return is_identity ? e : fn(e); }
};

}  // namespace regcalc
