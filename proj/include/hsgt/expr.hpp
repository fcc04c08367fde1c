#pragma once

// Expression DSL: parse, render and evaluate scalar expressions over named
// real variables. Grammar (whitespace insignificant):
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := ('-' | '+') unary | factor
//   factor := atom ['^' ['-'] number]
//   atom   := number | ident | func '(' expr (',' expr)* ')' | '(' expr ')'
//   func   := 'abs' | 'min' | 'max' | 'exp' | 'log'

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsgt/jet.hpp"

namespace hsgt::expr {

enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Abs, Min, Max, Exp, Log, Compose };

using Bindings = std::map<std::string, double>;

class Expr {
 public:
  /// The constant 0.
  Expr();

  static Expr constant(double c);
  static Expr variable(std::string name);
  static Expr binary(Op op, Expr lhs, Expr rhs);
  static Expr power(Expr base, double exponent);
  static Expr unary(Op op, Expr arg);
  static Expr nary(Op op, std::vector<Expr> args);
  /// outer[var := inner]; kept as a node so rendering shows the composition.
  static Expr compose(Expr outer, std::string var, Expr inner);

  Op op() const;
  double constant_value() const;
  double exponent() const;
  const std::string& name() const;
  const std::vector<Expr>& args() const;

  /// Fully parenthesized infix text that parses back to an equivalent tree.
  std::string render() const;
  std::set<std::string> free_variables() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

Expr parse_expr(std::string_view text, const std::vector<std::string>& allowed_vars);

/// Evaluates with every free variable taken from `bindings`.
double eval(const Expr& e, const Bindings& bindings);

/// An expression with variables resolved to positions in a value vector.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  CompiledExpr(const Expr& e, const std::vector<std::string>& slots);

  double operator()(std::span<const double> values) const;
  /// Value and directional derivative along `tangent` (same layout as values).
  Jet jet(std::span<const double> values, std::span<const double> tangent) const;

  const Expr& source() const { return source_; }

 private:
  struct Node {
    Op op = Op::Const;
    double c = 0.0;
    int slot = -1;
    std::vector<Node> kids;
  };
  static Node build(const Expr& e, std::vector<std::string>& slots);
  template <class T>
  static T run(const Node& n, std::vector<T>& env);

  Expr source_;
  Node root_;
  std::size_t width_ = 0;
};

}  // namespace hsgt::expr
