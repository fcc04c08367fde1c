#include "hsgt/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "hsgt/error.hpp"

namespace hsgt::expr {

struct Expr::Node {
  Op op = Op::Const;
  double c = 0.0;  // constant value or power exponent
  std::string name;  // variable name, or bound name of a composition
  std::vector<Expr> args;
};

Expr::Expr() : Expr(constant(0.0)) {}
Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr Expr::constant(double c) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->c = c;
  return Expr(std::move(n));
}

Expr Expr::variable(std::string name) {
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->name = std::move(name);
  return Expr(std::move(n));
}

Expr Expr::binary(Op op, Expr lhs, Expr rhs) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->args = {std::move(lhs), std::move(rhs)};
  return Expr(std::move(n));
}

Expr Expr::power(Expr base, double exponent) {
  auto n = std::make_shared<Node>();
  n->op = Op::Pow;
  n->c = exponent;
  n->args = {std::move(base)};
  return Expr(std::move(n));
}

Expr Expr::unary(Op op, Expr arg) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->args = {std::move(arg)};
  return Expr(std::move(n));
}

Expr Expr::nary(Op op, std::vector<Expr> args) {
  if (args.empty()) throw Error("min/max need at least one argument");
  auto n = std::make_shared<Node>();
  n->op = op;
  n->args = std::move(args);
  return Expr(std::move(n));
}

Expr Expr::compose(Expr outer, std::string var, Expr inner) {
  auto n = std::make_shared<Node>();
  n->op = Op::Compose;
  n->name = std::move(var);
  n->args = {std::move(outer), std::move(inner)};
  return Expr(std::move(n));
}

Op Expr::op() const { return node_->op; }
double Expr::constant_value() const { return node_->c; }
double Expr::exponent() const { return node_->c; }
const std::string& Expr::name() const { return node_->name; }
const std::vector<Expr>& Expr::args() const { return node_->args; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = *a.node_;
  const auto& y = *b.node_;
  if (x.op != y.op || x.name != y.name || x.args.size() != y.args.size()) return false;
  if ((x.op == Op::Const || x.op == Op::Pow) && x.c != y.c) return false;
  for (std::size_t i = 0; i < x.args.size(); ++i)
    if (!(x.args[i] == y.args[i])) return false;
  return true;
}

namespace {

std::string format_number(double c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", c);
  std::string s = buf;
  if (c < 0 || (c == 0 && std::signbit(c))) return "(" + s + ")";
  return s;
}

std::string render_with(const Expr& e, const std::map<std::string, std::string>& subst) {
  const auto& a = e.args();
  switch (e.op()) {
    case Op::Const:
      return format_number(e.constant_value());
    case Op::Var: {
      auto it = subst.find(e.name());
      return it == subst.end() ? e.name() : it->second;
    }
    case Op::Add:
      return "(" + render_with(a[0], subst) + " + " + render_with(a[1], subst) + ")";
    case Op::Sub:
      return "(" + render_with(a[0], subst) + " - " + render_with(a[1], subst) + ")";
    case Op::Mul:
      return "(" + render_with(a[0], subst) + " * " + render_with(a[1], subst) + ")";
    case Op::Div:
      return "(" + render_with(a[0], subst) + " / " + render_with(a[1], subst) + ")";
    case Op::Pow: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", e.exponent());
      return "(" + render_with(a[0], subst) + " ^ " + buf + ")";
    }
    case Op::Neg:
      return "(-" + render_with(a[0], subst) + ")";
    case Op::Abs:
      return "abs(" + render_with(a[0], subst) + ")";
    case Op::Exp:
      return "exp(" + render_with(a[0], subst) + ")";
    case Op::Log:
      return "log(" + render_with(a[0], subst) + ")";
    case Op::Min:
    case Op::Max: {
      std::string out = e.op() == Op::Min ? "min(" : "max(";
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (i) out += ", ";
        out += render_with(a[i], subst);
      }
      return out + ")";
    }
    case Op::Compose: {
      auto inner = "(" + render_with(a[1], subst) + ")";
      auto next = subst;
      next[e.name()] = inner;
      return render_with(a[0], next);
    }
  }
  return {};
}

void collect_free(const Expr& e, std::set<std::string>& bound, std::set<std::string>& out) {
  switch (e.op()) {
    case Op::Var:
      if (!bound.count(e.name())) out.insert(e.name());
      return;
    case Op::Compose: {
      collect_free(e.args()[1], bound, out);
      const bool was_bound = bound.count(e.name()) > 0;
      bound.insert(e.name());
      collect_free(e.args()[0], bound, out);
      if (!was_bound) bound.erase(e.name());
      return;
    }
    default:
      for (const auto& a : e.args()) collect_free(a, bound, out);
  }
}

// ---------------------------------------------------------------------------
// Parser

bool is_function_name(std::string_view s) {
  return s == "abs" || s == "min" || s == "max" || s == "exp" || s == "log";
}

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& vars) : text_(text), vars_(vars) {}

  Expr parse() {
    skip_space();
    if (at_end()) fail("empty expression");
    Expr e = parse_expr();
    skip_space();
    if (!at_end()) fail(std::string("unexpected '") + text_[pos_] + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(pos_ + 1, what); }

  bool at_end() const { return pos_ >= text_.size(); }
  void skip_space() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_space();
    if (!at_end() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) {
      if (at_end()) fail(std::string("expected '") + c + "' before end of input");
      fail(std::string("expected '") + c + "'");
    }
  }

  Expr parse_expr() {
    Expr lhs = parse_term();
    for (;;) {
      if (accept('+'))
        lhs = Expr::binary(Op::Add, lhs, parse_term());
      else if (accept('-'))
        lhs = Expr::binary(Op::Sub, lhs, parse_term());
      else
        return lhs;
    }
  }

  Expr parse_term() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept('*'))
        lhs = Expr::binary(Op::Mul, lhs, parse_unary());
      else if (accept('/'))
        lhs = Expr::binary(Op::Div, lhs, parse_unary());
      else
        return lhs;
    }
  }

  Expr parse_unary() {
    if (accept('-')) return Expr::unary(Op::Neg, parse_unary());
    if (accept('+')) return parse_unary();
    return parse_factor();
  }

  Expr parse_factor() {
    Expr base = parse_atom();
    if (accept('^')) {
      const bool negative = accept('-');
      skip_space();
      double p = parse_number_literal();
      base = Expr::power(base, negative ? -p : p);
    }
    return base;
  }

  double parse_number_literal() {
    skip_space();
    if (at_end()) fail("expected a number before end of input");
    const char c = text_[pos_];
    if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '.')) fail("expected a number");
    std::string buf(text_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(buf.c_str(), &end);
    const std::size_t used = static_cast<std::size_t>(end - buf.c_str());
    if (used == 0) fail("malformed number");
    pos_ += used;
    return v;
  }

  Expr parse_atom() {
    skip_space();
    if (at_end()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return Expr::constant(parse_number_literal());
    if (c == '(') {
      ++pos_;
      Expr inner = parse_expr();
      expect(')');
      return inner;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (!at_end() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
      std::string ident(text_.substr(start, pos_ - start));
      const std::size_t after_ident = pos_;
      if (is_function_name(ident) && accept('(')) return parse_call(ident);
      pos_ = after_ident;
      if (std::find(vars_.begin(), vars_.end(), ident) == vars_.end()) throw UnknownIdentifier(ident);
      return Expr::variable(ident);
    }
    fail(std::string("unexpected '") + c + "'");
  }

  Expr parse_call(const std::string& fn) {
    std::vector<Expr> args;
    args.push_back(parse_expr());
    while (accept(',')) args.push_back(parse_expr());
    expect(')');
    if (fn == "min" || fn == "max") return Expr::nary(fn == "min" ? Op::Min : Op::Max, std::move(args));
    if (args.size() != 1) fail(fn + " takes exactly one argument");
    const Op op = fn == "abs" ? Op::Abs : fn == "exp" ? Op::Exp : Op::Log;
    return Expr::unary(op, std::move(args[0]));
  }

  std::string_view text_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Scalar primitives shared by the double and Jet evaluators.

double do_div(double a, double b) {
  if (b == 0.0) throw DomainError("division by zero");
  return a / b;
}
Jet do_div(const Jet& a, const Jet& b) {
  if (b.v == 0.0) throw DomainError("division by zero");
  return a / b;
}

double do_log(double a) {
  if (!(a > 0.0)) throw DomainError("log of non-positive value");
  return std::log(a);
}
Jet do_log(const Jet& a) {
  if (!(a.v > 0.0)) throw DomainError("log of non-positive value");
  return {std::log(a.v), a.d / a.v, a.kink};
}

double do_exp(double a) { return std::exp(a); }
Jet do_exp(const Jet& a) {
  const double e = std::exp(a.v);
  return {e, e * a.d, a.kink};
}

double do_abs(double a) { return std::abs(a); }
Jet do_abs(const Jet& a) {
  if (a.v > 0) return a;
  if (a.v < 0) return -a;
  return {0.0, std::abs(a.d), a.kink || a.d != 0.0};
}

bool is_integer(double p) { return std::floor(p) == p; }

double do_pow(double b, double p) {
  if (b < 0 && !is_integer(p)) throw DomainError("negative base with non-integer exponent");
  if (b == 0 && p < 0) throw DomainError("zero base with negative exponent");
  return std::pow(b, p);
}
Jet do_pow(const Jet& b, double p) {
  const double v = do_pow(b.v, p);
  if (p == 0.0) return {v, 0.0, b.kink};
  if (b.v == 0.0 && p < 1.0) {
    if (b.d == 0.0) return {v, 0.0, b.kink};
    return {v, std::numeric_limits<double>::infinity(), true};
  }
  return {v, p * std::pow(b.v, p - 1.0) * b.d, b.kink};
}

double do_extreme(const std::vector<double>& xs, bool want_max) {
  double best = xs.front();
  for (double x : xs) best = want_max ? std::max(best, x) : std::min(best, x);
  return best;
}
Jet do_extreme(const std::vector<Jet>& xs, bool want_max) {
  double best = xs.front().v;
  for (const auto& x : xs) best = want_max ? std::max(best, x.v) : std::min(best, x.v);
  Jet out{best, 0.0, false};
  bool first = true;
  bool any_kink = false;
  for (const auto& x : xs) {
    any_kink = any_kink || x.kink;
    if (!tied(x.v, best)) continue;
    if (first) {
      out.d = x.d;
      first = false;
    } else if (x.d != out.d) {
      out.kink = true;
      out.d = want_max ? std::max(out.d, x.d) : std::min(out.d, x.d);
    }
  }
  out.kink = out.kink || any_kink;
  return out;
}

}  // namespace

std::string Expr::render() const { return render_with(*this, {}); }

std::set<std::string> Expr::free_variables() const {
  std::set<std::string> bound, out;
  collect_free(*this, bound, out);
  return out;
}

Expr parse_expr(std::string_view text, const std::vector<std::string>& allowed_vars) {
  return Parser(text, allowed_vars).parse();
}

double eval(const Expr& e, const Bindings& bindings) {
  std::vector<std::string> slots;
  std::vector<double> values;
  for (const auto& name : e.free_variables()) {
    auto it = bindings.find(name);
    if (it == bindings.end()) throw UnboundVariable(name);
    slots.push_back(name);
    values.push_back(it->second);
  }
  return CompiledExpr(e, slots)(values);
}

// ---------------------------------------------------------------------------
// CompiledExpr

CompiledExpr::CompiledExpr(const Expr& e, const std::vector<std::string>& slots) : source_(e) {
  std::vector<std::string> scope = slots;
  width_ = scope.size();
  root_ = build(e, scope);
  // Compositions push extra names while building; size the environment for
  // the deepest nesting.
  std::size_t depth = 0;
  std::vector<const Node*> stack{&root_};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (n->op == Op::Compose) depth = std::max(depth, static_cast<std::size_t>(n->slot) + 1);
    for (const auto& k : n->kids) stack.push_back(&k);
  }
  width_ = std::max(width_, depth);
}

CompiledExpr::Node CompiledExpr::build(const Expr& e, std::vector<std::string>& slots) {
  Node n;
  n.op = e.op();
  switch (e.op()) {
    case Op::Const:
      n.c = e.constant_value();
      return n;
    case Op::Var: {
      for (std::size_t i = slots.size(); i-- > 0;) {
        if (slots[i] == e.name()) {
          n.slot = static_cast<int>(i);
          return n;
        }
      }
      throw UnboundVariable(e.name());
    }
    case Op::Compose: {
      n.kids.push_back(Node{});  // placeholder for outer
      n.kids.push_back(build(e.args()[1], slots));
      n.slot = static_cast<int>(slots.size());
      slots.push_back(e.name());
      n.kids[0] = build(e.args()[0], slots);
      slots.pop_back();
      return n;
    }
    case Op::Pow:
      n.c = e.exponent();
      [[fallthrough]];
    default:
      for (const auto& a : e.args()) n.kids.push_back(build(a, slots));
      return n;
  }
}

template <class T>
T CompiledExpr::run(const Node& n, std::vector<T>& env) {
  switch (n.op) {
    case Op::Const:
      if constexpr (std::is_same_v<T, double>)
        return n.c;
      else
        return Jet::constant(n.c);
    case Op::Var:
      return env[static_cast<std::size_t>(n.slot)];
    case Op::Add:
      return run(n.kids[0], env) + run(n.kids[1], env);
    case Op::Sub:
      return run(n.kids[0], env) - run(n.kids[1], env);
    case Op::Mul:
      return run(n.kids[0], env) * run(n.kids[1], env);
    case Op::Div:
      return do_div(run(n.kids[0], env), run(n.kids[1], env));
    case Op::Pow:
      return do_pow(run(n.kids[0], env), n.c);
    case Op::Neg:
      return -run(n.kids[0], env);
    case Op::Abs:
      return do_abs(run(n.kids[0], env));
    case Op::Exp:
      return do_exp(run(n.kids[0], env));
    case Op::Log:
      return do_log(run(n.kids[0], env));
    case Op::Min:
    case Op::Max: {
      std::vector<T> xs;
      xs.reserve(n.kids.size());
      for (const auto& k : n.kids) xs.push_back(run(k, env));
      return do_extreme(xs, n.op == Op::Max);
    }
    case Op::Compose: {
      T inner = run(n.kids[1], env);
      const auto slot = static_cast<std::size_t>(n.slot);
      T saved = env[slot];
      env[slot] = inner;
      T out = run(n.kids[0], env);
      env[slot] = saved;
      return out;
    }
  }
  throw Error("corrupt expression node");
}

double CompiledExpr::operator()(std::span<const double> values) const {
  std::vector<double> env(std::max(width_, values.size()), 0.0);
  std::copy(values.begin(), values.end(), env.begin());
  return run(root_, env);
}

Jet CompiledExpr::jet(std::span<const double> values, std::span<const double> tangent) const {
  std::vector<Jet> env(std::max(width_, values.size()));
  for (std::size_t i = 0; i < values.size(); ++i)
    env[i] = Jet::variable(values[i], i < tangent.size() ? tangent[i] : 0.0);
  return run(root_, env);
}

}  // namespace hsgt::expr
