#include <cmath>
#include <random>

#include "doctest.h"
#include "hsgt/error.hpp"
#include "hsgt/expr.hpp"

using namespace hsgt;
using namespace hsgt::expr;

TEST_CASE("parse builds the expected trees") {
  const Expr e = parse_expr("0.5*s", {"s"});
  CHECK(e == Expr::binary(Op::Mul, Expr::constant(0.5), Expr::variable("s")));

  const Expr m = parse_expr("max(s, s^2)", {"s"});
  CHECK(m == Expr::nary(Op::Max, {Expr::variable("s"), Expr::power(Expr::variable("s"), 2.0)}));

  CHECK(parse_expr("-x1 + 0.25*x2", {"x1", "x2"}).free_variables() == std::set<std::string>{"x1", "x2"});
}

TEST_CASE("parse errors carry a position") {
  try {
    parse_expr("0.5*t +", {"t"});
    FAIL("expected a syntax error");
  } catch (const ParseError& e) {
    CHECK(e.position() == 8);
  }
  CHECK_THROWS_AS(parse_expr("2*(s", {"s"}), ParseError);
  CHECK_THROWS_AS(parse_expr("", {"s"}), ParseError);
  CHECK_THROWS_AS(parse_expr("s s", {"s"}), ParseError);
  CHECK_THROWS_AS(parse_expr("abs(s, s)", {"s"}), ParseError);

  try {
    parse_expr("2*q", {"s"});
    FAIL("expected unknown identifier");
  } catch (const UnknownIdentifier& e) {
    CHECK(e.name() == "q");
  }
}

TEST_CASE("eval") {
  CHECK(eval(parse_expr("0.5*s", {"s"}), {{"s", 4.0}}) == 2.0);
  CHECK(eval(parse_expr("max(s, s^2)", {"s"}), {{"s", 0.5}}) == 0.5);
  CHECK(eval(parse_expr("2^-1 + exp(0) + log(1) + abs(-3)", {}), {}) == doctest::Approx(4.5));
  CHECK(eval(parse_expr("min(3, s, 7) - -2", {"s"}), {{"s", 1.0}}) == 3.0);
  CHECK_THROWS_AS(eval(parse_expr("1/s", {"s"}), {{"s", 0.0}}), DomainError);
  CHECK_THROWS_AS(eval(parse_expr("log(s)", {"s"}), {{"s", -1.0}}), DomainError);
  CHECK_THROWS_AS(eval(parse_expr("s + t", {"s", "t"}), {{"s", 1.0}}), UnboundVariable);
}

TEST_CASE("composition node substitutes the inner expression") {
  const Expr outer = parse_expr("2*s + 1", {"s"});
  const Expr inner = parse_expr("x^2", {"x"});
  const Expr c = Expr::compose(outer, "s", inner);
  CHECK(c.free_variables() == std::set<std::string>{"x"});
  CHECK(eval(c, {{"x", 3.0}}) == 19.0);
  CHECK(eval(parse_expr(c.render(), {"x"}), {{"x", 3.0}}) == 19.0);
}

TEST_CASE("jets give directional derivatives and flag kinks") {
  const Expr v = parse_expr("max(abs(x1), abs(x2))", {"x1", "x2"});
  CompiledExpr c(v, {"x1", "x2"});
  const double x[] = {1.0, 0.2};
  const double d[] = {-1.0, 0.0};
  const Jet j = c.jet(x, d);
  CHECK(j.v == 1.0);
  CHECK(j.d == -1.0);
  CHECK_FALSE(j.kink);

  const double tie[] = {0.5, 0.5};
  const double dir[] = {-1.0, 0.5};
  CHECK(c.jet(tie, dir).kink);

  CompiledExpr sq(parse_expr("x^2", {"x"}), {"x"});
  const double one = 1.0;
  CHECK(sq.jet(std::span<const double>(&one, 1), std::span<const double>(&one, 1)).d == 2.0);
}

TEST_CASE("render then parse preserves evaluation") {
  const std::vector<std::string> vars{"a", "b"};
  const char* sources[] = {
      "-a + 0.25*b - 3/(1 + abs(b))",
      "max(a, b^2, -1e-3) * exp(-a/4) - min(a, 2*b)",
      "log(1 + a^2) / (2 + b^4) ^ 1.5",
      "-(a - -b) * 0.1",
  };
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (const char* src : sources) {
    const Expr e = parse_expr(src, vars);
    const Expr back = parse_expr(e.render(), vars);
    for (int i = 0; i < 100; ++i) {
      const Bindings b{{"a", u(rng)}, {"b", u(rng)}};
      CHECK(eval(back, b) == eval(e, b));
    }
  }
}
