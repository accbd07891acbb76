#include <cmath>
#include <string>

#include "catch_amalgamated.hpp"
#include "lininf/expression.hpp"

using namespace lininf;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Expression v(const char* n) { return Expression::variable(n); }
Expression c(double x) { return Expression::constant(x); }
Expression bin(Op op, Expression l, Expression r) { return Expression::binary(op, std::move(l), std::move(r)); }

}  // namespace

TEST_CASE("ratio of a product parses to the expected tree", "[expression]") {
  const Expression e = parse_expression("p1 * p2 / (1 - p2)");
  const Expression want = bin(Op::divide, bin(Op::multiply, v("p1"), v("p2")), bin(Op::subtract, c(1), v("p2")));
  CHECK(e == want);
  CHECK(e.size() == 7);
  CHECK(variables(e) == std::vector<std::string>{"p1", "p2"});
}

TEST_CASE("precedence and associativity", "[expression]") {
  CHECK(parse_expression("a - b - c") == bin(Op::subtract, bin(Op::subtract, v("a"), v("b")), v("c")));
  CHECK(parse_expression("a / b * c") == bin(Op::multiply, bin(Op::divide, v("a"), v("b")), v("c")));
  CHECK(parse_expression("a + b * c") == bin(Op::add, v("a"), bin(Op::multiply, v("b"), v("c"))));
  // ^ binds tighter than unary minus.
  CHECK(parse_expression("-a^2") == Expression::unary(Op::negate, Expression::power(v("a"), 2)));
  CHECK(parse_expression("-2^2") == Expression::unary(Op::negate, Expression::power(c(2), 2)));
  CHECK(parse_expression("-2 * a") == bin(Op::multiply, c(-2), v("a")));
  CHECK(parse_expression("a^-0.5") == Expression::power(v("a"), -0.5));
  CHECK(parse_expression("a^(-1)") == Expression::power(v("a"), -1));
  CHECK(parse_expression("exp(ln(x))") == Expression::unary(Op::exp, Expression::unary(Op::ln, v("x"))));
}

TEST_CASE("syntax errors carry a column", "[expression]") {
  CHECK_THROWS_WITH(parse_expression("a + "), ContainsSubstring("column"));
  CHECK_THROWS_AS(parse_expression("(a + b"), SchemaError);
  CHECK_THROWS_AS(parse_expression("a ^ b"), SchemaError);
  CHECK_THROWS_AS(parse_expression("a b"), SchemaError);
  CHECK_THROWS_AS(parse_expression("1..2"), SchemaError);
}

TEST_CASE("printing round-trips through the parser", "[expression]") {
  const char* inputs[] = {"p1 * p2 / (1 - p2)", "a - (b - c)", "-(a + b) * c", "a^2 * b^-1.5",
                          "exp(a / 3) - ln(b + 1e-3)", "-(-a)", "a / (b * c)", "(-2)^2", "0.1 + 2 * -3"};
  for (const char* in : inputs) {
    CAPTURE(in);
    const Expression e = parse_expression(in);
    const std::string printed = to_string(e);
    CAPTURE(printed);
    CHECK(parse_expression(printed) == e);
  }
  CHECK(to_string(parse_expression("p1 * p2 / (1 - p2)")) == "p1 * p2 / (1 - p2)");
}

TEST_CASE("evaluation", "[expression]") {
  const Environment env{{"a", 2.0}, {"b", 3.0}};
  CHECK(eval_expr(parse_expression("a * b - a / 4"), env) == 5.5);
  CHECK_THAT(eval_expr(parse_expression("exp(ln(a)) + a^-1"), env), WithinAbs(2.5, 1e-15));
  CHECK(eval_expr(parse_expression("(-a)^3"), env) == -8.0);
}

TEST_CASE("evaluation errors name the failing subexpression", "[expression]") {
  const Environment env{{"a", 0.0}, {"b", -1.0}};
  CHECK_THROWS_AS(eval_expr(parse_expression("1 / a"), env), EvaluationError);
  CHECK_THROWS_WITH(eval_expr(parse_expression("2 + ln(b)"), env), ContainsSubstring("ln(b)"));
  CHECK_THROWS_AS(eval_expr(parse_expression("a^-1"), env), EvaluationError);
  CHECK_THROWS_AS(eval_expr(parse_expression("b^0.5"), env), EvaluationError);
  CHECK_THROWS_AS(eval_expr(parse_expression("exp(1000)"), env), EvaluationError);
  CHECK_THROWS_AS(eval_expr(parse_expression("c"), env), EvaluationError);
}

TEST_CASE("compiled evaluation agrees with the tree walker", "[expression]") {
  const Expression e = parse_expression("p1 * p2 / (1 - p2) + exp(-p1) * p2^2 - ln(p1 + 1)");
  const std::map<std::string, std::size_t> slot{{"p1", 0}, {"p2", 1}};
  const CompiledExpression f(e, [&](const std::string& n) { return slot.at(n); });
  for (double p1 : {0.1, 0.5, 2.0}) {
    for (double p2 : {0.2, 0.7}) {
      CHECK_THAT(f({p1, p2}), WithinRel(eval_expr(e, {{"p1", p1}, {"p2", p2}}), 1e-15));
    }
  }
}

TEST_CASE("symbolic derivatives match central differences", "[expression]") {
  const char* inputs[] = {"a * b / (1 - b)", "exp(a * b) - ln(a + b)", "a^3 * b^-0.5", "-(a - b)^2 / a",
                          "a + 2 * b - 7"};
  const Environment at{{"a", 0.7}, {"b", 0.3}};
  for (const char* in : inputs) {
    const Expression e = parse_expression(in);
    for (const char* wrt : {"a", "b"}) {
      CAPTURE(in, wrt);
      const double h = 1e-6;
      Environment up = at, down = at;
      up[wrt] += h;
      down[wrt] -= h;
      const double fd = (eval_expr(e, up) - eval_expr(e, down)) / (2.0 * h);
      CHECK_THAT(eval_expr(diff_expr(e, wrt), at), WithinRel(fd, 1e-7) || WithinAbs(fd, 1e-9));
    }
  }
  CHECK(diff_expr(parse_expression("a + 2 * b - 7"), "a").is_constant(1.0));
  CHECK(diff_expr(parse_expression("a * a"), "c").is_constant(0.0));
}

TEST_CASE("builders fold constants and drop identities", "[expression]") {
  using namespace build;
  CHECK(add(num(2), num(3)).is_constant(5.0));
  CHECK(mul(num(1), var("x")) == var("x"));
  CHECK(mul(num(0), var("x")).is_constant(0.0));
  CHECK(add(var("x"), num(0)) == var("x"));
  CHECK(pow(var("x"), 1.0) == var("x"));
  CHECK(depends_on(var("x") * var("y"), "y"));
  CHECK_FALSE(depends_on(var("x") * num(2), "y"));
}
