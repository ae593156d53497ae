#include <catch2/catch_amalgamated.hpp>

#include "adp/expr.hpp"

using namespace adp;
using Catch::Matchers::WithinAbs;

TEST_CASE("expression basics", "[expr]") {
  const Vec x{2.0, -0.5}, u{3.0};
  CHECK(Expression::parse("-1.0*x1", 2, 1).eval(x, u) == -2.0);
  CHECK(Expression::parse("x1 + u1", 2, 1).eval(x, u) == 5.0);
  CHECK(Expression::parse("x1^2 + u1^2", 2, 1).eval(x, u) == 13.0);
  CHECK_THAT(Expression::parse("x2/x1", 2, 1).eval(x, u), WithinAbs(-0.25, 1e-15));
}

TEST_CASE("expression precedence and unary minus", "[expr]") {
  const Vec x{3.0}, u;
  CHECK(Expression::parse("2+3*4^2", 1, 0).eval(x, u) == 50.0);
  CHECK(Expression::parse("-x1^2", 1, 0).eval(x, u) == -9.0);
  CHECK(Expression::parse("(2+3)*4", 1, 0).eval(x, u) == 20.0);
  CHECK(Expression::parse("2^3^1", 1, 0).eval(x, u) == 8.0);
  CHECK(Expression::parse("1 - -x1", 1, 0).eval(x, u) == 4.0);
}

TEST_CASE("expression functions", "[expr]") {
  const Vec x{0.3, -0.7}, u{0.2};
  const double expect = std::sin(0.3) + std::cos(-0.7) * std::tanh(0.2) - std::abs(-0.7);
  CHECK_THAT(Expression::parse("sin(x1)+cos(x2)*tanh(u1)-abs(x2)", 2, 1).eval(x, u),
             WithinAbs(expect, 1e-15));
}

TEST_CASE("expression number formats", "[expr]") {
  const Vec x, u;
  CHECK_THAT(Expression::parse("1e-3 + .5", 0, 0).eval(x, u), WithinAbs(0.5010, 1e-12));
}

TEST_CASE("expression errors", "[expr]") {
  CHECK_THROWS_AS(Expression::parse("x3", 2, 1), config_error);
  CHECK_THROWS_AS(Expression::parse("u2", 2, 1), config_error);
  CHECK_THROWS_AS(Expression::parse("sin(", 1, 0), config_error);
  CHECK_THROWS_AS(Expression::parse("x1 $ x1", 1, 0), config_error);
  CHECK_THROWS_AS(Expression::parse("foo(x1)", 1, 0), config_error);
  CHECK_THROWS_AS(Expression::parse("x1 + ", 1, 0), config_error);
  CHECK_THROWS_AS(Expression::parse("(x1", 1, 0), config_error);
}
