#include "sdu/errors.hpp"
#include "sdu/expr.hpp"

#include <doctest.h>

#include <cmath>

using sdu::Expression;
using sdu::Var;

TEST_CASE("expression arithmetic and precedence") {
    CHECK(Expression::compile("1 + 2*3").eval(0, 0) == doctest::Approx(7.0));
    CHECK(Expression::compile("(1 + 2)*3").eval(0, 0) == doctest::Approx(9.0));
    CHECK(Expression::compile("-2*-3").eval(0, 0) == doctest::Approx(6.0));
    CHECK(Expression::compile("8/4/2").eval(0, 0) == doctest::Approx(1.0));
    CHECK(Expression::compile("1e-2 + 0.5").eval(0, 0) == doctest::Approx(0.51));
}

TEST_CASE("expression variables and functions") {
    const Expression e = Expression::compile("0.01 + 0.2*(0.2 + 0.1*tanh(w))");
    CHECK(e.eval(0.0, 0.0) == doctest::Approx(0.05));
    CHECK(e.eval(0.3, 1.0) == doctest::Approx(0.01 + 0.2 * (0.2 + 0.1 * std::tanh(1.0))));
    CHECK(e.uses(Var::w));
    CHECK_FALSE(e.uses(Var::t));
    CHECK(Expression::compile("exp(t) + sin(w)").eval(1.0, 2.0) == doctest::Approx(std::exp(1.0) + std::sin(2.0)));
    CHECK(Expression::compile("min(t, w)").eval(1.0, 2.0) == doctest::Approx(1.0));
    CHECK(Expression::compile("max(t, w)").eval(1.0, 2.0) == doctest::Approx(2.0));
    CHECK(Expression::compile("clamp(w, -1, 1)").eval(0.0, 3.0) == doctest::Approx(1.0));
    CHECK(Expression::compile("2.5").is_constant());
}

TEST_CASE("theta is only available where allowed") {
    CHECK_THROWS_AS(Expression::compile("-theta/2"), sdu::ParseError);
    const Expression e = Expression::compile("-theta/2", {true, true, true});
    CHECK(e.eval(0, 0, -0.4) == doctest::Approx(0.2));
    CHECK(e.uses(Var::theta));
}

TEST_CASE("malformed expressions are rejected") {
    CHECK_THROWS_AS(Expression::compile("1 +"), sdu::ParseError);
    CHECK_THROWS_AS(Expression::compile("foo(w)"), sdu::ParseError);
    CHECK_THROWS_AS(Expression::compile("(1 + 2"), sdu::ParseError);
    CHECK_THROWS_AS(Expression::compile("x"), sdu::ParseError);
    CHECK_THROWS_AS(Expression::compile("w", {true, false, false}), sdu::ParseError);
}
