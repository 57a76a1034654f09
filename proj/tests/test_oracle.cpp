#include "sdu/errors.hpp"
#include "sdu/oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace sdu;

TEST_CASE("uniform density gives the flat optimum") {
    const FiniteMarket m = FiniteMarket::make({0.5, 0.5}, {0.5, 0.5}, 0.7);
    for (const OracleUtility& u : {OracleUtility::exponential(3.0), OracleUtility::power(0.5), OracleUtility::log()}) {
        const LagrangianSolution s = solve_lagrangian(m, u);
        CHECK(s.xi[0] == doctest::Approx(0.7).epsilon(1e-12));
        CHECK(s.xi[1] == doctest::Approx(0.7).epsilon(1e-12));
        const BruteForceResult b = brute_force(m, u);
        CHECK(std::abs(b.xi[0] - 0.7) < 1e-6);
    }
}

TEST_CASE("two-state exponential example") {
    const FiniteMarket m = FiniteMarket::make({0.5, 0.5}, {0.75, 0.25}, 0.0);
    const LagrangianSolution s = solve_lagrangian(m, OracleUtility::exponential(1.0));
    const double elq = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
    CHECK(s.xi[0] == doctest::Approx(elq - std::log(1.5)).epsilon(1e-12));
    CHECK(s.xi[1] == doctest::Approx(elq - std::log(0.5)).epsilon(1e-12));
    CHECK(s.xi[0] == doctest::Approx(-0.274653).epsilon(1e-6));
    CHECK(s.xi[1] == doctest::Approx(0.823959).epsilon(1e-6));
    CHECK(std::abs(s.residual) < 1e-10);
    const BruteForceResult b = brute_force(m, OracleUtility::exponential(1.0));
    CHECK(std::abs(b.xi[0] - s.xi[0]) < 1e-4);
    CHECK(std::abs(b.xi[1] - s.xi[1]) < 1e-4);
}

TEST_CASE("two-state power example") {
    const FiniteMarket m = FiniteMarket::make({0.5, 0.5}, {0.75, 0.25}, 1.0);
    const LagrangianSolution s = solve_lagrangian(m, OracleUtility::power(0.5));
    const double h = 0.75 * std::pow(1.5, -2.0) + 0.25 * std::pow(0.5, -2.0);
    CHECK(s.xi[0] == doctest::Approx(std::pow(1.5, -2.0) / h).epsilon(1e-12));
    CHECK(s.xi[1] == doctest::Approx(std::pow(0.5, -2.0) / h).epsilon(1e-12));
    CHECK(0.75 * s.xi[0] + 0.25 * s.xi[1] == doctest::Approx(1.0).epsilon(1e-12));
    const auto cf = closed_form_power(m, 0.5, 1.0);
    CHECK(std::abs(cf[0] - s.xi[0]) < 1e-10);
}

TEST_CASE("closed form exponential: budget, scale covariance") {
    const FiniteMarket m = FiniteMarket::make({0.2, 0.3, 0.5}, {0.4, 0.4, 0.2}, 0.3);
    const auto a = closed_form_exponential(m, 2.0, 0.3);
    CHECK(std::abs(budget_residual(m, a)) < 1e-12);
    const auto b = closed_form_exponential(m, 2.0, 1.3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(b[i] - a[i] == doctest::Approx(1.0).epsilon(1e-12));
    const auto s = solve_lagrangian(m, OracleUtility::exponential(2.0));
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(s.xi[i] - a[i]) < 1e-10);
}

TEST_CASE("uniqueness probe: feasible perturbations decrease expected utility") {
    const FiniteMarket m = FiniteMarket::make({0.1, 0.2, 0.3, 0.4}, {0.25, 0.25, 0.3, 0.2}, 0.5);
    const OracleUtility u = OracleUtility::exponential(1.5);
    const LagrangianSolution s = solve_lagrangian(m, u);
    const double best = expected_utility(m, u, s.xi);
    std::mt19937_64 g(3);
    std::normal_distribution<double> n;
    for (int k = 0; k < 50; ++k) {
        std::vector<double> d(4);
        double qd = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            d[i] = n(g);
            qd += m.q[i] * d[i];
        }
        d[3] = -qd / m.q[3];
        double norm = 0;
        for (double x : d) norm += x * x;
        norm = std::sqrt(norm);
        std::vector<double> xi = s.xi;
        for (std::size_t i = 0; i < 4; ++i) xi[i] += 1e-3 * d[i] / norm;
        CHECK(expected_utility(m, u, xi) < best);
    }
}

TEST_CASE("state-dependent gamma closed form") {
    const FiniteMarket m = FiniteMarket::make({0.25, 0.25, 0.5}, {0.5, 0.3, 0.2}, 0.4);
    const std::vector<double> g{0.5, 1.0, 2.5};
    const auto s = solve_lagrangian(m, OracleUtility::state_exponential(g));
    const auto cf = closed_form_state_exponential(m, g, 0.4);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(s.xi[i] - cf[i]) < 1e-10);
}

TEST_CASE("invalid markets and utilities") {
    CHECK_THROWS_AS(FiniteMarket::make({0.5, 0.6}, {0.5, 0.5}, 0), DomainError);
    CHECK_THROWS_AS(FiniteMarket::make({1.0, 0.0}, {0.5, 0.5}, 0), DomainError);
    CHECK_THROWS_AS(FiniteMarket::make({1.0}, {0.5, 0.5}, 0), DomainError);
    const FiniteMarket m = FiniteMarket::make({0.5, 0.5}, {0.75, 0.25}, 1.0);
    CHECK_THROWS_AS(solve_lagrangian(m, OracleUtility::power(1.5)), DomainError);
    CHECK_THROWS_AS(solve_lagrangian(m, OracleUtility::exponential(-1.0)), DomainError);
    // Log utility cannot finance a non-positive budget.
    const FiniteMarket neg = FiniteMarket::make({0.5, 0.5}, {0.75, 0.25}, -1.0);
    CHECK_THROWS_AS(solve_lagrangian(neg, OracleUtility::log()), Error);
}

TEST_CASE("market JSON") {
    const FiniteMarket m = parse_market(R"({"p": [0.5, 0.5], "q": [0.75, 0.25], "x0": 0})");
    CHECK(m.size() == 2);
    CHECK(m.density(0) == doctest::Approx(1.5));
    CHECK_THROWS_AS(parse_market(R"({"p": [0.5, 0.5]})"), ParseError);
    CHECK_THROWS_AS(parse_market(R"({"p": [0.5, 0.5], "q": [0.5, 0.5], "y": 1})"), ParseError);
    CHECK_THROWS_AS(parse_market("[1, 2"), ParseError);
}
