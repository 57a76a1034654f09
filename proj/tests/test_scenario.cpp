#include <cmath>
#include "scenarios.hpp"

#include "sdu/errors.hpp"

#include <doctest.h>

#include <string>

using namespace sdu;

TEST_CASE("market price of risk carries the leading minus") {
    const ScenarioSpec s = fixtures::det_exp(false);
    CHECK(s.theta(0.0, 0.0) == doctest::Approx(-0.2));
    const ScenarioSpec t = fixtures::theorem();
    CHECK(t.theta(0.0, 0.0) == doctest::Approx(-0.2));
    CHECK(t.theta(0.0, 10.0) == doctest::Approx(-(0.2 + 0.1 * std::tanh(10.0))));
}

TEST_CASE("parse reads nested sections and defaults") {
    const ScenarioSpec s = fixtures::theorem(7, 1234);
    CHECK(s.id == "consistent_pair");
    CHECK(s.seed == 7);
    CHECK(s.n_paths == 1234);
    CHECK(s.grid().n_steps == 512);
    CHECK(s.check_times.size() == 1);
    CHECK(s.beta(0.0, 1.0, -0.3) == doctest::Approx(0.15));
    CHECK(s.nested.n_outer == 50);
    CHECK(s.nested.n_inner == 2000);
    const ScenarioSpec d = parse_scenario(R"j({"market": {"mu": 0.05, "sigma": 0.2, "r": 0.01}})j");
    REQUIRE(d.check_times.size() == 1);
    CHECK(d.check_times[0].first == doctest::Approx(0.5));
    CHECK(d.check_times[0].second == doctest::Approx(1.0));
}

TEST_CASE("serialize round trip") {
    for (const ScenarioSpec& s : {fixtures::theorem(), fixtures::noise(R"j({"expr": "theta - 0.1", "bound": 1.0})j"),
                                  fixtures::power(true), fixtures::forward_beta("0.1")}) {
        const ScenarioSpec back = parse_scenario(serialize_scenario(s));
        CHECK(back == s);
    }
}

TEST_CASE("unknown keys and bad types are parse errors with the key") {
    try {
        parse_scenario("{\n  \"market\": {\"mu\": 0.05, \"sigma\": 0.2},\n  \"bogus\": 1\n}");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.key() == "bogus");
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_scenario(R"j({"market": {"mu": "abc", "sigma": 0.2}})j"), ParseError);
    CHECK_THROWS_AS(parse_scenario("{not json"), ParseError);
}

TEST_CASE("domain violations") {
    CHECK_THROWS_AS(parse_scenario(R"j({"market": {"mu": 0.05, "sigma": -0.2, "r": 0.01}})j"), DomainError);
    CHECK_THROWS_AS(parse_scenario(R"j({"market": {"mu": 0.05, "sigma": 0.2, "r": 0.01}, "sim": {"T": 0}})j"), DomainError);
    CHECK_THROWS_AS(parse_scenario(R"j({"market": {"mu": 0.05, "sigma": 0.2, "r": 0.01}, "checks": {"pairs": [[0.7, 0.3]]}})j"),
                    DomainError);
    CHECK_THROWS_AS(
        parse_scenario(R"j({"market": {"mu": 0.05, "sigma": 0.2, "r": 0.01}, "checks": {"pairs": [[0.50001, 1.0]]}})j"),
        DomainError);
    CHECK_THROWS_AS(parse_scenario(R"j({"market": {"mu": 0.05, "sigma": 0.2, "r": 0.01}, "utility": {"family": "power",
                                     "params": {"gamma": 1.5}}})j"),
                    DomainError);
}

TEST_CASE("assumption validation") {
    const AssumptionReport a = validate_assumptions(fixtures::theorem());
    CHECK(a.hp_theta_ok);
    CHECK(a.assumption_A_ok);
    CHECK(a.theta_stochastic);
    CHECK(a.theta_min_abs >= 0.1);
    CHECK(a.theta_max_abs <= 0.3 + 1e-12);
    CHECK_FALSE(validate_assumptions(fixtures::det_exp(false)).theta_stochastic);
    CHECK_FALSE(theta_is_stochastic(fixtures::det_exp(false)));
    CHECK(theta_is_stochastic(fixtures::det_exp(true)));

    ScenarioSpec bad = fixtures::theorem();
    bad.mu = CoefficientFn::expression("0.01 + 5*w", 0.3);
    const AssumptionReport b = validate_assumptions(bad);
    CHECK_FALSE(b.hp_theta_ok);
    CHECK_FALSE(b.witnesses.empty());
}
