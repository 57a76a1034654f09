#include "scenarios.hpp"

#include "sdu/errors.hpp"
#include "sdu/estimators.hpp"
#include "sdu/strategies.hpp"

#include <doctest.h>

#include <cmath>

using namespace sdu;

TEST_CASE("consistent pair detection") {
    CHECK(is_consistent_pair(fixtures::theorem()));
    CHECK_FALSE(is_consistent_pair(fixtures::beta_zero()));
    CHECK(WealthModel::for_spec(fixtures::theorem()).kind() == ModelKind::consistent_exp);
    CHECK(WealthModel::for_spec(fixtures::beta_zero()).kind() == ModelKind::general_exp);
    CHECK(WealthModel::for_spec(fixtures::det_exp(true)).kind() == ModelKind::merton_exp);
    CHECK(WealthModel::for_spec(fixtures::power(false)).kind() == ModelKind::power);
    CHECK(WealthModel::for_spec(fixtures::noise("0.0")).kind() == ModelKind::noise_exp);
    CHECK_THROWS_AS(WealthModel::for_spec(fixtures::theorem(), "nonsense"), Error);
}

TEST_CASE("consistent profile starts at x and is a Q-martingale in the regime") {
    const ScenarioSpec spec = fixtures::theorem(1, 10);
    const WealthModel m = WealthModel::for_spec(spec);
    PathState s0;
    s0.log_g = -std::log(spec.gamma0);
    CHECK(m.value(0, s0) == doctest::Approx(spec.x0));
    Coeffs c;
    c.theta = -0.25;
    c.beta = 0.125;
    CHECK(std::abs(m.step_drift(512, s0, c, 1.0 / 512)) < 1e-18);
    ScenarioSpec bz = fixtures::beta_zero(1, 4);
    bz.steps_per_unit = 4;
    SimRequest req;
    req.n_paths = 4;
    PathBatch b = simulate_paths(bz, bz.grid(), req);
    CHECK_THROWS_AS(consistent_optimal_wealth(bz, b), RegimeError);
}

TEST_CASE("general constants reduce to gamma0 x on the consistent pair") {
    ScenarioSpec spec = fixtures::theorem(1, 40000);
    spec.steps_per_unit = 64;
    WealthModel m = WealthModel::for_spec(spec, "general");
    m.estimate_constants(spec, {32, 64}, spec.n_paths, spec.seed);
    CHECK(std::abs(m.constants().at(64).value - spec.gamma0 * spec.x0) < 4 * m.constants().at(64).se);
    CHECK(m.constants().at(64).c == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("Merton and power constants against closed forms for constant theta") {
    ScenarioSpec spec = fixtures::det_exp(false, 1, 50000);
    spec.steps_per_unit = 32;
    WealthModel m = WealthModel::for_spec(spec);
    m.estimate_constants(spec, {32}, spec.n_paths, spec.seed);
    // E_Q[ln Z_T] = theta^2 T / 2.
    CHECK(std::abs(m.constants().at(32).value - 0.02) < 4 * m.constants().at(32).se);

    ScenarioSpec ps = fixtures::power(false, 1, 50000);
    ps.steps_per_unit = 32;
    WealthModel pm = WealthModel::for_spec(ps);
    CHECK(pm.power_beta() == doctest::Approx(-2.0));
    pm.estimate_constants(ps, {32}, ps.n_paths, ps.seed);
    // H_T = exp(theta^2 T b (b + 1) / 2) = exp(0.04).
    CHECK(std::abs(pm.constants().at(32).value - std::exp(0.04)) < 4 * pm.constants().at(32).se);
}

TEST_CASE("noise k and regime errors") {
    CHECK(noise_k(fixtures::noise(R"j({"expr": "theta - 0.1", "bound": 1.0})j"), 0.3) == doctest::Approx(0.01));
    CHECK(noise_k(fixtures::noise(R"j({"expr": "theta", "bound": 1.0})j"), 0.3) == doctest::Approx(0.0));
    CHECK_THROWS_AS(noise_k(fixtures::noise("0.0"), 0.3), RegimeError);
}

TEST_CASE("forward candidate exposure and consistent hedge formulas") {
    PathState s;
    s.v = 2.0;
    s.log_g = std::log(0.5);
    Coeffs c;
    c.theta = -0.2;
    c.beta = 0.1;
    c.sigma = 0.2;
    const StepContext ctx{0, 0.01, s, c};
    CHECK(forward_optimal_rule().exposure(ctx) == doctest::Approx(2.0 * 0.1 + 0.2 * 0.5));
    const ScenarioSpec spec = fixtures::theorem();
    s.log_z = 0.3;
    // -(theta/2) xi - theta / gamma with xi = g (gamma0 x - ln Z).
    const double xi = 0.5 * (1.0 - 0.3);
    CHECK(consistent_exposure_rule(spec).exposure(ctx) == doctest::Approx(0.1 * xi + 0.2 * 0.5));
    CHECK(noise_exposure_rule(fixtures::noise("0.0")).exposure(ctx) == doctest::Approx(0.2));
}

TEST_CASE("consistent hedge replicates the profile") {
    ScenarioSpec spec = fixtures::theorem(5, 2000);
    spec.steps_per_unit = 256;
    const StrategyRule rule = consistent_exposure_rule(spec);
    SimRequest req;
    req.n_paths = 2000;
    req.seed = 5;
    req.rule = &rule;
    req.record_steps = {256};
    const PathBatch b = simulate_paths(spec, spec.grid(), req);
    const WealthModel m = WealthModel::for_spec(spec);
    double sq = 0;
    for (std::size_t p = 0; p < 2000; ++p) {
        const double e = b.state(p, 0).v - m.value(256, b.state(p, 0));
        sq += e * e;
    }
    CHECK(std::sqrt(sq / 2000) < 0.01);
}

TEST_CASE("channel constructors on a full batch") {
    ScenarioSpec spec = fixtures::theorem(1, 20);
    spec.steps_per_unit = 16;
    SimRequest req;
    req.n_paths = 20;
    req.record_increments = true;
    PathBatch b = simulate_paths(spec, spec.grid(), req);
    consistent_optimal_wealth(spec, b);
    consistent_optimal_exposure(spec, b);
    CHECK(b.at("xi_star", 0, 0) == doctest::Approx(1.0));
    CHECK(b.has("alpha"));
    forward_family_simulate(spec, b);
    // On the consistent pair the forward family coincides with the consistent hedge's wealth dynamics.
    CHECK(b.at("V_star", 3, 0) == doctest::Approx(1.0));
    CHECK(b.at("eta_star", 3, 5) == doctest::Approx(0.0));
}
