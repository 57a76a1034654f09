#include "scenarios.hpp"

#include "sdu/errors.hpp"
#include "sdu/estimators.hpp"
#include "sdu/parallel.hpp"
#include "sdu/paths.hpp"
#include "sdu/rng.hpp"
#include "sdu/strategies.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace sdu;

TEST_CASE("Philox4x32-10 known-answer vectors") {
    using B = Philox4x32::Block;
    CHECK(Philox4x32(0)(B{0, 0, 0, 0}) == B{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox4x32(0xffffffffffffffffull)(B{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}) ==
          B{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox4x32(0x299f31d0a4093822ull)(B{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}) ==
          B{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("normal source moments and stream separation") {
    const NormalSource a(1, streams::outer), b(1, streams::constants);
    double s = 0, s2 = 0, cross = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = a(static_cast<std::uint64_t>(i), 3);
        s += x;
        s2 += x * x;
        cross += x * b(static_cast<std::uint64_t>(i), 3);
    }
    CHECK(std::abs(s / n) < 4.0 / std::sqrt(double(n)));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.01));
    CHECK(std::abs(cross / n) < 4.0 / std::sqrt(double(n)));
    CHECK(a(5, 7) == NormalSource(1, streams::outer)(5, 7));
    CHECK(inner_stream(1, 2, 3) != inner_stream(1, 2, 4));
    CHECK((inner_stream(1, 2, 3) >> 63) == 1u);
}

TEST_CASE("log density is exact for constant theta") {
    const ScenarioSpec spec = fixtures::det_exp(false, 3, 50);
    SimRequest req;
    req.n_paths = 50;
    const PathBatch b = simulate_paths(spec, spec.grid(), req);
    const double th = -0.2;
    for (std::size_t p = 0; p < 50; ++p) {
        const PathState& s = b.state(p, spec.grid().n_steps);
        CHECK(s.log_z == doctest::Approx(-0.5 * th * th + th * s.w).epsilon(1e-12));
        CHECK(s.log_s == doctest::Approx(0.05 - 0.02 + 0.2 * s.w).epsilon(1e-12));
    }
}

TEST_CASE("staged and fused simulation are bit-identical") {
    ScenarioSpec spec = fixtures::theorem(9, 300);
    spec.steps_per_unit = 64;
    const StrategyRule rule = forward_optimal_rule();
    SimRequest req;
    req.n_paths = 300;
    req.seed = 9;
    req.rule = &rule;
    req.record_increments = true;
    const PathBatch fused = simulate_paths(spec, spec.grid(), req);

    PathBatch staged = simulate_brownian(spec.grid(), 300, 9);
    simulate_market(spec, staged);
    simulate_risk_aversion(spec, staged);
    simulate_wealth(rule, spec, staged, spec.x0);
    for (const char* ch : {"W", "dW", "logZ", "S", "gamma_inv", "V", "exposure", "dWQ"}) {
        INFO(ch);
        CHECK(fused.channel(ch) == staged.channel(ch));
    }
}

TEST_CASE("simulation is independent of the worker count") {
    ScenarioSpec spec = fixtures::theorem(2, 3000);
    spec.steps_per_unit = 32;
    SimRequest req;
    req.n_paths = 3000;
    req.seed = 2;
    const unsigned before = worker_count();
    set_worker_count(1);
    const PathBatch a = simulate_paths(spec, spec.grid(), req);
    set_worker_count(4);
    const PathBatch b = simulate_paths(spec, spec.grid(), req);
    set_worker_count(before);
    CHECK(a.channel("logZ") == b.channel("logZ"));
    CHECK(a.channel("gamma_inv") == b.channel("gamma_inv"));
}

TEST_CASE("checkpoint batches match full batches at recorded steps") {
    ScenarioSpec spec = fixtures::theorem(4, 200);
    spec.steps_per_unit = 64;
    SimRequest req;
    req.n_paths = 200;
    req.seed = 4;
    const PathBatch full = simulate_paths(spec, spec.grid(), req);
    req.record_steps = {0, 32, 64};
    const PathBatch cp = simulate_paths(spec, spec.grid(), req);
    REQUIRE(cp.n_records() == 3);
    for (std::size_t p = 0; p < 200; ++p) {
        CHECK(cp.state(p, 1).log_z == full.state(p, 32).log_z);
        CHECK(cp.state(p, 2).log_g == full.state(p, 64).log_g);
    }
    CHECK_THROWS_AS((void)cp.record_of(5), Error);
}

TEST_CASE("Z is a P-martingale; W drifts by theta under Q") {
    ScenarioSpec spec = fixtures::det_exp(false, 1, 50000);
    spec.steps_per_unit = 16;
    SimRequest req;
    req.n_paths = 50000;
    req.record_steps = {16};
    const PathBatch p = simulate_paths(spec, spec.grid(), req);
    std::vector<double> z(50000), w(50000);
    for (std::size_t i = 0; i < 50000; ++i) z[i] = std::exp(p.state(i, 0).log_z);
    const Estimate ez = mc_mean(z);
    CHECK(std::abs(ez.mean - 1.0) < 4 * ez.se);
    req.measure = Measure::Q();
    const PathBatch q = simulate_paths(spec, spec.grid(), req);
    for (std::size_t i = 0; i < 50000; ++i) w[i] = q.state(i, 0).w;
    const Estimate ew = mc_mean(w);
    CHECK(std::abs(ew.mean - (-0.2)) < 4 * ew.se);
}

TEST_CASE("forward eta aborts on a singular denominator") {
    ScenarioSpec spec = fixtures::forward_beta("0.1", 1, 10);
    spec.x0 = -1.0;  // gamma0 V + 1 = 0 at the first step
    SimRequest req;
    req.n_paths = 10;
    const StrategyRule rule = forward_optimal_rule();
    req.rule = &rule;
    try {
        (void)simulate_paths(spec, spec.grid(), req);
        FAIL("expected NumericalAbort");
    } catch (const NumericalAbort& e) {
        CHECK(e.step() == 0);
        CHECK(std::string(e.what()).find("path") != std::string::npos);
    }
}

TEST_CASE("channel csv layout") {
    ScenarioSpec spec = fixtures::theorem(1, 3);
    spec.steps_per_unit = 2;
    SimRequest req;
    req.n_paths = 3;
    const PathBatch b = simulate_paths(spec, spec.grid(), req);
    std::ostringstream os;
    write_channels_csv(b, os, 2, {"W", "logZ"});
    const std::string s = os.str();
    CHECK(s.rfind("path,step,t,W,logZ\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 1 + 2 * 3);
}
