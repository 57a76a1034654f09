#include "scenarios.hpp"

#include "sdu/errors.hpp"
#include "sdu/runner.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

using namespace sdu;
namespace fs = std::filesystem;

namespace {

std::string strip_volatile(const std::string& s) {
    static const std::regex ts(R"j("timestamp": "[^"]*")j"), wt(R"j("wall_time_ms": [0-9.e+-]+)j");
    return std::regex_replace(std::regex_replace(s, ts, "\"timestamp\": \"\""), wt, "\"wall_time_ms\": 0");
}

ScenarioSpec small(ScenarioSpec s, std::size_t n = 4000) {
    s.steps_per_unit = 64;
    s.n_paths = n;
    s.nested = {10, 400};
    return s;
}

} // namespace

TEST_CASE("convergence ladder validation") {
    const ScenarioSpec s = small(fixtures::theorem());
    CHECK_THROWS_AS(run_convergence(s, {1.0 / 64}), DomainError);
    CHECK_THROWS_AS(run_convergence(s, {1.0 / 8, 1.0 / 12, 1.0 / 16}), DomainError);
    CHECK_THROWS_AS(run_convergence(s, {1.0 / 8, 1.0 / 16, 1.0 / 32}, "other"), DomainError);
}

TEST_CASE("zero-exposure strategy reports |x - xi*| without a fit") {
    const ScenarioSpec s = small(fixtures::theorem(), 2000);
    const ConvergenceTable t = run_convergence(s, {1.0 / 8, 1.0 / 16, 1.0 / 32}, "zero");
    CHECK_FALSE(t.fitted);
    REQUIRE(t.rows.size() == 3);
    for (const auto& r : t.rows) CHECK(r.rms > 0.05);
    std::ostringstream os;
    write_convergence_csv(t, os);
    CHECK(os.str().rfind("dt,n_steps,rms_error,rms_se,fitted_order\n", 0) == 0);
}

TEST_CASE("hedge error falls with the step size") {
    const ScenarioSpec s = small(fixtures::theorem(), 3000);
    const ConvergenceTable t = run_convergence(s, {1.0 / 16, 1.0 / 64, 1.0 / 256});
    CHECK(t.fitted);
    CHECK(t.monotone);
    CHECK(t.order > 0.3);
    CHECK(t.order < 0.7);
}

TEST_CASE("check command writes byte-stable reports") {
    const fs::path dir = fs::temp_directory_path() / "sdu_runner_test";
    fs::remove_all(dir);
    const ScenarioSpec s = small(fixtures::theorem());
    const RunManifest m = RunManifest::now("inline", "check", dir.string());
    const CommandResult a = cmd_check(s, {"consistency", "budget"}, {}, m);
    const CommandResult b = cmd_check(s, {"consistency", "budget"}, {}, RunManifest::now("inline", "check", ""));
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "consistency_detail.csv"));
    CHECK(strip_volatile(a.json).size() > 100);
    std::string a2 = strip_volatile(a.json), b2 = strip_volatile(b.json);
    a2 = std::regex_replace(a2, std::regex(R"j("out_dir": "[^"]*")j"), "");
    b2 = std::regex_replace(b2, std::regex(R"j("out_dir": "[^"]*")j"), "");
    CHECK(a2 == b2);
    fs::remove_all(dir);
}

TEST_CASE("simulate command writes channels and summary") {
    const fs::path dir = fs::temp_directory_path() / "sdu_sim_test";
    fs::remove_all(dir);
    const ScenarioSpec s = small(fixtures::theorem(), 3000);
    const CommandResult r = cmd_simulate(s, RunManifest::now("inline", "simulate", dir.string()));
    CHECK(r.exit_code != 4);
    CHECK(r.exit_code != 3);
    CHECK(fs::exists(dir / "channels.csv"));
    CHECK(fs::exists(dir / "summary.json"));
    std::ifstream f(dir / "channels.csv");
    std::string header;
    std::getline(f, header);
    CHECK(header.find("xi_star") != std::string::npos);
    CHECK(header.find("u_xi_star") != std::string::npos);
    CHECK(r.json.find("martingale_Z_P") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("exception mapping") {
    CHECK(exit_code_for_exception(ParseError("k", 1, "x")) == 2);
    CHECK(exit_code_for_exception(DomainError("x")) == 2);
    CHECK(exit_code_for_exception(RegimeError("x")) == 2);
    CHECK(exit_code_for_exception(NumericalAbort(1, 2, "x")) == 3);
}
