#pragma once

#include "sdu/checks.hpp"
#include "sdu/oracle.hpp"
#include "sdu/report.hpp"

#include <string>
#include <vector>

namespace sdu {

// Maps an exception to the process exit code: 2 scenario or usage error,
// 3 numerical abort.
int exit_code_for_exception(const std::exception& e) noexcept;

struct CommandResult {
    int exit_code = 0;
    std::string json;  // what the command prints / writes as its main document
};

// Channel dump (first 100 paths, every step) and summary with the martingale
// batteries. Writes channels.csv and summary.json into m.out_dir when set.
CommandResult cmd_simulate(const ScenarioSpec& spec, const RunManifest& m);
// Writes report.json and <check>_detail.csv files into m.out_dir when set.
CommandResult cmd_check(const ScenarioSpec& spec, const std::vector<std::string>& names, const CheckOptions& opts,
                        const RunManifest& m);
CommandResult cmd_oracle(const FiniteMarket& market, const OracleUtility& u, const RunManifest& m);

struct ConvergenceRow {
    double dt = 0.0;
    std::size_t n_steps = 0;
    double rms = 0.0;
    double rms_se = 0.0;
};

struct ConvergenceTable {
    std::string strategy;
    std::vector<ConvergenceRow> rows;  // coarsest first
    bool fitted = false;
    double order = 0.0;
    bool monotone = false;
};

// Terminal replication error |V_T - xi*_T| per step size, all levels driven by
// one fine Brownian path per sample. strategy: "auto" (the profile's hedge) or
// "zero".
ConvergenceTable run_convergence(const ScenarioSpec& spec, const std::vector<double>& ladder,
                                 const std::string& strategy = "auto");
void write_convergence_csv(const ConvergenceTable& t, std::ostream& out);
CommandResult cmd_convergence(const ScenarioSpec& spec, const std::vector<double>& ladder,
                              const std::string& strategy, const RunManifest& m);

} // namespace sdu
