#pragma once

#include "sdu/paths.hpp"
#include "sdu/scenario.hpp"

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace sdu {

enum class Verdict { pass, fail, inconclusive };

std::string_view to_string(Verdict v) noexcept;

struct Statistic {
    std::string label;
    double value = 0.0;
    double band = 0.0;
    double se = 0.0;
    bool within = true;
};

struct CheckReport {
    std::string name;
    std::string scenario;
    Verdict verdict = Verdict::pass;
    std::string reason;
    // Primary statistic and its band (e.g. violations vs allowed violations).
    double statistic = 0.0;
    double band = 0.0;
    std::vector<Statistic> stats;
    std::map<std::string, double> diagnostics;
    std::map<std::string, std::string> notes;
    // Per-path detail table (nested checks: one row per outer path).
    std::vector<std::string> detail_columns;
    std::vector<std::vector<double>> detail;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    double wall_time_ms = 0.0;

    double diag(const std::string& key) const;
};

struct CheckOptions {
    std::string strategy = "auto";
    // Pass quota per route: the 3-sigma binomial allowance of 3 misses in 50
    // for 3-SE bands.
    double quota = 0.94;
    // Inconclusive when the band exceeds this fraction of the effect size.
    double effect_size = 0.04;
    double resolution_fraction = 0.25;
    double drift_tolerance = 1e-10;
    std::vector<double> perturbations{-0.5, -0.25, 0.25, 0.5};
};

// Value consistency E_Q[xi*_t | F_s] = xi*_s checked on nested outer paths by
// two routes: the inner mean of xi*_t (value route) and the exact one-step
// compensator identity (identity route; the H ratio identity for power).
CheckReport check_consistency(const ScenarioSpec& spec, std::pair<double, double> st,
                              const CheckOptions& opts = {});
// Consistency of the multiplicative-noise problem through phi = Z / X.
CheckReport check_noise_consistency(const ScenarioSpec& spec, std::pair<double, double> st,
                                    const CheckOptions& opts = {});
// Pointwise supermartingale drift sign for the candidate and perturbed
// strategies, plus the martingale equality of u_t(V*_t) under P.
CheckReport check_forward_performance(const ScenarioSpec& spec, const CheckOptions& opts = {});

enum class MeasureTag { P, Q };
// E[channel_t] equal to its time-0 value at each time (Z-weighted for Q).
CheckReport check_martingale(const PathBatch& batch, const std::string& channel, MeasureTag measure,
                             const std::vector<double>& times, const std::string& scenario_id = "scenario",
                             const CheckOptions& opts = {});
// Lagrangian-adjusted paired gap between the horizon-t static optimum and the
// forward-family wealth; pass iff the gap exceeds 3 se.
CheckReport check_optimality_gap(const ScenarioSpec& spec, double t, const CheckOptions& opts = {});
// Budget E_Q[xi*_t] = x with constants uncertainty in the band.
CheckReport check_budget(const ScenarioSpec& spec, double t, const CheckOptions& opts = {});

// E_P[Z_t] = 1, E_Q[1/gamma_t] = 1/gamma0 (eta = 0), E_P[u_t(xi*_t)] constant
// and E_Q[xi*_t] = x at T/4, T/2, T and the check times.
std::vector<double> battery_times(const ScenarioSpec& spec);
std::vector<CheckReport> martingale_batteries(const ScenarioSpec& spec, const CheckOptions& opts = {});

// Named dispatch used by the CLI: consistency, noise_consistency, forward,
// martingale, optimality_gap, budget.
std::vector<std::string> default_checks(const ScenarioSpec& spec);
std::vector<CheckReport> run_checks(const ScenarioSpec& spec, const std::vector<std::string>& names,
                                    const CheckOptions& opts = {});

// Runs the check on seeds seed+0 .. seed+n-1.
std::vector<CheckReport> run_seed_matrix(const ScenarioSpec& spec,
                                         const std::function<CheckReport(const ScenarioSpec&)>& check,
                                         std::size_t n_seeds = 5);

// 0 all pass, 4 any fail, 5 any inconclusive (and none failed).
int exit_code_for(const std::vector<CheckReport>& reports) noexcept;

} // namespace sdu
