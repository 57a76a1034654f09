#pragma once

#include "sdu/paths.hpp"
#include "sdu/scenario.hpp"

#include <functional>
#include <string>
#include <vector>

namespace sdu {

enum class EstimateMethod { plain, z_weighted, nested, regression };

std::string_view to_string(EstimateMethod m) noexcept;

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
    EstimateMethod method = EstimateMethod::plain;
};

// Sample mean with se = stdev / sqrt(n). Throws EstimatorError for n < 2 or
// non-finite input.
Estimate mc_mean(const std::vector<double>& values);
// E_Q[X] = E_P[Z X]; weights must be strictly positive.
Estimate q_expectation(const std::vector<double>& values, const std::vector<double>& weights);

// Per-outer-path conditional Q-expectation.
struct ConditionalEstimate {
    std::vector<double> mean;
    std::vector<double> se;
    EstimateMethod method = EstimateMethod::nested;
    std::size_t n_inner = 0;
    // Regression diagnostics.
    std::vector<std::string> basis;
    double r2 = 0.0;
    double residual_sd = 0.0;
};

enum StateField : unsigned {
    field_w = 1u,
    field_logz = 2u,
    field_gamma = 4u,
    field_v = 8u,
    field_x = 16u,
    field_s = 32u,
};

// Outer states at grid step `step`, with the mask of fields that carry data.
struct OuterStates {
    std::size_t step = 0;
    std::vector<PathState> states;
    unsigned available = field_w | field_logz | field_gamma | field_v;
};

OuterStates outer_states(const PathBatch& batch, std::size_t step);

// Inner-path recipe: terminal(state_t) + sum over steps of running(state_i).
struct InnerTarget {
    std::string name;
    unsigned needs = field_w | field_logz;
    std::function<double(const PathState&)> terminal;
    std::function<double(const PathState&, const Coeffs&, double)> running;
    // When set the inner value is exp(sum of running) instead of the sum.
    bool exponentiate = false;
};

struct NestedOptions {
    std::size_t n_inner = 2000;
    std::uint64_t seed = 1;
    std::uint64_t kind = 0;  // separates inner stream families
    std::uint64_t salt = 0;  // separates checks
    Measure measure = Measure::Q();
    const StrategyRule* rule = nullptr;  // wealth dynamics inside inner paths
};

// Spawns n_inner sub-paths from each outer state at step s, simulated under
// the requested measure with its own Brownian as primitive noise, and returns
// the inner mean and se of every target at step t. Throws EstimatorError when
// a target needs state not carried by the outer batch.
std::vector<ConditionalEstimate> conditional_q_expectation_nested(const ScenarioSpec& spec,
                                                                  const OuterStates& outer, std::size_t t_step,
                                                                  const std::vector<InnerTarget>& targets,
                                                                  const NestedOptions& opts);

// Least-squares projection of target_t * Z_t / Z_s on the cubic basis in
// (ln Z_s, ln(1/gamma_s)) without cross terms. Columns that are constant on
// the sample are dropped; a rank-deficient design throws EstimatorError.
ConditionalEstimate conditional_q_expectation_regression(const PathBatch& outer, std::size_t s_step,
                                                         std::size_t t_step, const std::vector<double>& target);
ConditionalEstimate conditional_q_expectation_regression(const PathBatch& outer, std::size_t s_step,
                                                         std::size_t t_step, const std::string& target_channel);

} // namespace sdu
