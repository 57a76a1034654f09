#pragma once

#include "sdu/paths.hpp"
#include "sdu/scenario.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace sdu {

enum class ModelKind { consistent_exp, general_exp, merton_exp, power, log, noise_exp, noise_power };

std::string_view to_string(ModelKind kind) noexcept;

// One estimated scalar per horizon: k_h (general exponential), E_Q[ln Z_h]
// (Merton), E_Q[ln phi_h] (noise), or H_h (power). The influence vector holds
// the per-path linearisation on the constants batch, so the standard error
// of any smooth function of several horizons' constants follows by the delta
// method with cross-horizon covariance included.
struct HorizonConstant {
    std::size_t step = 0;
    double value = 0.0;
    double se = 0.0;
    double c = 0.0;  // general exponential: c_h = 1 / E_Q[1/gamma_h]
    std::vector<double> influence;
};

struct DerivedConstants {
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    std::map<std::size_t, HorizonConstant> by_step;

    bool empty() const noexcept { return by_step.empty(); }
    const HorizonConstant& at(std::size_t step) const;
    // se of sum_h grad[h] * constant_h.
    double linear_se(const std::map<std::size_t, double>& grad) const;
};

// Closed-form optimal wealth profile xi*_h(state) for one utility family.
// For a horizon h the profile evaluated at the state at time h is the
// static optimum for that horizon.
class WealthModel {
public:
    // "auto" picks consistent_exp for state_dep_exp under the consistent pair,
    // general_exp otherwise; explicit names select a constructor directly.
    static WealthModel for_spec(const ScenarioSpec& spec, std::string_view strategy = "auto");

    ModelKind kind() const noexcept { return kind_; }
    std::string name() const { return std::string(to_string(kind_)); }
    bool needs_constants() const noexcept;

    // Estimates the horizon constants on an independent P-batch (constants
    // stream). Influence vectors are kept only for `keep_influence` steps.
    void estimate_constants(const ScenarioSpec& spec, const std::vector<std::size_t>& steps,
                            std::size_t n_paths, std::uint64_t seed,
                            const std::vector<std::size_t>& keep_influence = {});
    void set_constants(DerivedConstants c) { constants_ = std::move(c); }
    const DerivedConstants& constants() const noexcept { return constants_; }

    double value(std::size_t horizon, const PathState& s) const;
    // Derivative of value with respect to the horizon's estimated constant.
    double dvalue(std::size_t horizon, const PathState& s) const;

    // Identity route. Compensator form: exact one-step conditional Q-mean of
    // value(h, next) - value(h, s). Power form: E_Q0[exp(sum rate dt) | F_s]
    // equals H_t / H_s.
    bool exp_identity() const noexcept { return kind_ == ModelKind::power || kind_ == ModelKind::noise_power; }
    double step_drift(std::size_t horizon, const PathState& s, const Coeffs& c, double dt) const;
    double exp_rate(const Coeffs& c) const noexcept;
    Measure identity_measure() const noexcept;

    // Open-loop hedge of the horizon-h profile: exposure from the diffusion
    // coefficient of value(h, state) under Q.
    StrategyRule replication_rule(std::size_t horizon) const;

    double x() const noexcept { return x_; }
    double gamma() const noexcept { return gamma_; }
    double power_beta() const noexcept { return pbeta_; }

private:
    double constant(std::size_t horizon) const;
    void estimate_group(const PathBatch& b, const std::vector<std::size_t>& steps,
                        const std::vector<std::size_t>& keep_influence);
    double log_phi(const PathState& s) const noexcept { return s.log_z - s.log_x; }

    ModelKind kind_ = ModelKind::consistent_exp;
    double x_ = 1.0;
    double gamma0_ = 1.0;
    double gamma_ = 1.0;
    double pbeta_ = 0.0;  // -1/(1-gamma) for power bases
    DerivedConstants constants_;
};

// True when eta == 0 and beta == -theta/2 on the assumption sampling grid.
bool is_consistent_pair(const ScenarioSpec& spec);

// Forward-family candidate exposure e = V beta - theta / gamma.
StrategyRule forward_optimal_rule();
// Theorem-regime hedge e = -(theta/2) xi* - theta / gamma with xi* from the state.
StrategyRule consistent_exposure_rule(const ScenarioSpec& spec);
// Multiplicative-noise optimum exposure -(theta - beta_x) / gamma.
StrategyRule noise_exposure_rule(const ScenarioSpec& spec);

// Channel constructors. Each writes xi_star (or the named channel) at every
// recorded step, using constants estimated on an independent batch when the
// family needs them; the constants used are returned.
void consistent_optimal_wealth(const ScenarioSpec& spec, PathBatch& batch);
void consistent_optimal_exposure(const ScenarioSpec& spec, PathBatch& batch);
DerivedConstants merton_exponential_wealth(const ScenarioSpec& spec, PathBatch& batch);
DerivedConstants power_optimal_wealth(const ScenarioSpec& spec, PathBatch& batch);
// Channel "xi_star_h": the horizon-h profile at every recorded state; equal to
// the horizon-h static optimum at the record of h.
DerivedConstants general_exp_optimal_wealth(const ScenarioSpec& spec, PathBatch& batch, double horizon);
DerivedConstants noise_optimal_wealth(const ScenarioSpec& spec, PathBatch& batch);
// Integrates (1/gamma, V*) jointly on a full batch with forward eta; writes
// gamma_inv, V_star, alpha_star, eta_star.
void forward_family_simulate(const ScenarioSpec& spec, PathBatch& batch);
// Writes exposure and alpha for the multiplicative-noise optimum; checks
// (theta - beta)^2 against k(t) (or its w-independence when k is not given).
void noise_strategy(const ScenarioSpec& spec, PathBatch& batch);

// Deterministic k(t) = (theta - beta_x)^2 if the consistency condition holds;
// throws RegimeError with a witness otherwise.
double noise_k(const ScenarioSpec& spec, double t);

ScenarioSpec forward_variant(const ScenarioSpec& spec);

} // namespace sdu
