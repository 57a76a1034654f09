#pragma once

#include "sdu/expr.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sdu {

enum class CoefficientForm { constant, time_fn, state_fn };

// A coefficient process restricted to functions of (t, W_t), optionally of
// theta(t, W_t) for the risk-aversion and noise coefficients.
class CoefficientFn {
public:
    CoefficientFn() = default;
    static CoefficientFn constant(double value);
    static CoefficientFn expression(std::string_view source, double bound, VarSet allowed = {});

    double operator()(double t, double w, double theta = 0.0) const noexcept {
        return is_const_ ? value_ : expr_.eval(t, w, theta);
    }

    CoefficientForm form() const noexcept { return form_; }
    bool is_constant() const noexcept { return is_const_; }
    double bound() const noexcept { return bound_; }
    // Expression text; empty for numeric constants.
    const std::string& source() const noexcept { return expr_.source(); }
    double value() const noexcept { return value_; }
    bool uses_theta() const noexcept { return !is_const_ && expr_.uses(Var::theta); }

    friend bool operator==(const CoefficientFn& a, const CoefficientFn& b) noexcept {
        return a.is_const_ == b.is_const_ && a.form_ == b.form_ && a.bound_ == b.bound_ &&
               (a.is_const_ ? a.value_ == b.value_ : a.source() == b.source());
    }

private:
    Expression expr_;
    double value_ = 0.0;
    double bound_ = 0.0;
    bool is_const_ = true;
    CoefficientForm form_ = CoefficientForm::constant;
};

enum class UtilityTag { state_dep_exp, det_exp, power, log, mult_noise };

std::string_view to_string(UtilityTag tag) noexcept;

struct UtilityFamily {
    UtilityTag tag = UtilityTag::state_dep_exp;
    // det_exp / power risk parameter; for mult_noise the base's parameter.
    double gamma = 1.0;
    // mult_noise only.
    UtilityTag base = UtilityTag::det_exp;
    CoefficientFn noise_beta;
    // mult_noise: deterministic k(t) = (theta - beta)^2 when supplied.
    std::optional<CoefficientFn> k;

    friend bool operator==(const UtilityFamily&, const UtilityFamily&) = default;
};

enum class EtaMode {
    given,   // eta is the supplied coefficient
    forward  // eta* = theta(theta + 2 beta) / (2 (gamma V* + 1)), coupled to V*
};

struct TimeGrid {
    double T = 1.0;
    std::size_t n_steps = 1;

    double dt() const noexcept { return T / static_cast<double>(n_steps); }
    double time(std::size_t i) const noexcept { return static_cast<double>(i) * dt(); }
    // Grid index of t; throws DomainError when t is not on the grid.
    std::size_t index_of(double t) const;

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

struct NestedConfig {
    std::size_t n_outer = 50;
    std::size_t n_inner = 2000;
    friend bool operator==(const NestedConfig&, const NestedConfig&) = default;
};

struct ScenarioSpec {
    std::string id = "scenario";
    CoefficientFn mu;
    CoefficientFn sigma;
    double r = 0.0;
    double gamma0 = 1.0;
    CoefficientFn eta;
    EtaMode eta_mode = EtaMode::given;
    CoefficientFn beta;
    UtilityFamily utility;
    double x0 = 1.0;
    double T = 1.0;
    std::size_t steps_per_unit = 512;
    std::size_t n_paths = 100000;
    std::uint64_t seed = 1;
    std::vector<std::pair<double, double>> check_times;
    NestedConfig nested;

    TimeGrid grid() const;

    // Market price of risk, theta = -(mu - r) / sigma.
    double theta(double t, double w) const noexcept { return -(mu(t, w) - r) / sigma(t, w); }

    friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

// Parses the flat key/value JSON document. Nested objects ("market": {"mu": ..})
// are flattened to dotted keys first. Throws ParseError / DomainError.
ScenarioSpec parse_scenario(std::string_view text);
ScenarioSpec load_scenario(const std::string& path);

// Flat-key JSON document with every default written out.
std::string serialize_scenario(const ScenarioSpec& spec);

struct AssumptionWitness {
    std::string what;
    double t = 0.0;
    double w = 0.0;
    double value = 0.0;
};

struct AssumptionReport {
    bool hp_theta_ok = true;
    bool assumption_A_ok = true;
    bool theta_stochastic = false;
    double theta_min_abs = 0.0;
    double theta_max_abs = 0.0;
    std::vector<AssumptionWitness> witnesses;
};

AssumptionReport validate_assumptions(const ScenarioSpec& spec);

// True when theta depends on w at some grid time (probe w in {-1, 0, 1}).
bool theta_is_stochastic(const ScenarioSpec& spec);

} // namespace sdu
