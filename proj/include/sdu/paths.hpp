#pragma once

#include "sdu/rng.hpp"
#include "sdu/scenario.hpp"

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace sdu {

// Integrated state of one path at one grid time. All exponential processes
// are kept in log space; wealth V is in level space.
struct PathState {
    double w = 0.0;      // W_t
    double log_z = 0.0;  // ln Z_t
    double log_s = 0.0;  // ln S_t, S_0 = 1
    double log_g = 0.0;  // ln(1/gamma_t)
    double v = 0.0;      // discounted wealth
    double log_x = 0.0;  // ln X_t (multiplicative noise)
};

// Coefficients evaluated at the left endpoint of a step.
struct Coeffs {
    double t = 0.0;
    double mu = 0.0;
    double sigma = 1.0;
    double theta = 0.0;
    double eta = 0.0;
    double beta = 0.0;
    double beta_x = 0.0;  // noise volatility; 0 unless mult_noise
};

enum class MeasureKind { P, Q, Q0 };

// Measure driving a simulation. Under P the primitive noise is dW; under Q it
// is dW^Q, so dW = dW^Q + theta dt. Q0 additionally tilts dW^Q by
// tilt * (theta - beta_x) dt (power-utility auxiliary measure).
struct Measure {
    MeasureKind kind = MeasureKind::P;
    double tilt = 0.0;

    static Measure P() { return {MeasureKind::P, 0.0}; }
    static Measure Q() { return {MeasureKind::Q, 0.0}; }
    static Measure Q0(double tilt) { return {MeasureKind::Q0, tilt}; }
};

struct StepContext {
    std::size_t step;
    double dt;
    const PathState& state;
    const Coeffs& c;

    double g() const noexcept;      // 1/gamma_t
    double gamma() const noexcept;  // gamma_t
};

// Strategy as monetary exposure e = sigma alpha V, or as a proportion alpha.
class StrategyRule {
public:
    enum class Kind { exposure, proportion };
    using Fn = std::function<double(const StepContext&)>;

    StrategyRule() = default;
    static StrategyRule zero();
    static StrategyRule exposure_rule(std::string name, Fn fn);
    static StrategyRule proportion_rule(std::string name, Fn fn);

    double exposure(const StepContext& ctx) const;
    Kind kind() const noexcept { return kind_; }
    const std::string& name() const noexcept { return name_; }
    bool is_zero() const noexcept { return !fn_; }

private:
    Kind kind_ = Kind::exposure;
    std::string name_ = "zero";
    Fn fn_;
};

// Step kernel shared by the staged and fused simulators.
class Dynamics {
public:
    Dynamics(const ScenarioSpec& spec, TimeGrid grid);

    const ScenarioSpec& spec() const noexcept { return *spec_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    double dt() const noexcept { return dt_; }
    bool has_noise() const noexcept { return noise_; }
    bool forward_eta() const noexcept { return spec_->eta_mode == EtaMode::forward; }

    PathState initial_state() const noexcept;

    // Throws NumericalAbort when the forward-eta denominator gamma V + 1 is
    // numerically zero.
    Coeffs coeffs(std::size_t step, const PathState& s, std::size_t path = 0) const;

    // dW for a standard normal draw under the given measure.
    double increment(double normal, const Coeffs& c, const Measure& m) const noexcept {
        double drift = 0.0;
        if (m.kind == MeasureKind::Q) drift = c.theta;
        else if (m.kind == MeasureKind::Q0) drift = c.theta + m.tilt * (c.theta - c.beta_x);
        return normal * sqrt_dt_ + drift * dt_;
    }

    struct StepResult {
        double exposure;
        double dwq;
    };

    // Advances s from grid step i to i+1 by the Brownian increment dw.
    // Throws NumericalAbort on any non-finite state value.
    StepResult advance(std::size_t step, PathState& s, const Coeffs& c, double dw, const StrategyRule* rule,
                       std::size_t path = 0) const;

private:
    const ScenarioSpec* spec_;
    TimeGrid grid_;
    double dt_;
    double sqrt_dt_;
    bool noise_;
};

// Paths on a common grid. States are kept for the recorded grid steps only;
// a batch with every step recorded is "full". Named channels share the
// n_paths x n_records shape and are stored path-major.
class PathBatch {
public:
    PathBatch() = default;
    PathBatch(TimeGrid grid, std::size_t n_paths, std::vector<std::size_t> steps = {});

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t n_paths() const noexcept { return n_paths_; }
    const std::vector<std::size_t>& steps() const noexcept { return steps_; }
    std::size_t n_records() const noexcept { return steps_.size(); }
    bool full() const noexcept { return steps_.size() == grid_.n_steps + 1; }
    // Record index of a grid step; throws Error if the step was not recorded.
    std::size_t record_of(std::size_t step) const;
    std::size_t record_of_time(double t) const { return record_of(grid_.index_of(t)); }

    PathState& state(std::size_t path, std::size_t k) { return states_[path * steps_.size() + k]; }
    const PathState& state(std::size_t path, std::size_t k) const { return states_[path * steps_.size() + k]; }

    bool has(const std::string& name) const { return channels_.count(name) != 0; }
    std::vector<double>& channel(const std::string& name);
    const std::vector<double>& channel(const std::string& name) const;
    double& at(const std::string& name, std::size_t path, std::size_t k) {
        return channel(name)[path * steps_.size() + k];
    }
    double at(const std::string& name, std::size_t path, std::size_t k) const {
        return channel(name)[path * steps_.size() + k];
    }
    std::vector<double> column(const std::string& name, std::size_t k) const;
    std::vector<std::string> channel_names() const;

    // Fills the derived level channels (W, logZ, S, gamma_inv, V, X) from states.
    void sync_state_channels(bool with_noise);

    bool has_noise = false;
    std::uint64_t seed = 0;

private:
    TimeGrid grid_;
    std::size_t n_paths_ = 0;
    std::vector<std::size_t> steps_;
    std::vector<std::size_t> index_;  // grid step -> record, npos if absent
    std::vector<PathState> states_;
    std::map<std::string, std::vector<double>> channels_;
};

struct SimRequest {
    std::size_t n_paths = 1;
    std::uint64_t seed = 1;
    std::uint64_t stream = streams::outer;
    Measure measure = Measure::P();
    const StrategyRule* rule = nullptr;
    std::vector<std::size_t> record_steps;  // empty: every step
    bool record_increments = false;         // dW and dWQ channels
};

// Fused simulation of every primitive process in one pass over the grid.
// Bit-identical to running the staged operations below on a full batch.
PathBatch simulate_paths(const ScenarioSpec& spec, const TimeGrid& grid, const SimRequest& req);

// Staged operations on full batches.
PathBatch simulate_brownian(const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                            std::uint64_t stream = streams::outer);
void simulate_market(const ScenarioSpec& spec, PathBatch& batch);
void simulate_risk_aversion(const ScenarioSpec& spec, PathBatch& batch);
void simulate_wealth(const StrategyRule& rule, const ScenarioSpec& spec, PathBatch& batch, double x0);

// Runs n paths from a common starting state between two grid steps, calling
// obs.before(path, i, state, coeffs) ahead of every step and
// obs.finish(path, state) at the end.
template <class Observer>
void simulate_from(const Dynamics& dyn, const PathState& start, std::size_t from, std::size_t to, std::size_t n,
                   const NormalSource& rng, const Measure& m, const StrategyRule* rule, Observer& obs) {
    for (std::size_t p = 0; p < n; ++p) {
        PathState s = start;
        for (std::size_t i = from; i < to; ++i) {
            const Coeffs c = dyn.coeffs(i, s, p);
            obs.before(p, i, s, c);
            (void)dyn.advance(i, s, c, dyn.increment(rng(p, i), c, m), rule, p);
        }
        obs.finish(p, s);
    }
}

// CSV dump: "path,step,t,<channel>..." one row per (path, recorded step).
void write_channels_csv(const PathBatch& batch, std::ostream& out, std::size_t max_paths = 100,
                        const std::vector<std::string>& channels = {});

std::string format_double(double v);

} // namespace sdu
