#include "sdu/strategies.hpp"

#include "sdu/errors.hpp"
#include "sdu/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdu {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSampleW[] = {-3.0, -1.0, 0.0, 1.0, 3.0};

double sample_sd(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

void require_state_channels(const PathBatch& b, bool gamma) {
    if (!b.has("logZ")) throw Error("batch has no logZ channel; simulate the market first");
    if (gamma && !b.has("gamma_inv")) throw Error("batch has no gamma_inv channel; simulate risk aversion first");
}

} // namespace

std::string_view to_string(ModelKind kind) noexcept {
    switch (kind) {
    case ModelKind::consistent_exp: return "consistent_exp";
    case ModelKind::general_exp: return "general_exp";
    case ModelKind::merton_exp: return "merton_exp";
    case ModelKind::power: return "power";
    case ModelKind::log: return "log";
    case ModelKind::noise_exp: return "noise_exp";
    case ModelKind::noise_power: return "noise_power";
    }
    return "?";
}

const HorizonConstant& DerivedConstants::at(std::size_t step) const {
    const auto it = by_step.find(step);
    if (it == by_step.end()) throw Error("no derived constant estimated for grid step " + std::to_string(step));
    return it->second;
}

double DerivedConstants::linear_se(const std::map<std::size_t, double>& grad) const {
    bool have_all = true;
    for (const auto& [step, g] : grad)
        if (g != 0.0 && at(step).influence.empty()) have_all = false;
    if (!have_all) {
        double s = 0.0;
        for (const auto& [step, g] : grad) s += std::abs(g) * at(step).se;
        return s;
    }
    std::vector<double> comb(n_paths, 0.0);
    for (const auto& [step, g] : grad) {
        if (g == 0.0) continue;
        const auto& psi = at(step).influence;
        for (std::size_t i = 0; i < n_paths; ++i) comb[i] += g * psi[i];
    }
    if (n_paths < 2) return 0.0;
    return sample_sd(comb, mean_of(comb)) / std::sqrt(static_cast<double>(n_paths));
}

bool is_consistent_pair(const ScenarioSpec& spec) {
    if (spec.eta_mode != EtaMode::given) return false;
    const TimeGrid g = spec.grid();
    for (std::size_t i = 0; i <= g.n_steps; ++i) {
        const double t = g.time(i);
        for (double w : kSampleW) {
            const double th = spec.theta(t, w);
            if (std::abs(spec.eta(t, w, th)) > 1e-14) return false;
            if (std::abs(spec.beta(t, w, th) + 0.5 * th) > 1e-12 * (1.0 + std::abs(th))) return false;
        }
    }
    return true;
}

double noise_k(const ScenarioSpec& spec, double t) {
    const auto kappa2 = [&](double w) {
        const double th = spec.theta(t, w);
        const double d = th - spec.utility.noise_beta(t, w, th);
        return d * d;
    };
    const double ref = spec.utility.k ? (*spec.utility.k)(t, 0.0) : kappa2(0.0);
    for (double w : kSampleW) {
        const double k2 = kappa2(w);
        if (std::abs(k2 - ref) > 1e-10)
            throw RegimeError("consistency condition (theta - beta)^2 = k(t) fails at t = " + std::to_string(t) +
                              ", w = " + std::to_string(w) + ": " + std::to_string(k2) + " vs " +
                              std::to_string(ref));
    }
    return ref;
}

ScenarioSpec forward_variant(const ScenarioSpec& spec) {
    ScenarioSpec f = spec;
    f.eta_mode = EtaMode::forward;
    f.eta = CoefficientFn::constant(0.0);
    return f;
}

WealthModel WealthModel::for_spec(const ScenarioSpec& spec, std::string_view strategy) {
    WealthModel m;
    m.x_ = spec.x0;
    m.gamma0_ = spec.gamma0;
    m.gamma_ = spec.utility.gamma;
    const UtilityTag tag = spec.utility.tag;
    const auto require = [&](bool ok, const char* what) {
        if (!ok) throw RegimeError(std::string("strategy '") + std::string(strategy) + "' " + what);
    };
    if (strategy == "auto" || strategy.empty()) {
        switch (tag) {
        case UtilityTag::state_dep_exp:
            m.kind_ = is_consistent_pair(spec) ? ModelKind::consistent_exp : ModelKind::general_exp;
            break;
        case UtilityTag::det_exp: m.kind_ = ModelKind::merton_exp; break;
        case UtilityTag::power: m.kind_ = ModelKind::power; break;
        case UtilityTag::log: m.kind_ = ModelKind::log; break;
        case UtilityTag::mult_noise:
            m.kind_ = spec.utility.base == UtilityTag::power ? ModelKind::noise_power : ModelKind::noise_exp;
            break;
        }
    } else if (strategy == "consistent" || strategy == "consistent_exp") {
        require(tag == UtilityTag::state_dep_exp, "needs the state_dep_exp family");
        require(is_consistent_pair(spec), "needs eta = 0 and beta = -theta/2");
        m.kind_ = ModelKind::consistent_exp;
    } else if (strategy == "general" || strategy == "general_exp") {
        require(tag == UtilityTag::state_dep_exp, "needs the state_dep_exp family");
        m.kind_ = ModelKind::general_exp;
    } else if (strategy == "merton" || strategy == "merton_exp") {
        require(tag == UtilityTag::det_exp, "needs the det_exp family");
        m.kind_ = ModelKind::merton_exp;
    } else if (strategy == "power") {
        require(tag == UtilityTag::power, "needs the power family");
        m.kind_ = ModelKind::power;
    } else if (strategy == "log") {
        require(tag == UtilityTag::log, "needs the log family");
        m.kind_ = ModelKind::log;
    } else if (strategy == "noise" || strategy == "noise_exp" || strategy == "noise_power") {
        require(tag == UtilityTag::mult_noise, "needs the mult_noise family");
        m.kind_ = spec.utility.base == UtilityTag::power ? ModelKind::noise_power : ModelKind::noise_exp;
    } else {
        throw DomainError("unknown strategy '" + std::string(strategy) + "'");
    }
    if (m.kind_ == ModelKind::power || m.kind_ == ModelKind::noise_power) {
        if (!(m.x_ > 0.0)) throw DomainError("power utility needs x > 0");
        m.pbeta_ = -1.0 / (1.0 - m.gamma_);
    }
    if (m.kind_ == ModelKind::log && !(m.x_ > 0.0)) throw DomainError("log utility needs x > 0");
    return m;
}

bool WealthModel::needs_constants() const noexcept {
    return kind_ != ModelKind::consistent_exp && kind_ != ModelKind::log;
}

void WealthModel::estimate_constants(const ScenarioSpec& spec, const std::vector<std::size_t>& steps_in,
                                     std::size_t n_paths, std::uint64_t seed,
                                     const std::vector<std::size_t>& keep_influence) {
    constants_ = {};
    constants_.n_paths = n_paths;
    constants_.seed = seed;
    if (!needs_constants()) return;
    if (n_paths < 2) throw EstimatorError("constants need at least 2 paths");
    std::vector<std::size_t> steps = steps_in;
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    if (steps.empty()) return;

    const StrategyRule fwd = forward_optimal_rule();
    SimRequest req;
    req.n_paths = n_paths;
    req.seed = seed;
    req.stream = streams::constants;
    req.rule = spec.eta_mode == EtaMode::forward ? &fwd : nullptr;
    // Steps are simulated in groups so the checkpoint batch stays near 200 MB;
    // every group replays the same constants stream.
    const std::size_t group =
        std::max<std::size_t>(1, static_cast<std::size_t>(2e8 / (sizeof(PathState) * static_cast<double>(n_paths))));
    for (std::size_t g0 = 0; g0 < steps.size(); g0 += group) {
        req.record_steps.assign(steps.begin() + g0, steps.begin() + std::min(steps.size(), g0 + group));
        const PathBatch b = simulate_paths(spec, spec.grid(), req);
        estimate_group(b, req.record_steps, keep_influence);
    }
}

void WealthModel::estimate_group(const PathBatch& b, const std::vector<std::size_t>& steps,
                                 const std::vector<std::size_t>& keep_influence) {
    const std::size_t n_paths = b.n_paths();
    const double n = static_cast<double>(n_paths);
    for (std::size_t k = 0; k < steps.size(); ++k) {
        HorizonConstant hc;
        hc.step = steps[k];
        std::vector<double> psi(n_paths);
        if (kind_ == ModelKind::general_exp) {
            std::vector<double> ya(n_paths), yb(n_paths);
            for (std::size_t p = 0; p < n_paths; ++p) {
                const PathState& s = b.state(p, k);
                const double zg = std::exp(s.log_z + s.log_g);
                ya[p] = zg;
                yb[p] = zg * s.log_z;
            }
            const double A = mean_of(ya), B = mean_of(yb);
            hc.c = 1.0 / A;
            hc.value = (x_ + B) / A;
            for (std::size_t p = 0; p < n_paths; ++p) psi[p] = (yb[p] - hc.value * ya[p] + x_) / A;
        } else {
            std::vector<double> y(n_paths);
            for (std::size_t p = 0; p < n_paths; ++p) {
                const PathState& s = b.state(p, k);
                const double z = std::exp(s.log_z);
                switch (kind_) {
                case ModelKind::merton_exp: y[p] = z * s.log_z; break;
                case ModelKind::noise_exp: y[p] = z * log_phi(s); break;
                case ModelKind::power: y[p] = std::exp((pbeta_ + 1.0) * s.log_z); break;
                case ModelKind::noise_power: y[p] = z * std::exp(pbeta_ * log_phi(s)); break;
                default: y[p] = 0.0; break;
                }
            }
            hc.value = mean_of(y);
            for (std::size_t p = 0; p < n_paths; ++p) psi[p] = y[p] - hc.value;
        }
        hc.se = sample_sd(psi, 0.0) / std::sqrt(n);
        if (std::find(keep_influence.begin(), keep_influence.end(), hc.step) != keep_influence.end())
            hc.influence = std::move(psi);
        constants_.by_step[hc.step] = std::move(hc);
    }
}

double WealthModel::constant(std::size_t horizon) const {
    if (!needs_constants()) return 0.0;
    if (horizon == 0) {
        // Time-0 constants are known exactly.
        switch (kind_) {
        case ModelKind::general_exp: return x_ * gamma0_;
        case ModelKind::power:
        case ModelKind::noise_power: return 1.0;
        default: return 0.0;
        }
    }
    return constants_.at(horizon).value;
}

double WealthModel::value(std::size_t h, const PathState& s) const {
    switch (kind_) {
    case ModelKind::consistent_exp: return std::exp(s.log_g) * (gamma0_ * x_ - s.log_z);
    case ModelKind::general_exp: return std::exp(s.log_g) * (constant(h) - s.log_z);
    case ModelKind::merton_exp: return x_ + (constant(h) - s.log_z) / gamma_;
    case ModelKind::noise_exp: return x_ + (constant(h) - log_phi(s)) / gamma_;
    case ModelKind::power: return x_ * std::exp(pbeta_ * s.log_z) / constant(h);
    case ModelKind::noise_power: return x_ * std::exp(pbeta_ * log_phi(s)) / constant(h);
    case ModelKind::log: return x_ * std::exp(-s.log_z);
    }
    return 0.0;
}

double WealthModel::dvalue(std::size_t h, const PathState& s) const {
    if (h == 0) return 0.0;
    switch (kind_) {
    case ModelKind::general_exp: return std::exp(s.log_g);
    case ModelKind::merton_exp:
    case ModelKind::noise_exp: return 1.0 / gamma_;
    case ModelKind::power:
    case ModelKind::noise_power: return -value(h, s) / constant(h);
    default: return 0.0;
    }
}

double WealthModel::step_drift(std::size_t h, const PathState& s, const Coeffs& c, double dt) const {
    switch (kind_) {
    case ModelKind::consistent_exp:
    case ModelKind::general_exp: {
        // E_Q[g'(k - ln Z')] - g(k - ln Z) for the log-Euler step.
        const double k = kind_ == ModelKind::consistent_exp ? gamma0_ * x_ : constant(h);
        const double g = std::exp(s.log_g);
        const double a = c.eta * dt;
        return g * (std::expm1(a) * (k - s.log_z) - std::exp(a) * (0.5 * c.theta * c.theta + c.theta * c.beta) * dt);
    }
    case ModelKind::merton_exp: return -0.5 * c.theta * c.theta * dt / gamma_;
    case ModelKind::noise_exp: {
        const double kap = c.theta - c.beta_x;
        return -0.5 * kap * kap * dt / gamma_;
    }
    case ModelKind::log: return 0.0;
    case ModelKind::power:
    case ModelKind::noise_power: break;
    }
    throw RegimeError("power profiles use the exponential identity, not a compensator");
}

double WealthModel::exp_rate(const Coeffs& c) const noexcept {
    const double kap = kind_ == ModelKind::noise_power ? c.theta - c.beta_x : c.theta;
    return 0.5 * gamma_ * pbeta_ * pbeta_ * kap * kap;
}

Measure WealthModel::identity_measure() const noexcept {
    return exp_identity() ? Measure::Q0(pbeta_) : Measure::Q();
}

StrategyRule WealthModel::replication_rule(std::size_t h) const {
    const WealthModel self = *this;
    switch (kind_) {
    case ModelKind::consistent_exp:
        return StrategyRule::exposure_rule("consistent_hedge", [self, h](const StepContext& ctx) {
            return -0.5 * ctx.c.theta * self.value(h, ctx.state) - ctx.c.theta * ctx.g();
        });
    case ModelKind::general_exp:
        return StrategyRule::exposure_rule("general_hedge", [self, h](const StepContext& ctx) {
            return ctx.c.beta * self.value(h, ctx.state) - ctx.c.theta * ctx.g();
        });
    case ModelKind::merton_exp:
        return StrategyRule::exposure_rule("merton_hedge",
                                           [g = gamma_](const StepContext& ctx) { return -ctx.c.theta / g; });
    case ModelKind::noise_exp:
        return StrategyRule::exposure_rule(
            "noise_hedge", [g = gamma_](const StepContext& ctx) { return -(ctx.c.theta - ctx.c.beta_x) / g; });
    case ModelKind::power:
        return StrategyRule::exposure_rule("power_hedge", [self, h](const StepContext& ctx) {
            return self.pbeta_ * ctx.c.theta * self.value(h, ctx.state);
        });
    case ModelKind::noise_power:
        return StrategyRule::exposure_rule("noise_power_hedge", [self, h](const StepContext& ctx) {
            return self.pbeta_ * (ctx.c.theta - ctx.c.beta_x) * self.value(h, ctx.state);
        });
    case ModelKind::log:
        return StrategyRule::exposure_rule("log_hedge", [self, h](const StepContext& ctx) {
            return -ctx.c.theta * self.value(h, ctx.state);
        });
    }
    return StrategyRule::zero();
}

StrategyRule forward_optimal_rule() {
    return StrategyRule::exposure_rule("forward_optimal", [](const StepContext& ctx) {
        return ctx.state.v * ctx.c.beta - ctx.c.theta * ctx.g();
    });
}

StrategyRule consistent_exposure_rule(const ScenarioSpec& spec) {
    const double k = spec.gamma0 * spec.x0;
    return StrategyRule::exposure_rule("consistent_hedge", [k](const StepContext& ctx) {
        const double g = ctx.g();
        return -0.5 * ctx.c.theta * g * (k - ctx.state.log_z) - ctx.c.theta * g;
    });
}

StrategyRule noise_exposure_rule(const ScenarioSpec& spec) {
    const double gamma = spec.utility.gamma;
    return StrategyRule::exposure_rule("noise_optimal", [gamma](const StepContext& ctx) {
        return -(ctx.c.theta - ctx.c.beta_x) / gamma;
    });
}

namespace {

void fill_profile(const WealthModel& m, PathBatch& b, const std::string& name, std::optional<std::size_t> fixed) {
    auto& ch = b.channel(name);
    const std::size_t nrec = b.n_records();
    for (std::size_t p = 0; p < b.n_paths(); ++p)
        for (std::size_t k = 0; k < nrec; ++k)
            ch[p * nrec + k] = m.value(fixed ? *fixed : b.steps()[k], b.state(p, k));
}

std::vector<std::size_t> positive_steps(const PathBatch& b) {
    std::vector<std::size_t> s;
    for (std::size_t step : b.steps())
        if (step > 0) s.push_back(step);
    return s;
}

DerivedConstants build_profile(const ScenarioSpec& spec, PathBatch& batch, const char* strategy,
                               const std::string& channel, std::optional<std::size_t> fixed) {
    WealthModel m = WealthModel::for_spec(spec, strategy);
    const std::vector<std::size_t> steps = fixed ? std::vector<std::size_t>{*fixed} : positive_steps(batch);
    m.estimate_constants(spec, steps, spec.n_paths, spec.seed);
    fill_profile(m, batch, channel, fixed);
    return m.constants();
}

void fill_alpha(PathBatch& b, const std::string& exposure, const std::string& wealth, const std::string& out) {
    const auto& e = b.channel(exposure);
    const auto& v = b.channel(wealth);
    auto& a = b.channel(out);
    const std::size_t nrec = b.n_records();
    for (std::size_t p = 0; p < b.n_paths(); ++p)
        for (std::size_t k = 0; k < nrec; ++k) {
            const std::size_t j = p * nrec + k;
            const double sig = b.has("sigma") ? b.channel("sigma")[j] : 0.0;
            a[j] = (std::abs(v[j]) > 1e-8 && sig != 0.0) ? e[j] / (sig * v[j]) : kNaN;
        }
}

void fill_sigma(const ScenarioSpec& spec, PathBatch& b) {
    auto& sg = b.channel("sigma");
    const std::size_t nrec = b.n_records();
    for (std::size_t p = 0; p < b.n_paths(); ++p)
        for (std::size_t k = 0; k < nrec; ++k)
            sg[p * nrec + k] = spec.sigma(b.grid().time(b.steps()[k]), b.state(p, k).w);
}

} // namespace

void consistent_optimal_wealth(const ScenarioSpec& spec, PathBatch& batch) {
    require_state_channels(batch, true);
    if (!is_consistent_pair(spec))
        throw RegimeError("consistent_optimal_wealth needs eta = 0 and beta = -theta/2");
    WealthModel m = WealthModel::for_spec(spec, "consistent");
    fill_profile(m, batch, "xi_star", std::nullopt);
}

void consistent_optimal_exposure(const ScenarioSpec& spec, PathBatch& batch) {
    if (!batch.has("xi_star")) throw Error("consistent_optimal_exposure needs the xi_star channel");
    const auto& xi = batch.channel("xi_star");
    const auto& th = batch.channel("theta");
    const auto& g = batch.channel("gamma_inv");
    auto& e = batch.channel("exposure");
    const std::size_t n = xi.size();
    for (std::size_t j = 0; j < n; ++j) e[j] = -0.5 * th[j] * xi[j] - th[j] * g[j];
    fill_sigma(spec, batch);
    fill_alpha(batch, "exposure", "xi_star", "alpha");
}

DerivedConstants merton_exponential_wealth(const ScenarioSpec& spec, PathBatch& batch) {
    require_state_channels(batch, false);
    return build_profile(spec, batch, "merton", "xi_star", std::nullopt);
}

DerivedConstants power_optimal_wealth(const ScenarioSpec& spec, PathBatch& batch) {
    require_state_channels(batch, false);
    if (!(spec.x0 > 0.0)) throw DomainError("power_optimal_wealth needs x > 0");
    return build_profile(spec, batch, "power", "xi_star", std::nullopt);
}

DerivedConstants general_exp_optimal_wealth(const ScenarioSpec& spec, PathBatch& batch, double horizon) {
    require_state_channels(batch, true);
    const std::size_t h = batch.grid().index_of(horizon);
    return build_profile(spec, batch, "general", "xi_star_h", h);
}

DerivedConstants noise_optimal_wealth(const ScenarioSpec& spec, PathBatch& batch) {
    require_state_channels(batch, false);
    if (!batch.has("X")) throw Error("noise_optimal_wealth needs the X channel");
    return build_profile(spec, batch, "noise", "xi_star", std::nullopt);
}

void forward_family_simulate(const ScenarioSpec& spec, PathBatch& batch) {
    if (!batch.full() || !batch.has("dW") || !batch.has("logZ"))
        throw Error("forward_family_simulate needs a full batch with market channels");
    const ScenarioSpec fs = forward_variant(spec);
    const Dynamics dyn(fs, batch.grid());
    const StrategyRule rule = forward_optimal_rule();
    const std::size_t nrec = batch.n_records();
    const std::size_t n = batch.grid().n_steps;
    const auto& dw = batch.channel("dW");
    auto& g = batch.channel("gamma_inv");
    auto& V = batch.channel("V_star");
    auto& e = batch.channel("exposure_star");
    auto& eta = batch.channel("eta_star");
    const double lg0 = -std::log(spec.gamma0);
    parallel_for(batch.n_paths(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            batch.state(p, 0).log_g = lg0;
            batch.state(p, 0).v = spec.x0;
            for (std::size_t i = 0; i <= n; ++i) {
                PathState& cur = batch.state(p, i);
                const std::size_t j = p * nrec + i;
                const Coeffs c = dyn.coeffs(i, cur, p);
                g[j] = std::exp(cur.log_g);
                V[j] = cur.v;
                eta[j] = c.eta;
                if (i == n) {
                    e[j] = rule.exposure(StepContext{i, dyn.dt(), cur, c});
                    break;
                }
                PathState next = cur;
                e[j] = dyn.advance(i, next, c, dw[j], &rule, p).exposure;
                batch.state(p, i + 1).log_g = next.log_g;
                batch.state(p, i + 1).v = next.v;
            }
        }
    });
    fill_sigma(spec, batch);
    fill_alpha(batch, "exposure_star", "V_star", "alpha_star");
}

void noise_strategy(const ScenarioSpec& spec, PathBatch& batch) {
    if (spec.utility.tag != UtilityTag::mult_noise) throw RegimeError("noise_strategy needs the mult_noise family");
    const TimeGrid grid = spec.grid();
    for (std::size_t i = 0; i <= grid.n_steps; ++i) (void)noise_k(spec, grid.time(i));
    if (!batch.has("xi_star")) (void)noise_optimal_wealth(spec, batch);
    const std::size_t nrec = batch.n_records();
    auto& e = batch.channel("exposure");
    const double gamma = spec.utility.gamma;
    for (std::size_t p = 0; p < batch.n_paths(); ++p)
        for (std::size_t k = 0; k < nrec; ++k) {
            const double t = batch.grid().time(batch.steps()[k]);
            const double w = batch.state(p, k).w;
            const double th = spec.theta(t, w);
            e[p * nrec + k] = -(th - spec.utility.noise_beta(t, w, th)) / gamma;
        }
    fill_sigma(spec, batch);
    fill_alpha(batch, "exposure", "xi_star", "alpha");
}

} // namespace sdu
