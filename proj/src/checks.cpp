#include "sdu/checks.hpp"

#include "sdu/errors.hpp"
#include "sdu/estimators.hpp"
#include "sdu/parallel.hpp"
#include "sdu/preferences.hpp"
#include "sdu/strategies.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iterator>
#include <limits>

namespace sdu {

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

double CheckReport::diag(const std::string& key) const {
    const auto it = diagnostics.find(key);
    if (it == diagnostics.end()) throw Error("report '" + name + "' has no diagnostic '" + key + "'");
    return it->second;
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string time_label(double t) { return format_double(t); }

unsigned model_needs(ModelKind k) {
    switch (k) {
    case ModelKind::consistent_exp:
    case ModelKind::general_exp: return field_logz | field_gamma;
    case ModelKind::noise_exp:
    case ModelKind::noise_power: return field_logz | field_x;
    default: return field_logz;
    }
}

std::pair<std::size_t, std::size_t> check_steps(const ScenarioSpec& spec, std::pair<double, double> st) {
    const TimeGrid g = spec.grid();
    if (!(st.first > 0.0 && st.first < st.second && st.second <= spec.T + 1e-12))
        throw DomainError("check times need 0 < s < t <= T");
    return {g.index_of(st.first), g.index_of(st.second)};
}

CheckReport consistency_core(const ScenarioSpec& spec, std::pair<double, double> st, const CheckOptions& opts,
                             const std::string& name) {
    const auto start = Clock::now();
    const auto [s_step, t_step] = check_steps(spec, st);
    WealthModel model = WealthModel::for_spec(spec, opts.strategy);
    if (model.needs_constants())
        model.estimate_constants(spec, {s_step, t_step}, spec.n_paths, spec.seed, {s_step, t_step});

    const StrategyRule fwd = forward_optimal_rule();
    const StrategyRule* rule = spec.eta_mode == EtaMode::forward ? &fwd : nullptr;
    SimRequest req;
    req.n_paths = spec.nested.n_outer;
    req.seed = spec.seed;
    req.stream = streams::outer;
    req.rule = rule;
    req.record_steps = {s_step};
    const PathBatch outer = simulate_paths(spec, spec.grid(), req);
    const OuterStates os = outer_states(outer, s_step);
    const std::size_t n_outer = os.states.size();
    const unsigned needs = model_needs(model.kind()) | (rule ? field_v : 0u);

    std::vector<InnerTarget> qt;
    qt.push_back({"value", needs, [&](const PathState& x) { return model.value(t_step, x); }, nullptr});
    qt.push_back({"value_gradient", needs, [&](const PathState& x) { return model.dvalue(t_step, x); }, nullptr});
    if (!model.exp_identity())
        qt.push_back({"compensator", needs, nullptr, [&](const PathState& x, const Coeffs& c, double dt) {
                          return model.step_drift(t_step, x, c, dt);
                      }});
    const std::uint64_t salt = mix64((static_cast<std::uint64_t>(s_step) << 32) ^ t_step);
    NestedOptions nq;
    nq.n_inner = spec.nested.n_inner;
    nq.seed = spec.seed;
    nq.kind = 1;
    nq.salt = salt;
    nq.measure = Measure::Q();
    nq.rule = rule;
    const auto qres = conditional_q_expectation_nested(spec, os, t_step, qt, nq);

    std::vector<ConditionalEstimate> eres;
    if (model.exp_identity()) {
        InnerTarget et{"exp_integral", needs, nullptr,
                       [&](const PathState&, const Coeffs& c, double dt) { return model.exp_rate(c) * dt; }};
        et.exponentiate = true;
        NestedOptions ne = nq;
        ne.kind = 2;
        ne.measure = model.identity_measure();
        eres = conditional_q_expectation_nested(spec, os, t_step, {et}, ne);
    }

    const DerivedConstants& dc = model.constants();
    const bool has_const = model.needs_constants();
    const double Hs = model.exp_identity() ? dc.at(s_step).value : 0.0;
    const double Ht = model.exp_identity() ? dc.at(t_step).value : 0.0;

    CheckReport rep;
    rep.name = name;
    rep.scenario = spec.id;
    rep.n_paths = spec.n_paths;
    rep.seed = spec.seed;
    rep.detail_columns = {"outer", "w_s", "xi_s", "value_stat", "value_band", "identity_stat", "identity_band"};
    std::size_t viol_v = 0, viol_i = 0;
    std::vector<double> bands_v, bands_i;
    double worst_v = 0.0, worst_i = 0.0;
    for (std::size_t o = 0; o < n_outer; ++o) {
        const PathState& xs = os.states[o];
        const double ref = model.value(s_step, xs);
        const double floor = 1e-12 * (1.0 + std::abs(ref));

        const double stat_v = qres[0].mean[o] - ref;
        double sc_v = 0.0;
        if (has_const) sc_v = dc.linear_se({{t_step, qres[1].mean[o]}, {s_step, -model.dvalue(s_step, xs)}});
        const double band_v = 3.0 * std::hypot(qres[0].se[o], sc_v) + floor;

        double stat_i, band_i;
        if (model.exp_identity()) {
            stat_i = eres[0].mean[o] - Ht / Hs;
            const double sc = dc.linear_se({{t_step, -1.0 / Hs}, {s_step, Ht / (Hs * Hs)}});
            band_i = 3.0 * std::hypot(eres[0].se[o], sc) + 1e-12 * (1.0 + Ht / Hs);
        } else {
            stat_i = model.value(t_step, xs) + qres[2].mean[o] - ref;
            double sc = 0.0;
            if (has_const)
                sc = dc.linear_se({{t_step, model.dvalue(t_step, xs)}, {s_step, -model.dvalue(s_step, xs)}});
            band_i = 3.0 * std::hypot(qres[2].se[o], sc) + floor;
        }
        if (std::abs(stat_v) > band_v) ++viol_v;
        if (std::abs(stat_i) > band_i) ++viol_i;
        worst_v = std::max(worst_v, std::abs(stat_v) / band_v);
        worst_i = std::max(worst_i, std::abs(stat_i) / band_i);
        bands_v.push_back(band_v);
        bands_i.push_back(band_i);
        rep.detail.push_back({static_cast<double>(o), xs.w, ref, stat_v, band_v, stat_i, band_i});
    }

    const std::size_t need =
        static_cast<std::size_t>(std::ceil(opts.quota * static_cast<double>(n_outer) - 1e-9));
    const std::size_t allowed = n_outer - std::min(need, n_outer);
    const double med_v = median(bands_v), med_i = median(bands_i);
    rep.stats.push_back({"value_route_violations", static_cast<double>(viol_v), static_cast<double>(allowed), med_v,
                         viol_v <= allowed});
    rep.stats.push_back({"identity_route_violations", static_cast<double>(viol_i), static_cast<double>(allowed),
                         med_i, viol_i <= allowed});
    rep.statistic = static_cast<double>(std::max(viol_v, viol_i));
    rep.band = static_cast<double>(allowed);
    rep.diagnostics["s"] = st.first;
    rep.diagnostics["t"] = st.second;
    rep.diagnostics["n_outer"] = static_cast<double>(n_outer);
    rep.diagnostics["n_inner"] = static_cast<double>(spec.nested.n_inner);
    rep.diagnostics["value_violations"] = static_cast<double>(viol_v);
    rep.diagnostics["identity_violations"] = static_cast<double>(viol_i);
    rep.diagnostics["value_median_band"] = med_v;
    rep.diagnostics["identity_median_band"] = med_i;
    rep.diagnostics["value_worst_ratio"] = worst_v;
    rep.diagnostics["identity_worst_ratio"] = worst_i;
    rep.diagnostics["required_passes"] = static_cast<double>(n_outer - allowed);
    if (has_const) {
        rep.diagnostics["constant_s"] = dc.at(s_step).value;
        rep.diagnostics["constant_t"] = dc.at(t_step).value;
        rep.diagnostics["constant_se_s"] = dc.at(s_step).se;
        rep.diagnostics["constant_se_t"] = dc.at(t_step).se;
    }
    rep.notes["model"] = model.name();

    const double resolution = std::min(med_v, med_i);
    rep.diagnostics["resolution"] = resolution;
    if (viol_v > allowed || viol_i > allowed) {
        rep.verdict = Verdict::fail;
        rep.reason = "conditional expectation outside band on " + std::to_string(std::max(viol_v, viol_i)) +
                     " of " + std::to_string(n_outer) + " outer paths";
    } else if (resolution > opts.resolution_fraction * opts.effect_size) {
        rep.verdict = Verdict::inconclusive;
        rep.reason = "band " + format_double(resolution) + " wider than " +
                     format_double(opts.resolution_fraction * opts.effect_size);
    } else {
        rep.verdict = Verdict::pass;
    }
    rep.wall_time_ms = elapsed_ms(start);
    return rep;
}

std::vector<double> union_times(const ScenarioSpec& spec) {
    std::vector<double> ts;
    for (const auto& [a, b] : spec.check_times) {
        ts.push_back(a);
        ts.push_back(b);
    }
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

} // namespace

CheckReport check_consistency(const ScenarioSpec& spec, std::pair<double, double> st, const CheckOptions& opts) {
    return consistency_core(spec, st, opts,
                            spec.utility.tag == UtilityTag::mult_noise ? "noise_consistency" : "consistency");
}

CheckReport check_noise_consistency(const ScenarioSpec& spec, std::pair<double, double> st,
                                    const CheckOptions& opts) {
    if (spec.utility.tag != UtilityTag::mult_noise)
        throw RegimeError("noise consistency needs the mult_noise family");
    CheckReport rep = consistency_core(spec, st, opts, "noise_consistency");
    const TimeGrid g = spec.grid();
    bool deterministic = true;
    try {
        for (std::size_t i = 0; i <= g.n_steps; ++i) (void)noise_k(spec, g.time(i));
    } catch (const RegimeError&) {
        deterministic = false;
    }
    rep.diagnostics["k_deterministic"] = deterministic ? 1.0 : 0.0;
    if (deterministic) rep.diagnostics["k_at_0"] = noise_k(spec, 0.0);
    return rep;
}

CheckReport check_forward_performance(const ScenarioSpec& spec, const CheckOptions& opts) {
    const auto start = Clock::now();
    enum class Form { exp_state, noise } form;
    ScenarioSpec sim = spec;
    StrategyRule rule;
    double gamma = 1.0;
    switch (spec.utility.tag) {
    case UtilityTag::state_dep_exp:
        form = Form::exp_state;
        rule = forward_optimal_rule();
        break;
    case UtilityTag::det_exp:
        form = Form::exp_state;
        sim.utility.tag = UtilityTag::state_dep_exp;
        sim.gamma0 = spec.utility.gamma;
        sim.eta_mode = EtaMode::given;
        sim.eta = CoefficientFn::constant(0.0);
        sim.beta = CoefficientFn::constant(0.0);
        rule = forward_optimal_rule();
        break;
    case UtilityTag::mult_noise:
        if (spec.utility.base != UtilityTag::det_exp)
            throw RegimeError("forward-performance check supports the exponential noise base only");
        form = Form::noise;
        gamma = spec.utility.gamma;
        rule = noise_exposure_rule(spec);
        break;
    default: throw RegimeError("forward-performance check needs an exponential-type family");
    }

    const TimeGrid grid = sim.grid();
    const Dynamics dyn(sim, grid);
    const NormalSource rng(sim.seed, streams::outer);
    const std::vector<double> times = union_times(sim);
    std::vector<std::size_t> t_steps;
    for (double t : times) t_steps.push_back(grid.index_of(t));
    const std::size_t n = sim.n_paths;
    const std::size_t n_pert = opts.perturbations.size();
    const std::size_t n_strat = 1 + n_pert;
    const std::size_t n_t = t_steps.size();
    std::vector<double> u(n * n_t), min_drift(n * n_strat);
    std::vector<std::size_t> negatives(n, 0);

    const auto drift = [&](double a, const PathState& s, const Coeffs& c) {
        if (form == Form::noise) return 0.5 * gamma * a * a + a * (c.theta - c.beta_x);
        const double gm = std::exp(-s.log_g);
        const double gv = gm * s.v;
        return 0.5 * gm * gm * a * a + gm * c.theta * a - gm * gm * s.v * c.beta * a + 0.5 * gv * gv * c.beta * c.beta -
               gv * c.theta * c.beta + c.eta * (gv + 1.0) - c.theta * c.beta;
    };
    const auto utility = [&](const PathState& s) {
        if (form == Form::noise) return -std::exp(-gamma * s.v + s.log_x) / gamma;
        const double g = std::exp(s.log_g);
        return -g * std::exp(-s.v / g);
    };
    const double u0 = utility(dyn.initial_state());

    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            PathState s = dyn.initial_state();
            std::size_t k = 0;
            for (std::size_t j = 0; j < n_strat; ++j) min_drift[p * n_strat + j] = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i <= grid.n_steps; ++i) {
                while (k < n_t && t_steps[k] == i) u[p * n_t + k++] = utility(s);
                if (i == grid.n_steps) break;
                const Coeffs c = dyn.coeffs(i, s, p);
                const double a_star = rule.exposure(StepContext{i, dyn.dt(), s, c});
                for (std::size_t j = 0; j < n_strat; ++j) {
                    const double a = j == 0 ? a_star : a_star + c.sigma * opts.perturbations[j - 1] * s.v;
                    const double d = drift(a, s, c);
                    double& m = min_drift[p * n_strat + j];
                    m = std::min(m, d);
                    if (d < -opts.drift_tolerance) ++negatives[p];
                }
                (void)dyn.advance(i, s, c, dyn.increment(rng(p, i), c, Measure::P()), &rule, p);
            }
        }
    });

    CheckReport rep;
    rep.name = "forward_performance";
    rep.scenario = spec.id;
    rep.n_paths = n;
    rep.seed = spec.seed;
    std::size_t neg_total = 0;
    for (auto c : negatives) neg_total += c;
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n_strat; ++j) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < n; ++p) m = std::min(m, min_drift[p * n_strat + j]);
        const std::string label = j == 0 ? "min_drift_candidate" : "min_drift_delta_" + format_double(opts.perturbations[j - 1]);
        rep.diagnostics[label] = m;
        rep.stats.push_back({label, m, -opts.drift_tolerance, 0.0, m >= -opts.drift_tolerance});
        worst = std::min(worst, m);
    }
    const bool drift_ok = neg_total == 0;
    rep.diagnostics["negative_drift_states"] = static_cast<double>(neg_total);
    rep.diagnostics["states_evaluated"] = static_cast<double>(n * grid.n_steps * n_strat);
    rep.diagnostics["u0"] = u0;

    bool eq_ok = true;
    double max_band = 0.0;
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n_t; ++k) {
        for (std::size_t p = 0; p < n; ++p) col[p] = u[p * n_t + k] - u0;
        const Estimate e = mc_mean(col);
        const double band = 3.0 * e.se;
        const bool ok = std::abs(e.mean) <= band;
        eq_ok = eq_ok && ok;
        max_band = std::max(max_band, band);
        rep.stats.push_back({"E[u_t]-u_0 @" + time_label(times[k]), e.mean, band, e.se, ok});
        rep.diagnostics["mean_u@" + time_label(times[k])] = e.mean + u0;
        rep.diagnostics["se_u@" + time_label(times[k])] = e.se;
    }
    for (const auto& [a, b] : sim.check_times) {
        const std::size_t ka = std::find(times.begin(), times.end(), a) - times.begin();
        const std::size_t kb = std::find(times.begin(), times.end(), b) - times.begin();
        for (std::size_t p = 0; p < n; ++p) col[p] = u[p * n_t + kb] - u[p * n_t + ka];
        const Estimate e = mc_mean(col);
        const double band = 3.0 * e.se;
        const bool ok = std::abs(e.mean) <= band;
        eq_ok = eq_ok && ok;
        rep.stats.push_back({"E[u_t-u_s] @(" + time_label(a) + "," + time_label(b) + ")", e.mean, band, e.se, ok});
    }
    rep.statistic = worst;
    rep.band = -opts.drift_tolerance;
    rep.notes["candidate"] = rule.name();
    if (!drift_ok || !eq_ok) {
        rep.verdict = Verdict::fail;
        rep.reason = !drift_ok ? std::to_string(neg_total) + " state(s) with negative supermartingale drift"
                               : "martingale equality outside 3-SE band";
    } else if (max_band > opts.resolution_fraction * opts.effect_size * std::max(1.0, std::abs(u0))) {
        rep.verdict = Verdict::inconclusive;
        rep.reason = "martingale band too wide";
    } else {
        rep.verdict = Verdict::pass;
    }
    rep.wall_time_ms = elapsed_ms(start);
    return rep;
}

CheckReport check_martingale(const PathBatch& batch, const std::string& channel, MeasureTag measure,
                             const std::vector<double>& times, const std::string& scenario_id,
                             const CheckOptions& opts) {
    const auto start = Clock::now();
    const std::size_t n = batch.n_paths();
    const std::size_t k0 = batch.record_of(0);
    const auto values_at = [&](std::size_t k) {
        std::vector<double> v(n);
        if (channel == "Z") {
            for (std::size_t p = 0; p < n; ++p) v[p] = std::exp(batch.state(p, k).log_z);
        } else {
            v = batch.column(channel, k);
        }
        return v;
    };
    const double ref = values_at(k0)[0];
    CheckReport rep;
    rep.name = "martingale_" + channel + (measure == MeasureTag::P ? "_P" : "_Q");
    rep.scenario = scenario_id;
    rep.n_paths = n;
    rep.seed = batch.seed;
    bool ok_all = true;
    double max_band = 0.0, last = 0.0, last_band = 0.0, worst = 0.0;
    for (double t : times) {
        const std::size_t k = batch.record_of_time(t);
        const std::vector<double> v = values_at(k);
        Estimate e;
        if (measure == MeasureTag::P) {
            e = mc_mean(v);
        } else {
            std::vector<double> z(n);
            for (std::size_t p = 0; p < n; ++p) z[p] = std::exp(batch.state(p, k).log_z);
            e = q_expectation(v, z);
        }
        const double d = e.mean - ref;
        const double band = 3.0 * e.se + 1e-12 * (1.0 + std::abs(ref));
        const bool ok = std::abs(d) <= band;
        ok_all = ok_all && ok;
        max_band = std::max(max_band, band);
        worst = std::max(worst, std::abs(d) / band);
        last = d;
        last_band = band;
        rep.stats.push_back({"E[" + channel + "_t]-" + channel + "_0 @" + time_label(t), d, band, e.se, ok});
        rep.diagnostics["mean@" + time_label(t)] = e.mean;
        rep.diagnostics["se@" + time_label(t)] = e.se;
    }
    rep.diagnostics["reference"] = ref;
    rep.diagnostics["drift_sign"] = std::abs(last) <= last_band ? 0.0 : (last > 0 ? 1.0 : -1.0);
    rep.statistic = worst;
    rep.band = 1.0;
    if (!ok_all) {
        rep.verdict = Verdict::fail;
        rep.reason = std::string("mean drifts ") + (last > 0 ? "up" : "down") + " beyond 3-SE band";
    } else if (max_band > opts.resolution_fraction * opts.effect_size * std::max(1.0, std::abs(ref))) {
        rep.verdict = Verdict::inconclusive;
        rep.reason = "band too wide";
    } else {
        rep.verdict = Verdict::pass;
    }
    rep.wall_time_ms = elapsed_ms(start);
    return rep;
}

CheckReport check_optimality_gap(const ScenarioSpec& spec, double t, const CheckOptions&) {
    const auto start = Clock::now();
    if (spec.utility.tag != UtilityTag::state_dep_exp)
        throw RegimeError("optimality gap needs the state_dep_exp family");
    const ScenarioSpec fs = forward_variant(spec);
    const std::size_t h = fs.grid().index_of(t);
    WealthModel model = WealthModel::for_spec(fs, "general");
    model.estimate_constants(fs, {h}, fs.n_paths, fs.seed, {h});
    const double k = model.constants().at(h).value;
    const double lambda = std::exp(-k);

    const StrategyRule rule = forward_optimal_rule();
    SimRequest req;
    req.n_paths = fs.n_paths;
    req.seed = fs.seed;
    req.stream = streams::outer;
    req.rule = &rule;
    req.record_steps = {h};
    const PathBatch b = simulate_paths(fs, fs.grid(), req);
    const std::size_t n = b.n_paths();
    std::vector<double> lag(n), uxi(n), uv(n), du(n), zxi(n), zv(n), sq(n);
    for (std::size_t p = 0; p < n; ++p) {
        const PathState& s = b.state(p, 0);
        const double g = std::exp(s.log_g);
        const double z = std::exp(s.log_z);
        const double xi = model.value(h, s);
        uxi[p] = -g * std::exp(-xi / g);
        uv[p] = -g * std::exp(-s.v / g);
        du[p] = uxi[p] - uv[p];
        lag[p] = du[p] - lambda * z * (xi - s.v);
        zxi[p] = z * xi;
        zv[p] = z * s.v;
        sq[p] = (xi - s.v) * (xi - s.v);
    }
    const Estimate L = mc_mean(lag), ex = mc_mean(uxi), ev = mc_mean(uv), ed = mc_mean(du);
    const Estimate bx = mc_mean(zxi), bv = mc_mean(zv), rms = mc_mean(sq);

    CheckReport rep;
    rep.name = "optimality_gap";
    rep.scenario = spec.id;
    rep.n_paths = n;
    rep.seed = spec.seed;
    rep.statistic = L.mean;
    rep.band = 3.0 * L.se;
    rep.stats.push_back({"lagrangian_gap", L.mean, 3.0 * L.se, L.se, L.mean > 3.0 * L.se});
    rep.diagnostics["t"] = t;
    rep.diagnostics["gap"] = L.mean;
    rep.diagnostics["gap_se"] = L.se;
    rep.diagnostics["gap_within_3se_of_zero"] = std::abs(L.mean) <= 3.0 * L.se ? 1.0 : 0.0;
    rep.diagnostics["raw_delta"] = ex.mean - ev.mean;
    rep.diagnostics["raw_delta_paired_se"] = ed.se;
    rep.diagnostics["raw_delta_combined_se"] = std::hypot(ex.se, ev.se);
    rep.diagnostics["E_P[u(xi*)]"] = ex.mean;
    rep.diagnostics["E_P[u(V*)]"] = ev.mean;
    rep.diagnostics["lambda"] = lambda;
    rep.diagnostics["k_t"] = k;
    rep.diagnostics["budget_xi*"] = bx.mean - fs.x0;
    rep.diagnostics["budget_V*"] = bv.mean - fs.x0;
    rep.diagnostics["rms_xi_minus_V"] = std::sqrt(rms.mean);
    if (L.mean > 3.0 * L.se) {
        rep.verdict = Verdict::pass;
        rep.reason = "static optimum strictly better than forward wealth";
    } else {
        rep.verdict = Verdict::fail;
        rep.reason = "no significant gap";
    }
    rep.wall_time_ms = elapsed_ms(start);
    return rep;
}

CheckReport check_budget(const ScenarioSpec& spec, double t, const CheckOptions& opts) {
    const auto start = Clock::now();
    const std::size_t h = spec.grid().index_of(t);
    WealthModel model = WealthModel::for_spec(spec, opts.strategy);
    if (model.needs_constants()) model.estimate_constants(spec, {h}, spec.n_paths, spec.seed, {h});
    const StrategyRule fwd = forward_optimal_rule();
    SimRequest req;
    req.n_paths = spec.n_paths;
    req.seed = spec.seed;
    req.stream = streams::validation;
    req.rule = spec.eta_mode == EtaMode::forward ? &fwd : nullptr;
    req.record_steps = {h};
    const PathBatch b = simulate_paths(spec, spec.grid(), req);
    const std::size_t n = b.n_paths();
    std::vector<double> zx(n);
    double grad = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const PathState& s = b.state(p, 0);
        const double z = std::exp(s.log_z);
        zx[p] = z * model.value(h, s);
        grad += z * model.dvalue(h, s);
    }
    grad /= static_cast<double>(n);
    const Estimate e = mc_mean(zx);
    const double sc = model.needs_constants() ? model.constants().linear_se({{h, grad}}) : 0.0;
    const double band = 3.0 * std::hypot(e.se, sc) + 1e-12 * (1.0 + std::abs(spec.x0));
    const double d = e.mean - spec.x0;

    CheckReport rep;
    rep.name = "budget";
    rep.scenario = spec.id;
    rep.n_paths = n;
    rep.seed = spec.seed;
    rep.statistic = d;
    rep.band = band;
    rep.stats.push_back({"E_Q[xi*_t]-x", d, band, e.se, std::abs(d) <= band});
    rep.diagnostics["t"] = t;
    rep.diagnostics["E_Q[xi*]"] = e.mean;
    rep.diagnostics["se"] = e.se;
    rep.diagnostics["se_constants"] = sc;
    rep.notes["model"] = model.name();
    if (std::abs(d) > band) {
        rep.verdict = Verdict::fail;
        rep.reason = "budget violated";
    } else if (band > opts.resolution_fraction * opts.effect_size * std::max(1.0, std::abs(spec.x0))) {
        rep.verdict = Verdict::inconclusive;
        rep.reason = "band too wide";
    } else {
        rep.verdict = Verdict::pass;
    }
    rep.wall_time_ms = elapsed_ms(start);
    return rep;
}

std::vector<double> battery_times(const ScenarioSpec& spec) {
    const TimeGrid g = spec.grid();
    std::vector<double> ts;
    for (double f : {0.25, 0.5, 1.0}) ts.push_back(g.time(g.index_of(f * spec.T)));
    for (double t : union_times(spec)) ts.push_back(t);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    ts.erase(std::remove_if(ts.begin(), ts.end(), [](double t) { return t <= 0.0; }), ts.end());
    return ts;
}

std::vector<CheckReport> martingale_batteries(const ScenarioSpec& spec, const CheckOptions& opts) {
    const TimeGrid g = spec.grid();
    const std::vector<double> times = battery_times(spec);
    std::vector<std::size_t> steps{0};
    for (double t : times) steps.push_back(g.index_of(t));
    const StrategyRule fwd = forward_optimal_rule();
    SimRequest req;
    req.n_paths = spec.n_paths;
    req.seed = spec.seed;
    req.stream = streams::validation;
    req.rule = spec.eta_mode == EtaMode::forward ? &fwd : nullptr;
    req.record_steps = steps;
    PathBatch b = simulate_paths(spec, g, req);

    std::vector<CheckReport> out;
    out.push_back(check_martingale(b, "Z", MeasureTag::P, times, spec.id, opts));
    const bool exp_state = spec.utility.tag == UtilityTag::state_dep_exp;
    if (exp_state && spec.eta_mode == EtaMode::given && spec.eta.is_constant() && spec.eta.value() == 0.0)
        out.push_back(check_martingale(b, "gamma_inv", MeasureTag::Q, times, spec.id, opts));
    if (spec.utility.tag == UtilityTag::mult_noise)
        out.push_back(check_martingale(b, "X", MeasureTag::P, times, spec.id, opts));

    const WealthModel model = WealthModel::for_spec(spec, opts.strategy);
    if (!model.needs_constants()) {
        auto& xi = b.channel("xi_star");
        auto& u = b.channel("u_xi_star");
        const std::size_t nrec = b.n_records();
        for (std::size_t p = 0; p < b.n_paths(); ++p)
            for (std::size_t k = 0; k < nrec; ++k) {
                const PathState& s = b.state(p, k);
                const std::size_t j = p * nrec + k;
                xi[j] = model.value(steps[k], s);
                u[j] = utility_value(spec.utility, xi[j], std::exp(s.log_g), std::exp(s.log_x));
            }
        out.push_back(check_martingale(b, "xi_star", MeasureTag::Q, times, spec.id, opts));
        // u_t(xi*_t) is a P-martingale only in the consistent regime.
        if (model.kind() == ModelKind::consistent_exp)
            out.push_back(check_martingale(b, "u_xi_star", MeasureTag::P, times, spec.id, opts));
    } else {
        for (double t : times) {
            CheckReport r = check_budget(spec, t, opts);
            r.name = "budget@" + time_label(t);
            out.push_back(std::move(r));
        }
    }
    return out;
}

std::vector<std::string> default_checks(const ScenarioSpec& spec) {
    switch (spec.utility.tag) {
    case UtilityTag::state_dep_exp: return {"consistency", "forward", "martingale", "budget"};
    case UtilityTag::det_exp: return {"consistency", "martingale", "budget"};
    case UtilityTag::power:
    case UtilityTag::log: return {"consistency", "budget"};
    case UtilityTag::mult_noise:
        if (spec.utility.base == UtilityTag::det_exp) return {"noise_consistency", "forward", "budget"};
        return {"noise_consistency", "budget"};
    }
    return {};
}

std::vector<CheckReport> run_checks(const ScenarioSpec& spec, const std::vector<std::string>& names,
                                    const CheckOptions& opts) {
    std::vector<CheckReport> out;
    for (const auto& name : names) {
        if (name == "consistency" || name == "noise_consistency") {
            for (const auto& st : spec.check_times)
                out.push_back(name == "noise_consistency" ? check_noise_consistency(spec, st, opts)
                                                          : check_consistency(spec, st, opts));
        } else if (name == "forward") {
            out.push_back(check_forward_performance(spec, opts));
        } else if (name == "martingale") {
            auto b = martingale_batteries(spec, opts);
            out.insert(out.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
        } else if (name == "optimality_gap") {
            out.push_back(check_optimality_gap(spec, spec.T, opts));
        } else if (name == "budget") {
            out.push_back(check_budget(spec, spec.T, opts));
        } else {
            throw DomainError("unknown check '" + name + "'");
        }
    }
    return out;
}

std::vector<CheckReport> run_seed_matrix(const ScenarioSpec& spec,
                                         const std::function<CheckReport(const ScenarioSpec&)>& check,
                                         std::size_t n_seeds) {
    std::vector<CheckReport> out;
    for (std::size_t i = 0; i < n_seeds; ++i) {
        ScenarioSpec s = spec;
        s.seed = spec.seed + i;
        out.push_back(check(s));
    }
    return out;
}

int exit_code_for(const std::vector<CheckReport>& reports) noexcept {
    bool inconclusive = false;
    for (const auto& r : reports) {
        if (r.verdict == Verdict::fail) return 4;
        if (r.verdict == Verdict::inconclusive) inconclusive = true;
    }
    return inconclusive ? 5 : 0;
}

} // namespace sdu
