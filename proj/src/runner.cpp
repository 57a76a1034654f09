#include "sdu/runner.hpp"

#include "sdu/errors.hpp"
#include "sdu/parallel.hpp"
#include "sdu/preferences.hpp"
#include "sdu/strategies.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace sdu {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

int exit_code_for_exception(const std::exception& e) noexcept {
    if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
        dynamic_cast<const RegimeError*>(&e))
        return 2;
    return 3;
}

namespace {

void write_file(const RunManifest& m, const std::string& name, const std::string& text) {
    if (m.out_dir.empty()) return;
    fs::create_directories(m.out_dir);
    std::ofstream f(fs::path(m.out_dir) / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (fs::path(m.out_dir) / name).string());
    f << text;
}

ojson parse_obj(const std::string& s) { return ojson::parse(s); }

ojson num(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

std::string safe_name(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.') c = '_';
    return s;
}

} // namespace

CommandResult cmd_simulate(const ScenarioSpec& spec, const RunManifest& m) {
    const TimeGrid grid = spec.grid();
    WealthModel model = WealthModel::for_spec(spec, "auto");
    const bool horizon_fixed = model.kind() == ModelKind::general_exp;
    std::vector<std::size_t> positive;
    if (horizon_fixed) positive = {grid.n_steps};
    else
        for (std::size_t i = 1; i <= grid.n_steps; ++i) positive.push_back(i);
    if (model.needs_constants()) model.estimate_constants(spec, positive, spec.n_paths, spec.seed);

    const StrategyRule fwd = forward_optimal_rule();
    const StrategyRule hedge = model.replication_rule(grid.n_steps);
    SimRequest req;
    req.n_paths = std::min<std::size_t>(spec.n_paths, 100);
    req.seed = spec.seed;
    req.stream = streams::outer;
    req.rule = spec.eta_mode == EtaMode::forward ? &fwd : &hedge;
    req.record_increments = true;
    PathBatch b = simulate_paths(spec, grid, req);

    const std::string xi_name = horizon_fixed ? "xi_star_h" : "xi_star";
    auto& xi = b.channel(xi_name);
    auto& u = b.channel("u_xi_star");
    const std::size_t nrec = b.n_records();
    for (std::size_t p = 0; p < b.n_paths(); ++p)
        for (std::size_t k = 0; k < nrec; ++k) {
            const PathState& s = b.state(p, k);
            const std::size_t j = p * nrec + k;
            xi[j] = model.value(horizon_fixed ? grid.n_steps : k, s);
            u[j] = utility_value(spec.utility, xi[j], std::exp(s.log_g), std::exp(s.log_x));
        }

    std::ostringstream csv;
    write_channels_csv(b, csv, 100);
    const std::vector<CheckReport> batteries = martingale_batteries(spec);
    const int code = exit_code_for(batteries);

    const AssumptionReport ar = validate_assumptions(spec);
    ojson j;
    j["manifest"] = parse_obj(manifest_json(m));
    j["scenario"] = parse_obj(serialize_scenario(spec));
    j["model"] = model.name();
    j["strategy"] = req.rule->name();
    ojson a;
    a["theta_bounded"] = ar.hp_theta_ok;
    a["risk_coefficients_bounded"] = ar.assumption_A_ok;
    a["theta_stochastic"] = ar.theta_stochastic;
    a["theta_min_abs"] = num(ar.theta_min_abs);
    a["theta_max_abs"] = num(ar.theta_max_abs);
    ojson wit = ojson::array();
    for (const auto& w : ar.witnesses)
        wit.push_back({{"what", w.what}, {"t", num(w.t)}, {"w", num(w.w)}, {"value", num(w.value)}});
    a["witnesses"] = wit;
    j["assumptions"] = a;
    ojson cs = ojson::array();
    for (const auto& [step, hc] : model.constants().by_step)
        if (step == grid.n_steps || step * 4 % grid.n_steps == 0)
            cs.push_back({{"t", num(grid.time(step))}, {"value", num(hc.value)}, {"se", num(hc.se)}});
    j["constants"] = cs;
    ojson bat = ojson::array();
    for (const auto& r : batteries) bat.push_back(parse_obj(report_json(r)));
    j["batteries"] = bat;
    j["channels_paths"] = b.n_paths();

    CommandResult res;
    res.exit_code = code;
    res.json = j.dump(2) + "\n";
    write_file(m, "channels.csv", csv.str());
    write_file(m, "summary.json", res.json);
    return res;
}

CommandResult cmd_check(const ScenarioSpec& spec, const std::vector<std::string>& names, const CheckOptions& opts,
                        const RunManifest& m) {
    const std::vector<CheckReport> reports = run_checks(spec, names.empty() ? default_checks(spec) : names, opts);
    CommandResult res;
    res.exit_code = exit_code_for(reports);
    res.json = reports_json(reports, m, res.exit_code);
    write_file(m, "report.json", res.json);
    std::map<std::string, int> seen;
    for (const auto& r : reports) {
        if (r.detail.empty()) continue;
        const int idx = seen[r.name]++;
        std::ostringstream os;
        write_detail_csv(r, os);
        write_file(m, safe_name(r.name) + (idx ? "_" + std::to_string(idx) : "") + "_detail.csv", os.str());
    }
    return res;
}

CommandResult cmd_oracle(const FiniteMarket& market, const OracleUtility& u, const RunManifest& m) {
    const LagrangianSolution sol = solve_lagrangian(market, u);
    const BruteForceResult bf = brute_force(market, u);
    double delta = 0.0;
    for (std::size_t i = 0; i < market.size(); ++i) delta = std::max(delta, std::abs(sol.xi[i] - bf.xi[i]));
    ojson j;
    j["manifest"] = parse_obj(manifest_json(m));
    ojson xi = ojson::array(), bx = ojson::array();
    for (double v : sol.xi) xi.push_back(num(v));
    for (double v : bf.xi) bx.push_back(num(v));
    j["xi"] = xi;
    j["lambda"] = num(sol.lambda);
    j["budget_residual"] = num(sol.residual);
    j["expected_utility"] = num(expected_utility(market, u, sol.xi));
    j["brute_force"] = {{"xi", bx},
                        {"objective", num(bf.objective)},
                        {"rounds", bf.rounds},
                        {"sweeps", bf.sweeps},
                        {"final_step", num(bf.final_step)}};
    j["brute_force_max_delta"] = num(delta);
    if (u.kind() == OracleUtility::Kind::exponential) {
        std::vector<double> cf;
        if (u.per_state()) {
            std::vector<double> g(market.size());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = u.gamma(i);
            cf = closed_form_state_exponential(market, g, market.x0);
        } else {
            cf = closed_form_exponential(market, u.gamma(0), market.x0);
        }
        double d = 0.0;
        for (std::size_t i = 0; i < cf.size(); ++i) d = std::max(d, std::abs(cf[i] - sol.xi[i]));
        j["closed_form_max_delta"] = num(d);
    } else if (u.kind() == OracleUtility::Kind::power) {
        const auto cf = closed_form_power(market, u.gamma(0), market.x0);
        double d = 0.0;
        for (std::size_t i = 0; i < cf.size(); ++i) d = std::max(d, std::abs(cf[i] - sol.xi[i]));
        j["closed_form_max_delta"] = num(d);
    }
    CommandResult res;
    res.json = j.dump(2) + "\n";
    write_file(m, "oracle.json", res.json);
    return res;
}

ConvergenceTable run_convergence(const ScenarioSpec& spec, const std::vector<double>& ladder_in,
                                 const std::string& strategy) {
    if (ladder_in.size() < 3) throw DomainError("dt ladder needs at least 3 step sizes");
    if (strategy != "auto" && strategy != "zero") throw DomainError("convergence strategy must be auto or zero");
    std::vector<double> ladder = ladder_in;
    std::sort(ladder.begin(), ladder.end(), std::greater<>());
    if (std::adjacent_find(ladder.begin(), ladder.end()) != ladder.end()) throw DomainError("dt ladder has duplicates");

    struct Level {
        ScenarioSpec spec;
        std::size_t n = 0;
        WealthModel model;
        StrategyRule rule;
    };
    std::vector<Level> levels;
    std::size_t fine = 0;
    for (double dt : ladder) {
        if (!(dt > 0.0)) throw DomainError("dt must be positive");
        const double steps = spec.T / dt;
        const double per_unit = 1.0 / dt;
        if (std::abs(steps - std::round(steps)) > 1e-9 * steps || std::abs(per_unit - std::round(per_unit)) > 1e-9 * per_unit)
            throw DomainError("dt " + format_double(dt) + " does not divide T into whole steps");
        Level lv;
        lv.spec = spec;
        lv.spec.steps_per_unit = static_cast<std::size_t>(std::round(per_unit));
        lv.n = lv.spec.grid().n_steps;
        fine = std::max(fine, lv.n);
        levels.push_back(std::move(lv));
    }
    for (const auto& lv : levels)
        if (fine % lv.n != 0) throw DomainError("dt ladder levels must nest on the finest grid");
    for (auto& lv : levels) {
        lv.model = WealthModel::for_spec(lv.spec, "auto");
        if (lv.model.needs_constants()) lv.model.estimate_constants(lv.spec, {lv.n}, spec.n_paths, spec.seed);
        if (strategy == "zero") lv.rule = StrategyRule::zero();
        else if (spec.eta_mode == EtaMode::forward) lv.rule = forward_optimal_rule();
        else lv.rule = lv.model.replication_rule(lv.n);
    }

    const std::size_t n = spec.n_paths;
    const std::size_t nl = levels.size();
    const double sqrt_dt_f = std::sqrt(spec.T / static_cast<double>(fine));
    const NormalSource rng(spec.seed, streams::outer);
    std::vector<double> sq(n * nl);
    std::vector<Dynamics> dyns;
    for (const auto& lv : levels) dyns.emplace_back(lv.spec, lv.spec.grid());
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> dw_fine(fine);
        for (std::size_t p = begin; p < end; ++p) {
            for (std::size_t j = 0; j < fine; ++j) dw_fine[j] = rng(p, j) * sqrt_dt_f;
            for (std::size_t l = 0; l < nl; ++l) {
                const Dynamics& dyn = dyns[l];
                const std::size_t ratio = fine / levels[l].n;
                PathState s = dyn.initial_state();
                for (std::size_t i = 0; i < levels[l].n; ++i) {
                    double dw = 0.0;
                    for (std::size_t j = i * ratio; j < (i + 1) * ratio; ++j) dw += dw_fine[j];
                    const Coeffs c = dyn.coeffs(i, s, p);
                    (void)dyn.advance(i, s, c, dw, &levels[l].rule, p);
                }
                const double err = s.v - levels[l].model.value(levels[l].n, s);
                sq[p * nl + l] = err * err;
            }
        }
    });

    ConvergenceTable tab;
    tab.strategy = strategy == "zero" ? "zero" : levels.front().rule.name();
    for (std::size_t l = 0; l < nl; ++l) {
        std::vector<double> col(n);
        for (std::size_t p = 0; p < n; ++p) col[p] = sq[p * nl + l];
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : col) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n > 1 ? n - 1 : 1);
        ConvergenceRow row;
        row.dt = ladder[l];
        row.n_steps = levels[l].n;
        row.rms = std::sqrt(mean);
        row.rms_se = row.rms > 0.0 ? std::sqrt(var / static_cast<double>(n)) / (2.0 * row.rms) : 0.0;
        tab.rows.push_back(row);
    }
    tab.monotone = true;
    for (std::size_t l = 1; l < nl; ++l) tab.monotone = tab.monotone && tab.rows[l].rms < tab.rows[l - 1].rms;
    if (strategy != "zero") {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        bool ok = true;
        for (const auto& r : tab.rows) {
            if (!(r.rms > 0.0)) ok = false;
            const double x = std::log(r.dt), y = std::log(r.rms);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double k = static_cast<double>(nl);
        if (ok) {
            tab.fitted = true;
            tab.order = (k * sxy - sx * sy) / (k * sxx - sx * sx);
        }
    }
    return tab;
}

void write_convergence_csv(const ConvergenceTable& t, std::ostream& out) {
    out << "dt,n_steps,rms_error,rms_se,fitted_order\n";
    for (const auto& r : t.rows)
        out << format_double(r.dt) << ',' << r.n_steps << ',' << format_double(r.rms) << ','
            << format_double(r.rms_se) << ',' << (t.fitted ? format_double(t.order) : "") << '\n';
}

CommandResult cmd_convergence(const ScenarioSpec& spec, const std::vector<double>& ladder,
                              const std::string& strategy, const RunManifest& m) {
    const ConvergenceTable t = run_convergence(spec, ladder, strategy);
    std::ostringstream csv;
    write_convergence_csv(t, csv);
    ojson j;
    j["manifest"] = parse_obj(manifest_json(m));
    j["strategy"] = t.strategy;
    ojson rows = ojson::array();
    for (const auto& r : t.rows)
        rows.push_back({{"dt", num(r.dt)}, {"n_steps", r.n_steps}, {"rms_error", num(r.rms)}, {"rms_se", num(r.rms_se)}});
    j["rows"] = rows;
    j["fitted_order"] = t.fitted ? num(t.order) : ojson(nullptr);
    j["monotone"] = t.monotone;
    CommandResult res;
    res.json = j.dump(2) + "\n";
    write_file(m, "convergence.csv", csv.str());
    write_file(m, "convergence.json", res.json);
    return res;
}

} // namespace sdu
