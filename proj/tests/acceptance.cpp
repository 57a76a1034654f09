// Acceptance suite: one line per criterion, exit status 0 iff every line passes.
#include "scenarios.hpp"

#include "sdu/checks.hpp"
#include "sdu/oracle.hpp"
#include "sdu/parallel.hpp"
#include "sdu/preferences.hpp"
#include "sdu/report.hpp"
#include "sdu/runner.hpp"
#include "sdu/strategies.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace sdu;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    std::string digest;
};

std::string fmt(double v) { return format_double(v); }

std::size_t violations(const CheckReport& r) { return static_cast<std::size_t>(r.statistic); }

// Criteria 1 to 3 share the seed protocol: seeds 1..5, at least 4 must agree.
Outcome seed_protocol(const std::function<ScenarioSpec(std::uint64_t)>& make, bool expect_pass,
                      std::size_t min_violations, std::string* digest_seed1 = nullptr) {
    std::size_t agree = 0;
    std::ostringstream d;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const ScenarioSpec spec = make(seed);
        const CheckReport r = spec.utility.tag == UtilityTag::mult_noise
                                  ? check_noise_consistency(spec, spec.check_times.front())
                                  : check_consistency(spec, spec.check_times.front());
        const bool ok = expect_pass ? r.verdict != Verdict::fail
                                    : (r.verdict == Verdict::fail && violations(r) >= min_violations);
        agree += ok;
        d << (seed > 1 ? " " : "") << "seed" << seed << "=" << to_string(r.verdict) << "("
          << static_cast<int>(r.diag("value_violations")) << "/" << static_cast<int>(r.diag("identity_violations"))
          << ")";
        if (seed == 1 && digest_seed1) *digest_seed1 = report_digest({r});
    }
    return {agree >= 4, std::to_string(agree) + "/5 seeds as expected; violations value/identity: " + d.str(), ""};
}

Outcome criterion1() {
    std::string dig;
    Outcome o = seed_protocol([](std::uint64_t s) { return fixtures::theorem(s); }, true, 0, &dig);
    o.digest = dig;
    return o;
}

Outcome criterion2() {
    std::string dig;
    Outcome o = seed_protocol([](std::uint64_t s) { return fixtures::beta_zero(s); }, false, 25, &dig);
    o.digest = dig;
    return o;
}

Outcome criterion3() {
    const Outcome a = seed_protocol([](std::uint64_t s) { return fixtures::det_exp(false, s); }, true, 0);
    const Outcome b = seed_protocol([](std::uint64_t s) { return fixtures::det_exp(true, s); }, false, 1);
    return {a.pass && b.pass, "constant theta passes: " + a.detail + " | stochastic theta fails: " + b.detail, ""};
}

Outcome criterion4() {
    const ScenarioSpec spec = fixtures::theorem(1, 2000);
    SimRequest req;
    req.n_paths = spec.n_paths;
    req.seed = spec.seed;
    PathBatch b = simulate_paths(spec, spec.grid(), req);
    consistent_optimal_wealth(spec, b);
    const auto& xi = b.channel("xi_star");
    const auto& g = b.channel("gamma_inv");
    const auto& lz = b.channel("logZ");
    double worst = 0.0;
    for (std::size_t j = 0; j < xi.size(); ++j) {
        const double u = utility_value(spec.utility, xi[j], g[j], 1.0);
        const double ref = -g[j] * std::exp(lz[j]) * std::exp(-spec.gamma0 * spec.x0);
        worst = std::max(worst, std::abs(u - ref) / std::abs(ref));
    }
    return {worst < 1e-12,
            "max relative error " + fmt(worst) + " over " + std::to_string(xi.size()) + " path-steps", ""};
}

Outcome criterion5() {
    const ScenarioSpec spec = fixtures::theorem(1);
    const std::vector<CheckReport> reps = martingale_batteries(spec);
    bool ok = true;
    std::size_t n_stats = 0;
    std::ostringstream d;
    std::vector<std::string> want{"martingale_Z_P", "martingale_gamma_inv_Q", "martingale_xi_star_Q",
                                  "martingale_u_xi_star_P"};
    for (const auto& w : want) {
        bool found = false;
        for (const auto& r : reps)
            if (r.name == w) {
                found = true;
                for (const auto& s : r.stats) {
                    ok = ok && s.within;
                    ++n_stats;
                }
                d << " " << w << "=" << to_string(r.verdict) << "(worst |d|/band " << fmt(r.statistic) << ")";
            }
        ok = ok && found;
    }
    return {ok, std::to_string(n_stats) + " statistics at t in {0.25, 0.5, 1};" + d.str(), report_digest(reps)};
}

Outcome criterion6() {
    const ScenarioSpec spec = fixtures::forward_beta("0.1");
    const CheckReport r = check_forward_performance(spec);
    bool eq = true;
    for (const auto& s : r.stats)
        if (s.label.rfind("E[", 0) == 0) eq = eq && s.within;
    const bool drift = r.diag("negative_drift_states") == 0.0;
    return {drift && eq,
            "negative-drift states " + fmt(r.diag("negative_drift_states")) + " of " + fmt(r.diag("states_evaluated")) +
                ", min drift candidate " + fmt(r.diag("min_drift_candidate")) + ", perturbed min " +
                fmt(std::min({r.diag("min_drift_delta_-0.5"), r.diag("min_drift_delta_-0.25"),
                              r.diag("min_drift_delta_0.25"), r.diag("min_drift_delta_0.5")})) +
                ", E[u_t(V*)] constant: " + (eq ? "yes" : "no"),
            ""};
}

Outcome criterion7() {
    const CheckReport a = check_optimality_gap(fixtures::beta_zero(1), 1.0);
    const CheckReport b = check_optimality_gap(fixtures::theorem(1), 1.0);
    const bool sep = a.verdict == Verdict::pass;
    const bool zero = b.diag("gap_within_3se_of_zero") == 1.0;
    return {sep && zero,
            std::string("beta=0 family gap ") + fmt(a.diag("gap")) + " (se " + fmt(a.diag("gap_se")) + ") " +
                (sep ? "separated" : "NOT separated") + "; consistent family gap " + fmt(b.diag("gap")) + " (se " +
                fmt(b.diag("gap_se")) + ") " + (zero ? "within 3 se of 0" : "NOT within 3 se of 0") +
                " [raw delta " + fmt(b.diag("raw_delta")) + ", unpaired se " + fmt(b.diag("raw_delta_combined_se")) +
                ", rms xi-V " + fmt(b.diag("rms_xi_minus_V")) + "]",
            ""};
}

Outcome criterion8() {
    const char* k0 = R"j({"expr": "theta", "bound": 1.0})j";
    const char* k1 = R"j({"expr": "theta - 0.1", "bound": 1.0})j";
    const ScenarioSpec s0 = fixtures::noise(k0), s1 = fixtures::noise(k1), s2 = fixtures::noise("0.0");
    const CheckReport c0 = check_noise_consistency(s0, {0.5, 1.0});
    const CheckReport c1 = check_noise_consistency(s1, {0.5, 1.0});
    const CheckReport c2 = check_noise_consistency(s2, {0.5, 1.0});
    ScenarioSpec small = s0;
    small.n_paths = 200;
    SimRequest req;
    req.n_paths = small.n_paths;
    PathBatch b = simulate_paths(small, small.grid(), req);
    noise_strategy(small, b);
    double max_alpha = 0.0;
    for (double a : b.channel("exposure")) max_alpha = std::max(max_alpha, std::abs(a));
    const CheckReport f0 = check_forward_performance(s0);
    const CheckReport f1 = check_forward_performance(s1);
    const bool ok = c0.verdict != Verdict::fail && max_alpha == 0.0 && c1.verdict != Verdict::fail &&
                    c2.verdict == Verdict::fail && f0.verdict != Verdict::fail && f1.verdict == Verdict::fail;
    return {ok,
            "k=0 " + std::string(to_string(c0.verdict)) + " (max |alpha*| " + fmt(max_alpha) + "), beta=theta-0.1 " +
                std::string(to_string(c1.verdict)) + ", beta=0 " + std::string(to_string(c2.verdict)) + " (" +
                fmt(c2.statistic) + " violations); forward k=0 " + std::string(to_string(f0.verdict)) + ", k=0.01 " +
                std::string(to_string(f1.verdict)),
            ""};
}

Outcome criterion9() {
    const CheckReport a = check_consistency(fixtures::power(false), {0.5, 1.0});
    const CheckReport b = check_consistency(fixtures::power(true), {0.5, 1.0});
    const CheckReport c = check_budget(fixtures::power(false), 1.0);
    const bool ok = a.verdict != Verdict::fail && b.verdict == Verdict::fail && c.verdict != Verdict::fail;
    return {ok,
            "deterministic theta " + std::string(to_string(a.verdict)) + " (identity violations " +
                fmt(a.diag("identity_violations")) + "), stochastic theta " + std::string(to_string(b.verdict)) +
                " (identity violations " + fmt(b.diag("identity_violations")) + "), budget " + fmt(c.statistic) +
                " within " + fmt(c.band),
            ""};
}

Outcome criterion10() {
    std::mt19937_64 gen(20240611);
    std::uniform_real_distribution<double> w(0.3, 1.0), gexp(0.5, 3.0), x0e(-1.0, 1.0), x0p(0.5, 2.0);
    std::uniform_int_distribution<int> nstates(2, 6);
    const double power_gammas[] = {-1.0, -0.5, 0.3, 0.5};
    double worst_bf = 0.0, worst_cf = 0.0, worst_sd = 0.0;
    std::ostringstream dig;
    for (int k = 0; k < 100; ++k) {
        const int n = nstates(gen);
        std::vector<double> p(n), q(n);
        double sp = 0, sq = 0;
        for (int i = 0; i < n; ++i) {
            p[i] = w(gen);
            q[i] = w(gen);
            sp += p[i];
            sq += q[i];
        }
        for (int i = 0; i < n; ++i) {
            p[i] /= sp;
            q[i] /= sq;
        }
        const bool exp_family = k % 2 == 0;
        const double x0 = exp_family ? x0e(gen) : x0p(gen);
        const FiniteMarket m = FiniteMarket::make(p, q, x0);
        const double gamma = exp_family ? gexp(gen) : power_gammas[k / 2 % 4];
        const OracleUtility u = exp_family ? OracleUtility::exponential(gamma) : OracleUtility::power(gamma);
        const LagrangianSolution sol = solve_lagrangian(m, u);
        const BruteForceResult bf = brute_force(m, u);
        const std::vector<double> cf =
            exp_family ? closed_form_exponential(m, gamma, x0) : closed_form_power(m, gamma, x0);
        for (int i = 0; i < n; ++i) {
            worst_bf = std::max(worst_bf, std::abs(sol.xi[i] - bf.xi[i]));
            worst_cf = std::max(worst_cf, std::abs(sol.xi[i] - cf[i]));
            dig << fmt(sol.xi[i]) << ',' << fmt(bf.xi[i]) << ';';
        }
        std::vector<double> gs(n);
        for (int i = 0; i < n; ++i) gs[i] = gexp(gen);
        const LagrangianSolution sd = solve_lagrangian(m, OracleUtility::state_exponential(gs));
        const std::vector<double> sdf = closed_form_state_exponential(m, gs, x0);
        for (int i = 0; i < n; ++i) worst_sd = std::max(worst_sd, std::abs(sd.xi[i] - sdf[i]));
    }
    return {worst_bf < 1e-4 && worst_cf < 1e-10 && worst_sd < 1e-10,
            "100 markets: max |solver - brute force| " + fmt(worst_bf) + ", max |solver - closed form| " + fmt(worst_cf) +
                ", per-state gamma max deviation " + fmt(worst_sd),
            dig.str()};
}

Outcome criterion11() {
    const ScenarioSpec spec = fixtures::theorem(1, 20000);
    const ConvergenceTable t = run_convergence(spec, {1.0 / 128, 1.0 / 256, 1.0 / 512, 1.0 / 1024});
    std::ostringstream d, dig;
    for (const auto& r : t.rows) {
        d << " dt=1/" << r.n_steps << ":" << fmt(r.rms);
        dig << fmt(r.rms) << ';';
    }
    dig << fmt(t.order);
    const bool ok = t.fitted && t.order >= 0.35 && t.order <= 0.65 && t.monotone;
    return {ok, "fitted order " + fmt(t.order) + (t.monotone ? ", monotone" : ", NOT monotone") + ";" + d.str(),
            dig.str()};
}

} // namespace

int main() {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                   criterion5, criterion6, criterion7, criterion8,
                                                   criterion9, criterion10, criterion11};
    std::vector<Outcome> out;
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what(), ""};
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        std::printf("criterion %2zu %s  %s  [%.1fs]\n", i + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        std::fflush(stdout);
        all = all && o.pass;
        out.push_back(std::move(o));
    }

    // Determinism: rerun the digest-bearing criteria with a different worker count.
    const unsigned before = worker_count();
    set_worker_count(before == 1 ? 3 : 1);
    std::size_t compared = 0, equal = 0;
    for (std::size_t i : {0u, 1u, 4u, 9u, 10u}) {
        Outcome again;
        try {
            again = criteria[i]();
        } catch (const std::exception& e) {
            again.digest = std::string("error: ") + e.what();
        }
        ++compared;
        equal += !out[i].digest.empty() && again.digest == out[i].digest && again.pass == out[i].pass;
    }
    set_worker_count(before);
    const bool det = equal == compared;
    std::printf("criterion 12 %s  %zu/%zu reruns (criteria 1, 2, 5, 10, 11; workers %u vs %u) bit-identical\n",
                det ? "PASS" : "FAIL", equal, compared, before == 1 ? 3u : 1u, before);
    all = all && det;
    std::printf("acceptance: %s  [%.1fs]\n", all ? "all criteria pass" : "some criteria FAIL",
                std::chrono::duration<double>(Clock::now() - start).count());
    return all ? 0 : 1;
}
