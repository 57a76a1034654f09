#include "sdu/oracle.hpp"

#include "sdu/errors.hpp"
#include "sdu/parallel.hpp"
#include "sdu/paths.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <numeric>

namespace sdu {

FiniteMarket FiniteMarket::make(std::vector<double> p, std::vector<double> q, double x0) {
    if (p.empty() || p.size() != q.size()) throw DomainError("market needs equal-length non-empty p and q");
    if (!std::isfinite(x0)) throw DomainError("market budget must be finite");
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] > 0.0) || !(q[i] > 0.0) || !std::isfinite(p[i]) || !std::isfinite(q[i]))
            throw DomainError("market weights must be strictly positive (state " + std::to_string(i) + ")");
        sp += p[i];
        sq += q[i];
    }
    if (std::abs(sp - 1.0) > 1e-12) throw DomainError("P-weights sum to " + format_double(sp));
    if (std::abs(sq - 1.0) > 1e-12) throw DomainError("Q-weights sum to " + format_double(sq));
    for (std::size_t i = 0; i < p.size(); ++i)
        if (!std::isfinite(q[i] / p[i])) throw DomainError("density not finite");
    return FiniteMarket{std::move(p), std::move(q), x0};
}

OracleUtility OracleUtility::exponential(double gamma) {
    OracleUtility u;
    u.kind_ = Kind::exponential;
    u.gamma_ = gamma;
    return u;
}

OracleUtility OracleUtility::state_exponential(std::vector<double> gammas) {
    OracleUtility u;
    u.kind_ = Kind::exponential;
    u.gammas_ = std::move(gammas);
    return u;
}

OracleUtility OracleUtility::power(double gamma) {
    OracleUtility u;
    u.kind_ = Kind::power;
    u.gamma_ = gamma;
    return u;
}

OracleUtility OracleUtility::log() {
    OracleUtility u;
    u.kind_ = Kind::log;
    u.gamma_ = 0.0;
    return u;
}

double OracleUtility::value(std::size_t state, double x) const noexcept {
    const double g = gamma(state);
    switch (kind_) {
    case Kind::exponential: return -std::exp(-g * x) / g;
    case Kind::power: return x > 0.0 ? std::pow(x, g) / g : -std::numeric_limits<double>::infinity();
    case Kind::log: return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
    }
    return 0.0;
}

void OracleUtility::require_invertible(std::size_t n_states) const {
    if (per_state() && gammas_.size() != n_states)
        throw DomainError("per-state gamma count does not match the market");
    for (std::size_t i = 0; i < n_states; ++i) {
        const double g = gamma(i);
        if (kind_ == Kind::exponential && !(g > 0.0 && std::isfinite(g)))
            throw DomainError("exponential marginal not invertible for gamma <= 0");
        if (kind_ == Kind::power && !(g < 1.0 && g != 0.0))
            throw DomainError("power marginal not invertible unless gamma < 1, gamma != 0");
    }
}

double OracleUtility::inverse_marginal(std::size_t state, double y) const {
    if (!(y > 0.0)) throw DomainError("marginal utility argument must be positive");
    const double g = gamma(state);
    switch (kind_) {
    case Kind::exponential: return -std::log(y) / g;
    case Kind::power: return std::pow(y, 1.0 / (g - 1.0));
    case Kind::log: return 1.0 / y;
    }
    return 0.0;
}

double expected_utility(const FiniteMarket& m, const OracleUtility& u, const std::vector<double>& xi) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m.p[i] * u.value(i, xi[i]);
    return s;
}

double budget_residual(const FiniteMarket& m, const std::vector<double>& xi) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m.q[i] * xi[i];
    return s - m.x0;
}

LagrangianSolution solve_lagrangian(const FiniteMarket& m, const OracleUtility& u) {
    u.require_invertible(m.size());
    const auto xi_of = [&](double log_l) {
        std::vector<double> xi(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) xi[i] = u.inverse_marginal(i, std::exp(log_l) * m.density(i));
        return xi;
    };
    const auto excess = [&](double log_l) { return budget_residual(m, xi_of(log_l)); };

    // The budget map is decreasing in lambda.
    double lo = std::log(1e-8), hi = std::log(1e8);
    const double lo_limit = std::log(1e-300), hi_limit = std::log(1e300);
    while (excess(lo) < 0.0) {
        if (lo <= lo_limit)
            throw Error("lambda bracketing failed: budget not reached on [" + format_double(std::exp(lo)) + ", " +
                        format_double(std::exp(hi)) + "]");
        lo = std::max(lo_limit, lo * 2.0);
    }
    while (excess(hi) > 0.0) {
        if (hi >= hi_limit)
            throw Error("lambda bracketing failed: budget not reached on [" + format_double(std::exp(lo)) + ", " +
                        format_double(std::exp(hi)) + "]");
        hi = std::min(hi_limit, hi * 2.0);
    }

    LagrangianSolution sol;
    sol.bracket_lo = std::exp(lo);
    sol.bracket_hi = std::exp(hi);
    for (; sol.iterations < 400; ++sol.iterations) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double e = excess(mid);
        if (e == 0.0) {
            lo = hi = mid;
            break;
        }
        (e > 0.0 ? lo : hi) = mid;
    }
    const double rlo = excess(lo), rhi = excess(hi);
    const double best = std::abs(rlo) <= std::abs(rhi) ? lo : hi;
    sol.lambda = std::exp(best);
    sol.xi = xi_of(best);
    sol.residual = budget_residual(m, sol.xi);
    if (!(std::abs(sol.residual) < 1e-10))
        throw Error("budget residual " + format_double(sol.residual) + " above 1e-10 after root finding");
    return sol;
}

BruteForceResult brute_force(const FiniteMarket& m, const OracleUtility& u, const BruteForceGrid& grid) {
    const std::size_t n = m.size();
    BruteForceResult res;
    std::vector<double> xi(n, m.x0);
    res.xi = xi;
    res.objective = expected_utility(m, u, xi);
    if (n == 1) return res;

    const auto complete = [&](std::vector<double>& x) {
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) s += m.q[i] * x[i];
        x[n - 1] = (m.x0 - s) / m.q[n - 1];
    };
    const std::size_t pts = std::max<std::size_t>(grid.points, 3);
    std::vector<double> scores(pts);
    double span = grid.span;
    for (std::size_t round = 0; round < grid.rounds; ++round, span /= grid.factor) {
        const double step = 2.0 * span / static_cast<double>(pts - 1);
        // Scans are centred at the round's starting point.
        const std::vector<double> centre = xi;
        bool improved = true;
        while (improved && res.sweeps < grid.max_sweeps) {
            improved = false;
            ++res.sweeps;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                parallel_for(pts, [&](std::size_t b, std::size_t e) {
                    std::vector<double> trial = xi;
                    for (std::size_t k = b; k < e; ++k) {
                        trial[i] = centre[i] - span + step * static_cast<double>(k);
                        complete(trial);
                        scores[k] = expected_utility(m, u, trial);
                    }
                });
                std::size_t best = pts;
                double best_score = res.objective;
                for (std::size_t k = 0; k < pts; ++k)
                    if (scores[k] > best_score) {
                        best_score = scores[k];
                        best = k;
                    }
                if (best < pts) {
                    xi[i] = centre[i] - span + step * static_cast<double>(best);
                    complete(xi);
                    res.objective = best_score;
                    improved = true;
                }
            }
        }
        res.rounds = round + 1;
        res.final_span = span;
        res.final_step = step;
    }
    res.xi = xi;
    return res;
}

std::vector<double> closed_form_exponential(const FiniteMarket& m, double gamma, double x0) {
    if (!(gamma > 0.0)) throw DomainError("exponential gamma must be positive");
    double el = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) el += m.q[i] * std::log(m.density(i));
    std::vector<double> xi(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) xi[i] = x0 + (el - std::log(m.density(i))) / gamma;
    return xi;
}

std::vector<double> closed_form_state_exponential(const FiniteMarket& m, const std::vector<double>& gammas,
                                                  double x0) {
    if (gammas.size() != m.size()) throw DomainError("per-state gamma count does not match the market");
    double eg = 0.0, egl = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!(gammas[i] > 0.0)) throw DomainError("exponential gamma must be positive");
        eg += m.q[i] / gammas[i];
        egl += m.q[i] / gammas[i] * std::log(m.density(i));
    }
    const double c = 1.0 / eg;
    std::vector<double> xi(m.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        xi[i] = (c * (x0 + egl) - std::log(m.density(i))) / gammas[i];
    return xi;
}

std::vector<double> closed_form_power(const FiniteMarket& m, double gamma, double x0) {
    if (!(gamma < 1.0 && gamma != 0.0)) throw DomainError("power gamma must be < 1 and nonzero");
    const double b = -1.0 / (1.0 - gamma);
    double h = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) h += m.q[i] * std::pow(m.density(i), b);
    std::vector<double> xi(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) xi[i] = x0 * std::pow(m.density(i), b) / h;
    return xi;
}

FiniteMarket parse_market(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("market", 0, std::string("market JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("market", 0, "market must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "p" && it.key() != "q" && it.key() != "x0")
            throw ParseError(it.key(), 0, "unknown market key '" + it.key() + "'");
    const auto vec = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_array()) throw ParseError(key, 0, std::string("market needs array '") + key + "'");
        std::vector<double> v;
        for (const auto& x : j[key]) {
            if (!x.is_number()) throw ParseError(key, 0, std::string("non-numeric entry in '") + key + "'");
            v.push_back(x.get<double>());
        }
        return v;
    };
    double x0 = 0.0;
    if (j.contains("x0")) {
        if (!j["x0"].is_number()) throw ParseError("x0", 0, "x0 must be a number");
        x0 = j["x0"].get<double>();
    }
    return FiniteMarket::make(vec("p"), vec("q"), x0);
}

} // namespace sdu
