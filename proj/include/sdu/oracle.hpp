#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace sdu {

// Discrete probability space with P- and Q-weights and a budget x0.
struct FiniteMarket {
    std::vector<double> p;
    std::vector<double> q;
    double x0 = 0.0;

    // Validates positivity and normalisation (1e-12); throws DomainError.
    static FiniteMarket make(std::vector<double> p, std::vector<double> q, double x0);
    std::size_t size() const noexcept { return p.size(); }
    double density(std::size_t i) const noexcept { return q[i] / p[i]; }
};

// Strictly concave utility with invertible marginal; exponential may carry a
// risk aversion per state.
class OracleUtility {
public:
    enum class Kind { exponential, power, log };

    static OracleUtility exponential(double gamma);
    static OracleUtility state_exponential(std::vector<double> gammas);
    static OracleUtility power(double gamma);
    static OracleUtility log();

    Kind kind() const noexcept { return kind_; }
    double gamma(std::size_t state) const noexcept { return gammas_.empty() ? gamma_ : gammas_[state]; }
    bool per_state() const noexcept { return !gammas_.empty(); }

    double value(std::size_t state, double x) const noexcept;
    // (u')^{-1}; throws DomainError when the marginal is not invertible.
    double inverse_marginal(std::size_t state, double y) const;
    void require_invertible(std::size_t n_states) const;

private:
    Kind kind_ = Kind::exponential;
    double gamma_ = 1.0;
    std::vector<double> gammas_;
};

struct LagrangianSolution {
    std::vector<double> xi;
    double lambda = 0.0;
    double residual = 0.0;  // sum q_i xi_i - x0
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    std::size_t iterations = 0;
};

// xi_i = F(lambda Y_i) with lambda from the budget equation by bracketed
// bisection in log lambda. Throws Error on bracketing failure (with the
// scanned range) or when the residual stays above 1e-10.
LagrangianSolution solve_lagrangian(const FiniteMarket& m, const OracleUtility& u);

struct BruteForceGrid {
    double span = 10.0;
    std::size_t points = 2001;
    std::size_t rounds = 6;  // span shrinks by `factor` after each round
    double factor = 10.0;
    std::size_t max_sweeps = 10000;
};

struct BruteForceResult {
    std::vector<double> xi;
    double objective = 0.0;
    std::size_t rounds = 0;
    std::size_t sweeps = 0;
    double final_span = 0.0;
    double final_step = 0.0;
};

// Coordinate-grid maximisation of sum p_i u(xi_i) on the budget hyperplane:
// n-1 free coordinates, the last one from the budget.
BruteForceResult brute_force(const FiniteMarket& m, const OracleUtility& u, const BruteForceGrid& grid = {});

double expected_utility(const FiniteMarket& m, const OracleUtility& u, const std::vector<double>& xi);
double budget_residual(const FiniteMarket& m, const std::vector<double>& xi);

// xi_i = x0 + (E_Q[ln Y] - ln Y_i) / gamma.
std::vector<double> closed_form_exponential(const FiniteMarket& m, double gamma, double x0);
// Per-state gamma: xi_i = g_i (c (x0 + sum_j q_j g_j ln Y_j) - ln Y_i), g = 1/gamma, c = 1/E_Q[g].
std::vector<double> closed_form_state_exponential(const FiniteMarket& m, const std::vector<double>& gammas, double x0);
// xi_i = x0 Y_i^b / E_Q[Y^b], b = -1/(1-gamma).
std::vector<double> closed_form_power(const FiniteMarket& m, double gamma, double x0);

// {"p": [...], "q": [...], "x0": ...}; throws ParseError / DomainError.
FiniteMarket parse_market(std::string_view json_text);

} // namespace sdu
