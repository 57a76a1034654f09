#include "sdu/estimators.hpp"

#include "sdu/errors.hpp"
#include "sdu/parallel.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace sdu {

std::string_view to_string(EstimateMethod m) noexcept {
    switch (m) {
    case EstimateMethod::plain: return "plain";
    case EstimateMethod::z_weighted: return "z_weighted";
    case EstimateMethod::nested: return "nested";
    case EstimateMethod::regression: return "regression";
    }
    return "?";
}

Estimate mc_mean(const std::vector<double>& values) {
    if (values.size() < 2) throw EstimatorError("mc_mean needs at least 2 values");
    double sum = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw EstimatorError("mc_mean got a non-finite value");
        sum += v;
    }
    const double n = static_cast<double>(values.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n), values.size(), EstimateMethod::plain};
}

Estimate q_expectation(const std::vector<double>& values, const std::vector<double>& weights) {
    if (values.size() != weights.size()) throw EstimatorError("q_expectation: values and weights differ in size");
    std::vector<double> zx(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(weights[i] > 0.0)) throw EstimatorError("q_expectation: non-positive density weight");
        zx[i] = weights[i] * values[i];
    }
    Estimate e = mc_mean(zx);
    e.method = EstimateMethod::z_weighted;
    return e;
}

OuterStates outer_states(const PathBatch& batch, std::size_t step) {
    OuterStates o;
    o.step = step;
    const std::size_t k = batch.record_of(step);
    o.states.resize(batch.n_paths());
    for (std::size_t p = 0; p < batch.n_paths(); ++p) o.states[p] = batch.state(p, k);
    o.available = field_w | field_logz | field_s;
    if (batch.has("gamma_inv")) o.available |= field_gamma;
    if (batch.has("V")) o.available |= field_v;
    if (batch.has_noise) o.available |= field_x;
    return o;
}

namespace {

std::string fields_to_string(unsigned mask) {
    static const char* names[] = {"W", "logZ", "gamma_inv", "V", "X", "S"};
    std::string out;
    for (int b = 0; b < 6; ++b)
        if (mask & (1u << b)) out += (out.empty() ? "" : ",") + std::string(names[b]);
    return out;
}

struct Accumulator {
    const std::vector<InnerTarget>* targets;
    std::vector<double> running;
    std::vector<double> sum, sumsq;

    void before(std::size_t, std::size_t, const PathState& s, const Coeffs& c) {
        for (std::size_t j = 0; j < targets->size(); ++j)
            if ((*targets)[j].running) running[j] += (*targets)[j].running(s, c, dt);
    }
    void finish(std::size_t, const PathState& s) {
        for (std::size_t j = 0; j < targets->size(); ++j) {
            double v = (*targets)[j].exponentiate ? std::exp(running[j]) : running[j];
            if ((*targets)[j].terminal) v += (*targets)[j].terminal(s);
            sum[j] += v;
            sumsq[j] += v * v;
            running[j] = 0.0;
        }
    }
    double dt = 0.0;
};

} // namespace

std::vector<ConditionalEstimate> conditional_q_expectation_nested(const ScenarioSpec& spec,
                                                                  const OuterStates& outer, std::size_t t_step,
                                                                  const std::vector<InnerTarget>& targets,
                                                                  const NestedOptions& opts) {
    if (opts.n_inner < 2) throw EstimatorError("nested estimator needs at least 2 inner paths");
    if (t_step <= outer.step) throw EstimatorError("nested estimator needs s < t");
    for (const auto& tg : targets) {
        const unsigned missing = tg.needs & ~outer.available;
        if (missing)
            throw EstimatorError("state insufficiency: target '" + tg.name + "' needs " +
                                 fields_to_string(missing) + ", not reconstructible from the outer state");
    }
    const TimeGrid grid = spec.grid();
    const Dynamics dyn(spec, grid);
    const std::size_t n_outer = outer.states.size();
    std::vector<ConditionalEstimate> out(targets.size());
    for (auto& ce : out) {
        ce.mean.assign(n_outer, 0.0);
        ce.se.assign(n_outer, 0.0);
        ce.method = EstimateMethod::nested;
        ce.n_inner = opts.n_inner;
    }
    const double m = static_cast<double>(opts.n_inner);
    parallel_for(
        n_outer,
        [&](std::size_t begin, std::size_t end) {
            for (std::size_t o = begin; o < end; ++o) {
                const NormalSource rng(opts.seed, inner_stream(opts.kind, opts.salt, o));
                Accumulator acc{&targets, std::vector<double>(targets.size(), 0.0),
                                std::vector<double>(targets.size(), 0.0), std::vector<double>(targets.size(), 0.0),
                                dyn.dt()};
                simulate_from(dyn, outer.states[o], outer.step, t_step, opts.n_inner, rng, opts.measure, opts.rule,
                              acc);
                for (std::size_t j = 0; j < targets.size(); ++j) {
                    const double mean = acc.sum[j] / m;
                    const double var = std::max(0.0, (acc.sumsq[j] - m * mean * mean) / (m - 1.0));
                    out[j].mean[o] = mean;
                    out[j].se[o] = std::sqrt(var / m);
                }
            }
        },
        1);
    return out;
}

ConditionalEstimate conditional_q_expectation_regression(const PathBatch& outer, std::size_t s_step,
                                                         std::size_t t_step, const std::vector<double>& target) {
    const std::size_t ks = outer.record_of(s_step);
    const std::size_t kt = outer.record_of(t_step);
    const std::size_t n = outer.n_paths();
    if (target.size() != n) throw EstimatorError("regression target size does not match the batch");

    std::vector<double> l(n), g(n);
    Eigen::VectorXd y(n);
    for (std::size_t p = 0; p < n; ++p) {
        const PathState& s = outer.state(p, ks);
        const PathState& t = outer.state(p, kt);
        l[p] = s.log_z;
        g[p] = s.log_g;
        y(static_cast<Eigen::Index>(p)) = target[p] * std::exp(t.log_z - s.log_z);
    }

    struct Column {
        std::string name;
        const std::vector<double>* x;
        int power;
    };
    std::vector<Column> cand;
    for (int k = 1; k <= 3; ++k) cand.push_back({"lnZ^" + std::to_string(k), &l, k});
    for (int k = 1; k <= 3; ++k) cand.push_back({"ln(1/gamma)^" + std::to_string(k), &g, k});

    // Standardise state variables so the cubic columns stay well conditioned.
    auto standardise = [n](const std::vector<double>& v, double& mu, double& sd) {
        mu = 0.0;
        for (double x : v) mu += x;
        mu /= static_cast<double>(n);
        double ss = 0.0;
        for (double x : v) ss += (x - mu) * (x - mu);
        sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    };
    double lm, ls, gm, gs;
    standardise(l, lm, ls);
    standardise(g, gm, gs);

    ConditionalEstimate ce;
    ce.method = EstimateMethod::regression;
    ce.basis.push_back("1");
    std::vector<Eigen::VectorXd> cols;
    cols.push_back(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)));
    for (const auto& c : cand) {
        const bool is_l = c.x == &l;
        const double mu = is_l ? lm : gm, sd = is_l ? ls : gs;
        if (!(sd > 1e-12 * (1.0 + std::abs(mu)))) continue;
        Eigen::VectorXd col(n);
        for (std::size_t p = 0; p < n; ++p)
            col(static_cast<Eigen::Index>(p)) = std::pow(((*c.x)[p] - mu) / sd, c.power);
        cols.push_back(std::move(col));
        ce.basis.push_back(c.name);
    }
    const Eigen::Index k = static_cast<Eigen::Index>(cols.size());
    if (static_cast<std::size_t>(k) >= n) throw EstimatorError("regression needs more paths than basis functions");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), k);
    for (Eigen::Index j = 0; j < k; ++j) X.col(j) = cols[static_cast<std::size_t>(j)];

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < k)
        throw EstimatorError("rank-deficient regression design (rank " + std::to_string(qr.rank()) + " of " +
                             std::to_string(k) + ")");
    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd fit = X * beta;
    const Eigen::VectorXd res = y - fit;
    const double dof = static_cast<double>(static_cast<Eigen::Index>(n) - k);
    const double s2 = res.squaredNorm() / dof;
    const double ybar = y.mean();
    const double sst = (y.array() - ybar).square().sum();
    ce.residual_sd = std::sqrt(s2);
    ce.r2 = sst > 0.0 ? 1.0 - res.squaredNorm() / sst : 1.0;

    const Eigen::MatrixXd xtx_inv = (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    ce.mean.resize(n);
    ce.se.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        const Eigen::Index i = static_cast<Eigen::Index>(p);
        ce.mean[p] = fit(i);
        const double q = X.row(i) * xtx_inv * X.row(i).transpose();
        ce.se[p] = std::sqrt(std::max(0.0, s2 * q));
    }
    return ce;
}

ConditionalEstimate conditional_q_expectation_regression(const PathBatch& outer, std::size_t s_step,
                                                         std::size_t t_step, const std::string& target_channel) {
    return conditional_q_expectation_regression(outer, s_step, t_step,
                                                outer.column(target_channel, outer.record_of(t_step)));
}

} // namespace sdu
