#include "sdu/preferences.hpp"

#include "sdu/errors.hpp"

#include <cmath>

namespace sdu {

namespace {

double base_utility(UtilityTag tag, double gamma, double x) {
    switch (tag) {
    case UtilityTag::det_exp: return -std::exp(-gamma * x) / gamma;
    case UtilityTag::power:
        if (!(x > 0.0)) throw DomainError("power utility needs positive wealth");
        return std::pow(x, gamma) / gamma;
    case UtilityTag::log:
        if (!(x > 0.0)) throw DomainError("log utility needs positive wealth");
        return std::log(x);
    default: break;
    }
    throw DomainError("not a base utility");
}

} // namespace

double utility_value(const UtilityFamily& family, double x, double gamma_inv, double noise_x) {
    switch (family.tag) {
    case UtilityTag::state_dep_exp: return -gamma_inv * std::exp(-x / gamma_inv);
    case UtilityTag::det_exp:
    case UtilityTag::power:
    case UtilityTag::log: return base_utility(family.tag, family.gamma, x);
    case UtilityTag::mult_noise: return base_utility(family.base, family.gamma, x) * noise_x;
    }
    return 0.0;
}

std::vector<double> evaluate_utility(const UtilityFamily& family, const PathBatch& batch, std::size_t k,
                                     const std::string& wealth_channel) {
    const std::size_t n = batch.n_paths();
    const auto& w = batch.channel(wealth_channel);
    const std::size_t nrec = batch.n_records();
    const std::vector<double>* g = family.tag == UtilityTag::state_dep_exp ? &batch.channel("gamma_inv") : nullptr;
    const std::vector<double>* x = family.tag == UtilityTag::mult_noise ? &batch.channel("X") : nullptr;
    const bool positive = family.tag == UtilityTag::power || family.tag == UtilityTag::log ||
                          (family.tag == UtilityTag::mult_noise && family.base == UtilityTag::power);
    if (positive) {
        std::vector<std::size_t> bad;
        for (std::size_t p = 0; p < n; ++p)
            if (!(w[p * nrec + k] > 0.0)) bad.push_back(p);
        if (!bad.empty()) {
            std::string list;
            for (std::size_t i = 0; i < bad.size() && i < 10; ++i) list += (i ? "," : "") + std::to_string(bad[i]);
            if (bad.size() > 10) list += ",...";
            throw DomainError(std::to_string(bad.size()) + " path(s) with non-positive wealth under " +
                              std::string(to_string(family.tag)) + " utility: " + list);
        }
    }
    std::vector<double> out(n);
    for (std::size_t p = 0; p < n; ++p) {
        const std::size_t j = p * nrec + k;
        out[p] = utility_value(family, w[j], g ? (*g)[j] : 1.0, x ? (*x)[j] : 1.0);
    }
    return out;
}

void simulate_noise(const UtilityFamily& family, const ScenarioSpec& spec, PathBatch& batch) {
    if (family.tag != UtilityTag::mult_noise) throw RegimeError("simulate_noise needs the mult_noise family");
    if (!batch.full() || !batch.has("dW")) throw Error("simulate_noise needs a full batch with Brownian channels");
    const std::size_t nrec = batch.n_records();
    const std::size_t n = batch.grid().n_steps;
    const double dt = batch.grid().dt();
    const auto& dw = batch.channel("dW");
    auto& X = batch.channel("X");
    for (std::size_t p = 0; p < batch.n_paths(); ++p) {
        double lx = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            PathState& s = batch.state(p, i);
            s.log_x = lx;
            X[p * nrec + i] = std::exp(lx);
            if (i == n) break;
            const double t = batch.grid().time(i);
            const double th = spec.theta(t, s.w);
            const double b = family.noise_beta(t, s.w, th);
            lx += -0.5 * b * b * dt + b * dw[p * nrec + i];
            if (!std::isfinite(lx)) throw NumericalAbort(p, i + 1, "non-finite noise");
        }
    }
    batch.has_noise = true;
}

} // namespace sdu
