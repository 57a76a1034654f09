#pragma once

#include "sdu/scenario.hpp"

#include <string>

namespace fixtures {

inline const char* kStochasticMu = R"j({"expr": "0.01 + 0.2*(0.2 + 0.1*tanh(w))", "bound": 1.0})j";

// theta = -(0.2 + 0.1 tanh(w)), sigma 0.2, r 0.01, gamma0 1, x 1.
inline std::string market(bool stochastic_theta) {
    return std::string(R"j("market": {"mu": )j") + (stochastic_theta ? kStochasticMu : "0.05") +
           R"j(, "sigma": 0.2, "r": 0.01})j";
}

inline std::string sim(std::size_t n_paths, std::uint64_t seed, std::size_t steps = 512) {
    return R"j("sim": {"x0": 1.0, "T": 1.0, "steps_per_unit": )j" + std::to_string(steps) +
           R"j(, "n_paths": )j" + std::to_string(n_paths) + R"j(, "seed": )j" + std::to_string(seed) + "}";
}

inline std::string doc(const std::string& id, bool stochastic, const std::string& risk, const std::string& utility,
                       std::size_t n_paths, std::uint64_t seed, const std::string& extra = "",
                       std::size_t steps = 512) {
    return "{\"id\": \"" + id + "\", " + market(stochastic) + ", \"risk\": " + risk + ", \"utility\": " + utility +
           ", " + sim(n_paths, seed, steps) + R"j(, "checks": {"pairs": [[0.5, 1.0]])j" + extra + "}}";
}

inline const char* kConsistentRisk = R"j({"gamma0": 1.0, "eta": 0.0, "beta": {"expr": "-theta/2", "bound": 1.0}})j";
inline const char* kZeroRisk = R"j({"gamma0": 1.0, "eta": 0.0, "beta": 0.0})j";
inline const char* kStateDep = R"j({"family": "state_dep_exp"})j";

inline sdu::ScenarioSpec theorem(std::uint64_t seed = 1, std::size_t n = 100000) {
    return sdu::parse_scenario(doc("consistent_pair", true, kConsistentRisk, kStateDep, n, seed));
}
inline sdu::ScenarioSpec beta_zero(std::uint64_t seed = 1, std::size_t n = 100000) {
    return sdu::parse_scenario(doc("beta_zero", true, kZeroRisk, kStateDep, n, seed));
}
inline sdu::ScenarioSpec det_exp(bool stochastic, std::uint64_t seed = 1, std::size_t n = 100000) {
    return sdu::parse_scenario(doc(stochastic ? "detexp_stochastic" : "detexp_constant", stochastic, kZeroRisk,
                                   R"j({"family": "det_exp", "params": {"gamma": 1.0}})j", n, seed));
}
inline sdu::ScenarioSpec forward_beta(const std::string& beta, std::uint64_t seed = 1, std::size_t n = 100000) {
    return sdu::parse_scenario(doc("forward_beta", true,
                                   R"j({"gamma0": 1.0, "eta": "forward", "beta": )j" + beta + "}", kStateDep, n, seed));
}
inline sdu::ScenarioSpec noise(const std::string& noise_beta, bool stochastic = true, std::uint64_t seed = 1,
                               std::size_t n = 100000) {
    return sdu::parse_scenario(doc("mult_noise", stochastic, kZeroRisk,
                                   R"j({"family": "mult_noise", "params": {"gamma": 1.0, "base": "det_exp", "beta": )j" +
                                       noise_beta + "}}",
                                   n, seed));
}
inline sdu::ScenarioSpec power(bool stochastic, std::uint64_t seed = 1, std::size_t n = 100000) {
    return sdu::parse_scenario(doc(stochastic ? "power_stochastic" : "power_constant", stochastic, kZeroRisk,
                                   R"j({"family": "power", "params": {"gamma": 0.5}})j", n, seed));
}

} // namespace fixtures
