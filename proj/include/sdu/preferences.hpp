#pragma once

#include "sdu/paths.hpp"
#include "sdu/scenario.hpp"

#include <string>
#include <vector>

namespace sdu {

// Utility of wealth x for one path state. Throws DomainError for x <= 0 under
// power/log (directly or as the base of mult_noise).
double utility_value(const UtilityFamily& family, double x, double gamma_inv, double noise_x);

// Per-path utility at record k of the batch, using the given wealth channel.
// StateDepExp reads gamma_inv, MultNoise reads X. Never clamps; non-positive
// wealth under power/log is reported with the offending paths.
std::vector<double> evaluate_utility(const UtilityFamily& family, const PathBatch& batch, std::size_t k,
                                     const std::string& wealth_channel);

// Fills channel X by log-space Euler driven by dW (under P) on a full batch.
void simulate_noise(const UtilityFamily& family, const ScenarioSpec& spec, PathBatch& batch);

} // namespace sdu
