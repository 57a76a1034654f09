#pragma once

#include "sdu/checks.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace sdu {

inline constexpr const char* kVersion = "0.1.0";

struct RunManifest {
    std::string scenario_path;
    std::string subcommand;
    std::string out_dir;
    std::map<std::string, std::string> overrides;
    std::string version = kVersion;
    std::string timestamp;  // ISO-8601 UTC; the only run-dependent field besides wall times

    static RunManifest now(std::string scenario_path, std::string subcommand, std::string out_dir);
};

std::string manifest_json(const RunManifest& m);
std::string report_json(const CheckReport& r);
// {"manifest": ..., "exit_code": ..., "checks": [...]}
std::string reports_json(const std::vector<CheckReport>& reports, const RunManifest& m, int exit_code);
void write_detail_csv(const CheckReport& r, std::ostream& out);
// Stable digest over verdicts and every printed statistic, wall times excluded.
std::string report_digest(const std::vector<CheckReport>& reports);

} // namespace sdu
