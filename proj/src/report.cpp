#include "sdu/report.hpp"

#include "sdu/paths.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <ostream>
#include <sstream>

namespace sdu {

using ojson = nlohmann::ordered_json;

namespace {

ojson num(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

ojson manifest_obj(const RunManifest& m) {
    ojson j;
    j["scenario"] = m.scenario_path;
    j["subcommand"] = m.subcommand;
    j["out_dir"] = m.out_dir;
    ojson o = ojson::object();
    for (const auto& [k, v] : m.overrides) o[k] = v;
    j["overrides"] = o;
    j["version"] = m.version;
    j["timestamp"] = m.timestamp;
    return j;
}

ojson report_obj(const CheckReport& r) {
    ojson j;
    j["name"] = r.name;
    j["scenario"] = r.scenario;
    j["statistic"] = num(r.statistic);
    j["band"] = num(r.band);
    j["verdict"] = std::string(to_string(r.verdict));
    j["reason"] = r.reason;
    j["n_paths"] = r.n_paths;
    j["seed"] = r.seed;
    j["wall_time_ms"] = std::round(r.wall_time_ms * 1000.0) / 1000.0;
    ojson stats = ojson::array();
    for (const auto& s : r.stats)
        stats.push_back({{"label", s.label}, {"value", num(s.value)}, {"band", num(s.band)}, {"se", num(s.se)},
                         {"within", s.within}});
    j["stats"] = stats;
    ojson d = ojson::object();
    for (const auto& [k, v] : r.diagnostics) d[k] = num(v);
    j["diagnostics"] = d;
    ojson n = ojson::object();
    for (const auto& [k, v] : r.notes) n[k] = v;
    j["notes"] = n;
    return j;
}

} // namespace

RunManifest RunManifest::now(std::string scenario_path, std::string subcommand, std::string out_dir) {
    RunManifest m;
    m.scenario_path = std::move(scenario_path);
    m.subcommand = std::move(subcommand);
    m.out_dir = std::move(out_dir);
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    m.timestamp = buf;
    return m;
}

std::string manifest_json(const RunManifest& m) { return manifest_obj(m).dump(2); }

std::string report_json(const CheckReport& r) { return report_obj(r).dump(2); }

std::string reports_json(const std::vector<CheckReport>& reports, const RunManifest& m, int exit_code) {
    ojson j;
    j["manifest"] = manifest_obj(m);
    j["exit_code"] = exit_code;
    ojson arr = ojson::array();
    for (const auto& r : reports) arr.push_back(report_obj(r));
    j["checks"] = arr;
    return j.dump(2) + "\n";
}

void write_detail_csv(const CheckReport& r, std::ostream& out) {
    for (std::size_t i = 0; i < r.detail_columns.size(); ++i) out << (i ? "," : "") << r.detail_columns[i];
    out << '\n';
    for (const auto& row : r.detail) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
        out << '\n';
    }
}

std::string report_digest(const std::vector<CheckReport>& reports) {
    std::ostringstream os;
    for (const auto& r : reports) {
        os << r.name << '|' << to_string(r.verdict) << '|' << format_double(r.statistic) << '|'
           << format_double(r.band);
        for (const auto& s : r.stats) os << '|' << s.label << '=' << format_double(s.value) << '/' << format_double(s.band);
        for (const auto& [k, v] : r.diagnostics) os << '|' << k << '=' << format_double(v);
        os << '\n';
    }
    return os.str();
}

} // namespace sdu
