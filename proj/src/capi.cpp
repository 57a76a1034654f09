#include "sdu/sdu.h"

#include "sdu/errors.hpp"
#include "sdu/parallel.hpp"
#include "sdu/runner.hpp"

#include <cstdlib>
#include <cstring>
#include <sstream>

struct sdu_scenario {
    sdu::ScenarioSpec spec;
    std::string path;
    std::map<std::string, std::string> overrides;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

char* dup(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p) std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

template <class Fn>
int guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        return fn();
    } catch (const sdu::Error& e) {
        return fail(sdu::exit_code_for_exception(e), e.what());
    } catch (const std::bad_alloc&) {
        return fail(SDU_E_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(SDU_E_INTERNAL, e.what());
    }
}

int emit(const sdu::CommandResult& r, char** out) {
    if (out) *out = dup(r.json);
    return r.exit_code;
}

sdu::RunManifest manifest(const sdu_scenario* s, const char* sub, const char* out_dir) {
    sdu::RunManifest m = sdu::RunManifest::now(s ? s->path : "", sub, out_dir ? out_dir : "");
    if (s) m.overrides = s->overrides;
    return m;
}

std::vector<std::string> split(const char* list) {
    std::vector<std::string> out;
    if (!list) return out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

} // namespace

extern "C" {

const char* sdu_version(void) { return sdu::kVersion; }

const char* sdu_last_error(void) { return g_last_error.c_str(); }

void sdu_string_free(char* s) { std::free(s); }

void sdu_set_workers(unsigned n) { sdu::set_worker_count(n); }

int sdu_scenario_parse(const char* json, sdu_scenario** out) {
    if (!json || !out) return fail(SDU_E_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&] {
        auto h = std::make_unique<sdu_scenario>();
        h->spec = sdu::parse_scenario(json);
        *out = h.release();
        return SDU_OK;
    });
}

int sdu_scenario_load(const char* path, sdu_scenario** out) {
    if (!path || !out) return fail(SDU_E_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&] {
        auto h = std::make_unique<sdu_scenario>();
        h->spec = sdu::load_scenario(path);
        h->path = path;
        *out = h.release();
        return SDU_OK;
    });
}

void sdu_scenario_free(sdu_scenario* s) { delete s; }

int sdu_scenario_set_seed(sdu_scenario* s, uint64_t seed) {
    if (!s) return fail(SDU_E_ARGUMENT, "null scenario");
    s->spec.seed = seed;
    s->overrides["seed"] = std::to_string(seed);
    return SDU_OK;
}

int sdu_scenario_set_paths(sdu_scenario* s, uint64_t n_paths) {
    if (!s) return fail(SDU_E_ARGUMENT, "null scenario");
    if (n_paths < 2) return fail(SDU_E_SCENARIO, "n_paths must be at least 2");
    s->spec.n_paths = static_cast<std::size_t>(n_paths);
    s->overrides["n_paths"] = std::to_string(n_paths);
    return SDU_OK;
}

int sdu_scenario_to_json(const sdu_scenario* s, char** out) {
    if (!s || !out) return fail(SDU_E_ARGUMENT, "null argument");
    return guarded([&] {
        *out = dup(sdu::serialize_scenario(s->spec));
        return SDU_OK;
    });
}

int sdu_simulate(const sdu_scenario* s, const char* out_dir, char** out) {
    if (!s) return fail(SDU_E_ARGUMENT, "null scenario");
    return guarded([&] { return emit(sdu::cmd_simulate(s->spec, manifest(s, "simulate", out_dir)), out); });
}

int sdu_check(const sdu_scenario* s, const char* checks, const char* strategy, const char* out_dir, char** out) {
    if (!s) return fail(SDU_E_ARGUMENT, "null scenario");
    return guarded([&] {
        sdu::CheckOptions opts;
        if (strategy) opts.strategy = strategy;
        sdu::RunManifest m = manifest(s, "check", out_dir);
        if (checks) m.overrides["checks"] = checks;
        if (strategy) m.overrides["strategy"] = strategy;
        return emit(sdu::cmd_check(s->spec, split(checks), opts, m), out);
    });
}

int sdu_oracle(const char* market_json, const char* utility, const double* gammas, size_t n_gammas,
               const char* out_dir, char** out) {
    if (!market_json || !utility) return fail(SDU_E_ARGUMENT, "null argument");
    return guarded([&] {
        const sdu::FiniteMarket market = sdu::parse_market(market_json);
        const std::string u = utility;
        const auto gamma_at = [&](std::size_t i) {
            if (!gammas || i >= n_gammas) throw sdu::DomainError("utility needs a gamma");
            return gammas[i];
        };
        sdu::OracleUtility ou = sdu::OracleUtility::log();
        if (u == "exp") {
            if (n_gammas > 1) {
                if (n_gammas != market.size()) throw sdu::DomainError("per-state gamma count does not match the market");
                ou = sdu::OracleUtility::state_exponential(std::vector<double>(gammas, gammas + n_gammas));
            } else {
                ou = sdu::OracleUtility::exponential(gamma_at(0));
            }
        } else if (u == "power") {
            ou = sdu::OracleUtility::power(gamma_at(0));
        } else if (u != "log") {
            throw sdu::DomainError("utility must be exp, power or log");
        }
        sdu::RunManifest m = manifest(nullptr, "oracle", out_dir);
        m.overrides["utility"] = u;
        return emit(sdu::cmd_oracle(market, ou, m), out);
    });
}

int sdu_convergence(const sdu_scenario* s, const double* ladder, size_t n, const char* strategy,
                    const char* out_dir, char** out) {
    if (!s || (n && !ladder)) return fail(SDU_E_ARGUMENT, "null argument");
    return guarded([&] {
        sdu::RunManifest m = manifest(s, "convergence", out_dir);
        const std::string strat = strategy ? strategy : "auto";
        m.overrides["strategy"] = strat;
        return emit(sdu::cmd_convergence(s->spec, std::vector<double>(ladder, ladder + n), strat, m), out);
    });
}

} // extern "C"
