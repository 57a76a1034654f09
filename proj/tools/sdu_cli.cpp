#include "sdu/sdu.h"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct Common {
    std::string scenario;
    std::string out;
    uint64_t seed = 0;
    uint64_t paths = 0;
    bool has_seed = false;
    bool has_paths = false;
};

int report(int code, char*& json) {
    if (json) {
        std::fputs(json, stdout);
        sdu_string_free(json);
        json = nullptr;
    }
    if (code != SDU_OK && code != SDU_FAIL && code != SDU_INCONCLUSIVE)
        std::fprintf(stderr, "error: %s\n", sdu_last_error());
    return code;
}

// Loads the scenario and applies --seed / --paths.
int open_scenario(const Common& c, sdu_scenario** s) {
    int rc = sdu_scenario_load(c.scenario.c_str(), s);
    if (rc == SDU_OK && c.has_seed) rc = sdu_scenario_set_seed(*s, c.seed);
    if (rc == SDU_OK && c.has_paths) rc = sdu_scenario_set_paths(*s, c.paths);
    if (rc != SDU_OK) std::fprintf(stderr, "error: %s\n", sdu_last_error());
    return rc;
}

double parse_step(const std::string& item) {
    const auto slash = item.find('/');
    std::size_t used = 0;
    if (slash == std::string::npos) {
        const double v = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        return v;
    }
    const std::string a = item.substr(0, slash), b = item.substr(slash + 1);
    const double num = std::stod(a, &used);
    if (used != a.size()) throw std::invalid_argument(item);
    const double den = std::stod(b, &used);
    if (used != b.size()) throw std::invalid_argument(item);
    return num / den;
}

std::vector<double> parse_list(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(parse_step(item));
    return out;
}

std::string read_market(const std::string& arg) {
    if (!arg.empty() && (arg.front() == '{' || arg.front() == ' ')) return arg;
    std::ifstream f(arg);
    if (!f) throw std::runtime_error("cannot read market file " + arg);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void add_common(CLI::App* app, Common& c, bool scenario_required) {
    auto* opt = app->add_option("--scenario", c.scenario, "scenario JSON file");
    if (scenario_required) opt->required();
    app->add_option("--out", c.out, "output directory");
    app->add_option("--seed", c.seed, "override the scenario seed")->each([&c](const std::string&) { c.has_seed = true; });
    app->add_option("--paths", c.paths, "override the number of paths")->each([&c](const std::string&) {
        c.has_paths = true;
    });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo engine for state-dependent exponential utility: simulate, check, oracle, convergence"};
    app.require_subcommand(1);
    unsigned workers = 0;
    app.add_option("--workers", workers, "worker threads (0: hardware concurrency)");
    app.set_version_flag("--version", sdu_version());

    Common sim, chk, conv;
    auto* c_sim = app.add_subcommand("simulate", "simulate paths; write channels.csv and summary.json");
    add_common(c_sim, sim, true);

    std::string checks, strategy;
    auto* c_chk = app.add_subcommand("check", "run verification checks; write report.json");
    add_common(c_chk, chk, true);
    c_chk->add_option("--checks", checks, "comma list: consistency, noise_consistency, forward, martingale, optimality_gap, budget");
    c_chk->add_option("--strategy", strategy, "wealth profile: auto, consistent, general, merton, power, log, noise");

    std::string market, utility = "exp", gammas = "1";
    std::string oracle_out;
    auto* c_orc = app.add_subcommand("oracle", "solve a finite-state static problem");
    c_orc->add_option("--market", market, "market JSON {\"p\": [...], \"q\": [...], \"x0\": ...} or a file")->required();
    c_orc->add_option("--utility", utility, "exp, power or log")->check(CLI::IsMember({"exp", "power", "log"}));
    c_orc->add_option("--gamma", gammas, "risk parameter; comma list gives one per state (exp)");
    c_orc->add_option("--out", oracle_out, "output directory");

    std::string ladder, conv_strategy = "auto";
    auto* c_conv = app.add_subcommand("convergence", "replication error against step size; write convergence.csv");
    add_common(c_conv, conv, true);
    c_conv->add_option("--dt-ladder", ladder, "comma list of step sizes, e.g. 1/128,1/256,1/512")->required();
    c_conv->add_option("--strategy", conv_strategy, "auto or zero")->check(CLI::IsMember({"auto", "zero"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        (void)app.exit(e);
        return SDU_E_SCENARIO;
    }
    sdu_set_workers(workers);

    char* json = nullptr;
    sdu_scenario* s = nullptr;
    int rc = SDU_OK;
    try {
        if (c_sim->parsed()) {
            if ((rc = open_scenario(sim, &s)) != SDU_OK) return rc;
            rc = sdu_simulate(s, sim.out.empty() ? nullptr : sim.out.c_str(), &json);
            rc = report(rc, json);
        } else if (c_chk->parsed()) {
            if ((rc = open_scenario(chk, &s)) != SDU_OK) return rc;
            rc = sdu_check(s, checks.empty() ? nullptr : checks.c_str(), strategy.empty() ? nullptr : strategy.c_str(),
                                  chk.out.empty() ? nullptr : chk.out.c_str(), &json);
            rc = report(rc, json);
        } else if (c_orc->parsed()) {
            const std::vector<double> g = parse_list(gammas);
            const std::string text = read_market(market);
            rc = sdu_oracle(text.c_str(), utility.c_str(), g.data(), g.size(),
                                   oracle_out.empty() ? nullptr : oracle_out.c_str(), &json);
            rc = report(rc, json);
        } else if (c_conv->parsed()) {
            const std::vector<double> l = parse_list(ladder);
            if ((rc = open_scenario(conv, &s)) != SDU_OK) return rc;
            rc = sdu_convergence(s, l.data(), l.size(), conv_strategy.c_str(),
                                        conv.out.empty() ? nullptr : conv.out.c_str(), &json);
            rc = report(rc, json);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        rc = SDU_E_SCENARIO;
    }
    sdu_scenario_free(s);
    return rc;
}
