#include "sdu/scenario.hpp"

#include "sdu/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace sdu {

using nlohmann::json;

CoefficientFn CoefficientFn::constant(double value) {
    CoefficientFn c;
    c.value_ = value;
    c.bound_ = std::abs(value);
    c.is_const_ = true;
    c.form_ = CoefficientForm::constant;
    return c;
}

CoefficientFn CoefficientFn::expression(std::string_view source, double bound, VarSet allowed) {
    CoefficientFn c;
    c.expr_ = Expression::compile(source, allowed);
    c.bound_ = bound;
    if (c.expr_.is_constant()) {
        c.is_const_ = true;
        c.value_ = c.expr_.eval(0.0, 0.0, 0.0);
        c.form_ = CoefficientForm::constant;
    } else {
        c.is_const_ = false;
        c.form_ = (c.expr_.uses(Var::w) || c.expr_.uses(Var::theta)) ? CoefficientForm::state_fn
                                                                      : CoefficientForm::time_fn;
    }
    return c;
}

std::string_view to_string(UtilityTag tag) noexcept {
    switch (tag) {
    case UtilityTag::state_dep_exp: return "state_dep_exp";
    case UtilityTag::det_exp: return "det_exp";
    case UtilityTag::power: return "power";
    case UtilityTag::log: return "log";
    case UtilityTag::mult_noise: return "mult_noise";
    }
    return "?";
}

std::size_t TimeGrid::index_of(double t) const {
    const double x = t / dt();
    const double r = std::round(x);
    if (std::abs(x - r) > 1e-9 * std::max(1.0, std::abs(x)) || r < 0 || r > static_cast<double>(n_steps))
        throw DomainError("time " + std::to_string(t) + " is not a grid point (dt = " + std::to_string(dt()) +
                          ")");
    return static_cast<std::size_t>(r);
}

TimeGrid ScenarioSpec::grid() const {
    TimeGrid g;
    g.T = T;
    g.n_steps = static_cast<std::size_t>(std::llround(T * static_cast<double>(steps_per_unit)));
    if (g.n_steps == 0) g.n_steps = 1;
    return g;
}

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "id",          "market.mu",      "market.sigma",   "market.r",          "risk.gamma0",
        "risk.eta",    "risk.beta",      "utility.family", "utility.params",    "sim.x0",
        "sim.T",       "sim.steps_per_unit", "sim.n_paths", "sim.seed",         "checks.pairs",
        "checks.nested"};
    return keys;
}

int line_of_offset(std::string_view text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Best-effort line lookup for a dotted key: full key first, then its last segment.
int line_of_key(std::string_view text, const std::string& key) {
    auto find = [&](const std::string& needle) -> int {
        const auto pos = text.find("\"" + needle + "\"");
        return pos == std::string_view::npos ? -1 : line_of_offset(text, pos);
    };
    if (int l = find(key); l > 0) return l;
    const auto dot = key.rfind('.');
    if (dot != std::string::npos) return find(key.substr(dot + 1));
    return -1;
}

class Reader {
public:
    Reader(std::string_view text, json flat) : text_(text), flat_(std::move(flat)) {}

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        const int line = line_of_key(text_, key);
        std::string where = "key '" + key + "'";
        if (line > 0) where += " (line " + std::to_string(line) + ")";
        throw ParseError(key, line, where + ": " + msg);
    }

    [[noreturn]] void domain(const std::string& key, const std::string& msg) const {
        const int line = line_of_key(text_, key);
        std::string where = "key '" + key + "'";
        if (line > 0) where += " (line " + std::to_string(line) + ")";
        throw DomainError(where + ": " + msg);
    }

    bool has(const std::string& key) const { return flat_.contains(key); }
    const json& get(const std::string& key) const { return flat_.at(key); }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            fail(key, "required key is missing");
        }
        const json& v = get(key);
        if (!v.is_number()) fail(key, "expected a number");
        return v.get<double>();
    }

    std::uint64_t integer(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const json& v = get(key);
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer()) {
            if (v.get<std::int64_t>() < 0) domain(key, "must be non-negative");
            return static_cast<std::uint64_t>(v.get<std::int64_t>());
        }
        fail(key, "expected an integer");
    }

    CoefficientFn coefficient(const std::string& key, const json& v, VarSet allowed) const {
        if (v.is_number()) return CoefficientFn::constant(v.get<double>());
        if (v.is_object()) {
            if (!v.contains("expr") || !v["expr"].is_string()) fail(key, "expression object needs a string 'expr'");
            if (!v.contains("bound") || !v["bound"].is_number())
                fail(key, "expression coefficient needs a numeric 'bound'");
            const double bound = v["bound"].get<double>();
            if (!(bound > 0.0)) domain(key, "bound must be positive");
            try {
                return CoefficientFn::expression(v["expr"].get<std::string>(), bound, allowed);
            } catch (const ParseError& e) {
                fail(key, e.what());
            }
        }
        fail(key, "expected a number or {\"expr\": ..., \"bound\": ...}");
    }

    CoefficientFn coefficient(const std::string& key, VarSet allowed, std::optional<double> fallback) const {
        if (!has(key)) {
            if (fallback) return CoefficientFn::constant(*fallback);
            fail(key, "required key is missing");
        }
        return coefficient(key, get(key), allowed);
    }

private:
    std::string_view text_;
    json flat_;
};

void flatten(const json& node, const std::string& prefix, json& out, std::string_view text) {
    for (const auto& [k, v] : node.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (known_keys().count(key)) {
            out[key] = v;
        } else if (v.is_object()) {
            flatten(v, key, out, text);
        } else {
            const int line = line_of_key(text, key);
            throw ParseError(key, line,
                             "unknown key '" + key + "'" + (line > 0 ? " (line " + std::to_string(line) + ")" : ""));
        }
    }
}

UtilityTag parse_tag(const Reader& rd, const std::string& key, const std::string& s) {
    if (s == "state_dep_exp") return UtilityTag::state_dep_exp;
    if (s == "det_exp") return UtilityTag::det_exp;
    if (s == "power") return UtilityTag::power;
    if (s == "log") return UtilityTag::log;
    if (s == "mult_noise") return UtilityTag::mult_noise;
    rd.fail(key, "unknown utility family '" + s + "'");
}

constexpr VarSet kMarketVars{true, true, false};
constexpr VarSet kRiskVars{true, true, true};
constexpr VarSet kTimeVars{true, false, false};

} // namespace

ScenarioSpec parse_scenario(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const int line = line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError("", line, "malformed document at line " + std::to_string(line) + ": " + e.what());
    }
    if (!doc.is_object()) throw ParseError("", 1, "document must be a JSON object");
    json flat = json::object();
    flatten(doc, "", flat, text);
    const Reader rd(text, flat);

    ScenarioSpec s;
    if (rd.has("id")) {
        if (!rd.get("id").is_string()) rd.fail("id", "expected a string");
        s.id = rd.get("id").get<std::string>();
    }
    s.mu = rd.coefficient("market.mu", kMarketVars, std::nullopt);
    s.sigma = rd.coefficient("market.sigma", kMarketVars, std::nullopt);
    s.r = rd.number("market.r");
    s.gamma0 = rd.number("risk.gamma0", 1.0);

    if (rd.has("risk.eta") && rd.get("risk.eta").is_string()) {
        if (rd.get("risk.eta").get<std::string>() != "forward")
            rd.fail("risk.eta", "string value must be \"forward\"");
        s.eta_mode = EtaMode::forward;
        s.eta = CoefficientFn::constant(0.0);
    } else {
        s.eta = rd.coefficient("risk.eta", kRiskVars, 0.0);
    }
    s.beta = rd.coefficient("risk.beta", kRiskVars, 0.0);

    if (rd.has("utility.family")) {
        if (!rd.get("utility.family").is_string()) rd.fail("utility.family", "expected a string");
        s.utility.tag = parse_tag(rd, "utility.family", rd.get("utility.family").get<std::string>());
    }
    s.utility.gamma = s.gamma0;
    if (rd.has("utility.params")) {
        const json& p = rd.get("utility.params");
        if (!p.is_object()) rd.fail("utility.params", "expected an object");
        for (const auto& [k, v] : p.items()) {
            const std::string key = "utility.params." + k;
            if (k == "gamma") {
                if (!v.is_number()) rd.fail(key, "expected a number");
                s.utility.gamma = v.get<double>();
            } else if (k == "base") {
                if (!v.is_string()) rd.fail(key, "expected a string");
                s.utility.base = parse_tag(rd, key, v.get<std::string>());
                if (s.utility.base != UtilityTag::det_exp && s.utility.base != UtilityTag::power)
                    rd.fail(key, "base must be det_exp or power");
            } else if (k == "beta") {
                s.utility.noise_beta = rd.coefficient(key, v, kRiskVars);
            } else if (k == "k") {
                s.utility.k = rd.coefficient(key, v, kTimeVars);
            } else {
                rd.fail(key, "unknown utility parameter");
            }
        }
    }

    s.x0 = rd.number("sim.x0", 1.0);
    s.T = rd.number("sim.T", 1.0);
    s.steps_per_unit = rd.integer("sim.steps_per_unit", 512);
    s.n_paths = rd.integer("sim.n_paths", 100000);
    s.seed = rd.integer("sim.seed", 1);

    if (rd.has("checks.nested")) {
        const json& v = rd.get("checks.nested");
        if (!v.is_array() || v.size() != 2 || !v[0].is_number_unsigned() || !v[1].is_number_unsigned())
            rd.fail("checks.nested", "expected [n_outer, n_inner]");
        s.nested.n_outer = v[0].get<std::size_t>();
        s.nested.n_inner = v[1].get<std::size_t>();
        if (s.nested.n_outer < 1 || s.nested.n_inner < 2) rd.domain("checks.nested", "need n_outer >= 1, n_inner >= 2");
    }

    if (!(s.T > 0.0)) rd.domain("sim.T", "horizon must be positive");
    if (!(s.gamma0 > 0.0)) rd.domain("risk.gamma0", "initial risk aversion must be positive");
    if (s.steps_per_unit < 1) rd.domain("sim.steps_per_unit", "must be at least 1");
    if (s.n_paths < 2) rd.domain("sim.n_paths", "need at least 2 paths");

    if (rd.has("checks.pairs")) {
        const json& v = rd.get("checks.pairs");
        if (!v.is_array()) rd.fail("checks.pairs", "expected a list of [s, t] pairs");
        for (const auto& pr : v) {
            if (!pr.is_array() || pr.size() != 2 || !pr[0].is_number() || !pr[1].is_number())
                rd.fail("checks.pairs", "each entry must be [s, t]");
            s.check_times.emplace_back(pr[0].get<double>(), pr[1].get<double>());
        }
        if (s.check_times.empty()) rd.domain("checks.pairs", "check_times must not be empty");
    } else {
        s.check_times.emplace_back(0.5 * s.T, s.T);
    }

    const TimeGrid g = s.grid();
    for (const auto& [a, b] : s.check_times) {
        if (!(0.0 < a && a < b && b <= s.T + 1e-12)) rd.domain("checks.pairs", "need 0 < s < t <= T");
        try {
            (void)g.index_of(a);
            (void)g.index_of(b);
        } catch (const DomainError& e) {
            rd.domain("checks.pairs", e.what());
        }
    }

    // sigma must be strictly positive; sampled on the assumption grid.
    for (std::size_t i = 0; i <= g.n_steps; ++i) {
        for (double w : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
            const double sg = s.sigma(g.time(i), w);
            if (!(sg > 0.0)) rd.domain("market.sigma", "volatility must be strictly positive");
            if (s.sigma.is_constant()) break;
        }
        if (s.sigma.form() == CoefficientForm::constant) break;
    }

    switch (s.utility.tag) {
    case UtilityTag::det_exp:
        if (!(s.utility.gamma > 0.0)) rd.domain("utility.params.gamma", "gamma must be positive");
        break;
    case UtilityTag::power:
        if (!(s.utility.gamma > 0.0 && s.utility.gamma < 1.0))
            rd.domain("utility.params.gamma", "power gamma must lie in (0, 1)");
        if (!(s.x0 > 0.0)) rd.domain("sim.x0", "power utility needs positive initial wealth");
        break;
    case UtilityTag::log:
        if (!(s.x0 > 0.0)) rd.domain("sim.x0", "log utility needs positive initial wealth");
        break;
    case UtilityTag::mult_noise:
        if (s.utility.base == UtilityTag::power) {
            if (!(s.utility.gamma > 0.0 && s.utility.gamma < 1.0))
                rd.domain("utility.params.gamma", "power gamma must lie in (0, 1)");
            if (!(s.x0 > 0.0)) rd.domain("sim.x0", "power utility needs positive initial wealth");
        } else if (!(s.utility.gamma > 0.0)) {
            rd.domain("utility.params.gamma", "gamma must be positive");
        }
        break;
    case UtilityTag::state_dep_exp: break;
    }
    return s;
}

ScenarioSpec load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("", -1, "cannot open scenario file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

namespace {

json coefficient_json(const CoefficientFn& c) {
    if (c.source().empty()) return c.value();
    return json{{"expr", c.source()}, {"bound", c.bound()}};
}

} // namespace

std::string serialize_scenario(const ScenarioSpec& s) {
    json j = json::object();
    j["id"] = s.id;
    j["market.mu"] = coefficient_json(s.mu);
    j["market.sigma"] = coefficient_json(s.sigma);
    j["market.r"] = s.r;
    j["risk.gamma0"] = s.gamma0;
    j["risk.eta"] = s.eta_mode == EtaMode::forward ? json("forward") : coefficient_json(s.eta);
    j["risk.beta"] = coefficient_json(s.beta);
    j["utility.family"] = std::string(to_string(s.utility.tag));
    json params = json::object();
    params["gamma"] = s.utility.gamma;
    if (s.utility.tag == UtilityTag::mult_noise) {
        params["base"] = std::string(to_string(s.utility.base));
        params["beta"] = coefficient_json(s.utility.noise_beta);
        if (s.utility.k) params["k"] = coefficient_json(*s.utility.k);
    }
    j["utility.params"] = params;
    j["sim.x0"] = s.x0;
    j["sim.T"] = s.T;
    j["sim.steps_per_unit"] = s.steps_per_unit;
    j["sim.n_paths"] = s.n_paths;
    j["sim.seed"] = s.seed;
    json pairs = json::array();
    for (const auto& [a, b] : s.check_times) pairs.push_back(json::array({a, b}));
    j["checks.pairs"] = pairs;
    j["checks.nested"] = json::array({s.nested.n_outer, s.nested.n_inner});
    return j.dump(2);
}

bool theta_is_stochastic(const ScenarioSpec& spec) {
    const TimeGrid g = spec.grid();
    for (std::size_t i = 0; i <= g.n_steps; ++i) {
        const double t = g.time(i);
        const double a = spec.theta(t, -1.0), b = spec.theta(t, 0.0), c = spec.theta(t, 1.0);
        const double tol = 1e-12 * (1.0 + std::abs(b));
        if (std::abs(a - b) > tol || std::abs(c - b) > tol) return true;
    }
    return false;
}

AssumptionReport validate_assumptions(const ScenarioSpec& spec) {
    AssumptionReport rep;
    const TimeGrid g = spec.grid();
    constexpr std::array<double, 5> ws{-3.0, -1.0, 0.0, 1.0, 3.0};
    rep.theta_min_abs = std::numeric_limits<double>::infinity();

    auto check_bound = [&](const char* name, const CoefficientFn& c, double t, double w, double v) {
        if (!std::isfinite(v) || std::abs(v) > c.bound() * (1.0 + 1e-12)) {
            rep.assumption_A_ok = false;
            rep.witnesses.push_back({std::string(name) + " exceeds bound", t, w, v});
        }
    };

    for (std::size_t i = 0; i <= g.n_steps; ++i) {
        const double t = g.time(i);
        for (double w : ws) {
            const double mu = spec.mu(t, w);
            const double sg = spec.sigma(t, w);
            const double th = spec.theta(t, w);
            check_bound("mu", spec.mu, t, w, mu);
            check_bound("sigma", spec.sigma, t, w, sg);
            if (!std::isfinite(th) || std::abs(th) <= 1e-12) {
                rep.hp_theta_ok = false;
                rep.witnesses.push_back({"theta vanishes", t, w, th});
            } else {
                rep.theta_min_abs = std::min(rep.theta_min_abs, std::abs(th));
                rep.theta_max_abs = std::max(rep.theta_max_abs, std::abs(th));
            }
            if (spec.eta_mode == EtaMode::given) check_bound("eta", spec.eta, t, w, spec.eta(t, w, th));
            check_bound("beta", spec.beta, t, w, spec.beta(t, w, th));
            if (spec.utility.tag == UtilityTag::mult_noise)
                check_bound("noise beta", spec.utility.noise_beta, t, w, spec.utility.noise_beta(t, w, th));
        }
        // Constant and time-only forms must not move with w.
        for (const CoefficientFn* c : {&spec.mu, &spec.sigma}) {
            if (c->form() != CoefficientForm::state_fn && (*c)(t, -1.0) != (*c)(t, 1.0)) {
                rep.assumption_A_ok = false;
                rep.witnesses.push_back({"non-state coefficient depends on w", t, 0.0, (*c)(t, 1.0)});
            }
        }
    }
    if (!std::isfinite(rep.theta_min_abs)) rep.theta_min_abs = 0.0;
    rep.theta_stochastic = theta_is_stochastic(spec);
    return rep;
}

} // namespace sdu
