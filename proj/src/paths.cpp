#include "sdu/paths.hpp"

#include "sdu/errors.hpp"
#include "sdu/parallel.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>

namespace sdu {

namespace {
std::atomic<unsigned> g_workers{0};
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
} // namespace

void set_worker_count(unsigned n) noexcept { g_workers.store(n); }

unsigned worker_count() noexcept {
    const unsigned n = g_workers.load();
    if (n != 0) return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

double StepContext::g() const noexcept { return std::exp(state.log_g); }
double StepContext::gamma() const noexcept { return std::exp(-state.log_g); }

StrategyRule StrategyRule::zero() { return {}; }

StrategyRule StrategyRule::exposure_rule(std::string name, Fn fn) {
    StrategyRule r;
    r.kind_ = Kind::exposure;
    r.name_ = std::move(name);
    r.fn_ = std::move(fn);
    return r;
}

StrategyRule StrategyRule::proportion_rule(std::string name, Fn fn) {
    StrategyRule r;
    r.kind_ = Kind::proportion;
    r.name_ = std::move(name);
    r.fn_ = std::move(fn);
    return r;
}

double StrategyRule::exposure(const StepContext& ctx) const {
    if (!fn_) return 0.0;
    const double v = fn_(ctx);
    return kind_ == Kind::exposure ? v : ctx.c.sigma * v * ctx.state.v;
}

Dynamics::Dynamics(const ScenarioSpec& spec, TimeGrid grid)
    : spec_(&spec), grid_(grid), dt_(grid.dt()), sqrt_dt_(std::sqrt(grid.dt())),
      noise_(spec.utility.tag == UtilityTag::mult_noise) {}

PathState Dynamics::initial_state() const noexcept {
    PathState s;
    s.log_g = -std::log(spec_->gamma0);
    s.v = spec_->x0;
    return s;
}

Coeffs Dynamics::coeffs(std::size_t step, const PathState& s, std::size_t path) const {
    Coeffs c;
    c.t = grid_.time(step);
    c.mu = spec_->mu(c.t, s.w);
    c.sigma = spec_->sigma(c.t, s.w);
    c.theta = -(c.mu - spec_->r) / c.sigma;
    c.beta = spec_->beta(c.t, s.w, c.theta);
    if (spec_->eta_mode == EtaMode::forward) {
        const double den = std::exp(-s.log_g) * s.v + 1.0;
        if (!(std::abs(den) >= 1e-6)) throw NumericalAbort(path, step, "singular forward denominator gamma*V + 1");
        c.eta = c.theta * (c.theta + 2.0 * c.beta) / (2.0 * den);
    } else {
        c.eta = spec_->eta(c.t, s.w, c.theta);
    }
    if (noise_) c.beta_x = spec_->utility.noise_beta(c.t, s.w, c.theta);
    return c;
}

Dynamics::StepResult Dynamics::advance(std::size_t step, PathState& s, const Coeffs& c, double dw,
                                       const StrategyRule* rule, std::size_t path) const {
    const double dwq = dw - c.theta * dt_;
    double e = 0.0;
    if (rule) e = rule->exposure(StepContext{step, dt_, s, c});
    s.v += e * dwq;
    s.log_g += (c.eta - 0.5 * c.beta * c.beta) * dt_ + c.beta * dwq;
    s.log_z += -0.5 * c.theta * c.theta * dt_ + c.theta * dw;
    s.log_s += (c.mu - 0.5 * c.sigma * c.sigma) * dt_ + c.sigma * dw;
    if (noise_) s.log_x += -0.5 * c.beta_x * c.beta_x * dt_ + c.beta_x * dw;
    s.w += dw;
    if (!std::isfinite(s.v + s.log_g + s.log_z + s.log_s + s.log_x + s.w)) {
        const char* what = !std::isfinite(s.v)       ? "non-finite wealth"
                           : !std::isfinite(s.log_g) ? "non-finite risk aversion"
                           : !std::isfinite(s.log_z) ? "non-finite density"
                           : !std::isfinite(s.log_s) ? "non-finite stock"
                           : !std::isfinite(s.log_x) ? "non-finite noise"
                                                     : "non-finite Brownian value";
        throw NumericalAbort(path, step + 1, what);
    }
    return {e, dwq};
}

PathBatch::PathBatch(TimeGrid grid, std::size_t n_paths, std::vector<std::size_t> steps)
    : grid_(grid), n_paths_(n_paths), steps_(std::move(steps)) {
    if (steps_.empty())
        for (std::size_t i = 0; i <= grid_.n_steps; ++i) steps_.push_back(i);
    index_.assign(grid_.n_steps + 1, kNone);
    for (std::size_t k = 0; k < steps_.size(); ++k) {
        if (steps_[k] > grid_.n_steps) throw Error("recorded step beyond the grid");
        if (k > 0 && steps_[k] <= steps_[k - 1]) throw Error("recorded steps must be strictly increasing");
        index_[steps_[k]] = k;
    }
    states_.resize(n_paths_ * steps_.size());
}

std::size_t PathBatch::record_of(std::size_t step) const {
    if (step >= index_.size() || index_[step] == kNone)
        throw Error("grid step " + std::to_string(step) + " was not recorded in this batch");
    return index_[step];
}

std::vector<double>& PathBatch::channel(const std::string& name) {
    auto& v = channels_[name];
    if (v.empty()) v.assign(n_paths_ * steps_.size(), 0.0);
    return v;
}

const std::vector<double>& PathBatch::channel(const std::string& name) const {
    const auto it = channels_.find(name);
    if (it == channels_.end()) throw Error("missing channel '" + name + "'");
    return it->second;
}

std::vector<double> PathBatch::column(const std::string& name, std::size_t k) const {
    const auto& ch = channel(name);
    std::vector<double> out(n_paths_);
    for (std::size_t p = 0; p < n_paths_; ++p) out[p] = ch[p * steps_.size() + k];
    return out;
}

std::vector<std::string> PathBatch::channel_names() const {
    std::vector<std::string> names;
    for (const auto& [k, v] : channels_) names.push_back(k);
    return names;
}

void PathBatch::sync_state_channels(bool with_noise) {
    auto& w = channel("W");
    auto& lz = channel("logZ");
    auto& s = channel("S");
    auto& g = channel("gamma_inv");
    auto& v = channel("V");
    std::vector<double>* x = with_noise ? &channel("X") : nullptr;
    for (std::size_t j = 0; j < states_.size(); ++j) {
        const PathState& st = states_[j];
        w[j] = st.w;
        lz[j] = st.log_z;
        s[j] = std::exp(st.log_s);
        g[j] = std::exp(st.log_g);
        v[j] = st.v;
        if (x) (*x)[j] = std::exp(st.log_x);
    }
    has_noise = with_noise;
}

PathBatch simulate_paths(const ScenarioSpec& spec, const TimeGrid& grid, const SimRequest& req) {
    if (req.n_paths < 1) throw DomainError("n_paths must be at least 1");
    PathBatch batch(grid, req.n_paths, req.record_steps);
    batch.seed = req.seed;
    const Dynamics dyn(spec, grid);
    const NormalSource rng(req.seed, req.stream);
    const std::size_t nrec = batch.n_records();
    const bool incr = req.record_increments && batch.full();
    auto& theta = batch.channel("theta");
    auto& expo = batch.channel("exposure");
    auto& eta = batch.channel(dyn.forward_eta() ? "eta_star" : "eta");
    std::vector<double>* dw_ch = incr ? &batch.channel("dW") : nullptr;
    std::vector<double>* dwq_ch = incr ? &batch.channel("dWQ") : nullptr;
    const auto& steps = batch.steps();

    parallel_for(req.n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            PathState s = dyn.initial_state();
            std::size_t k = 0;
            for (std::size_t i = 0; i <= grid.n_steps; ++i) {
                const Coeffs c = dyn.coeffs(i, s, p);
                const bool rec = k < nrec && steps[k] == i;
                if (i == grid.n_steps) {
                    if (rec) {
                        batch.state(p, k) = s;
                        theta[p * nrec + k] = c.theta;
                        eta[p * nrec + k] = c.eta;
                        if (req.rule) expo[p * nrec + k] = req.rule->exposure(StepContext{i, dyn.dt(), s, c});
                    }
                    break;
                }
                if (rec) {
                    batch.state(p, k) = s;
                    theta[p * nrec + k] = c.theta;
                    eta[p * nrec + k] = c.eta;
                }
                const double dw = dyn.increment(rng(p, i), c, req.measure);
                const auto r = dyn.advance(i, s, c, dw, req.rule, p);
                if (rec) {
                    expo[p * nrec + k] = r.exposure;
                    if (incr) {
                        (*dw_ch)[p * nrec + k] = dw;
                        (*dwq_ch)[p * nrec + k] = r.dwq;
                    }
                    ++k;
                }
            }
        }
    });
    batch.sync_state_channels(dyn.has_noise());
    return batch;
}

PathBatch simulate_brownian(const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed, std::uint64_t stream) {
    if (n_paths < 1) throw DomainError("n_paths must be at least 1");
    PathBatch batch(grid, n_paths);
    batch.seed = seed;
    const NormalSource rng(seed, stream);
    const double sq = std::sqrt(grid.dt());
    const std::size_t nrec = batch.n_records();
    auto& dw = batch.channel("dW");
    auto& w = batch.channel("W");
    parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            double acc = 0.0;
            for (std::size_t i = 0; i < grid.n_steps; ++i) {
                batch.state(p, i).w = acc;
                w[p * nrec + i] = acc;
                dw[p * nrec + i] = rng(p, i) * sq;
                acc += dw[p * nrec + i];
            }
            batch.state(p, grid.n_steps).w = acc;
            w[p * nrec + grid.n_steps] = acc;
        }
    });
    return batch;
}

namespace {

void require_full(const PathBatch& b, const char* op) {
    if (!b.full()) throw Error(std::string(op) + " needs a batch with every grid step recorded");
    if (!b.has("dW")) throw Error(std::string(op) + " needs the Brownian channels");
}

// Shared walk for the staged operations: replays the recorded dW through the
// step kernel, updating only the fields the caller owns.
template <class Apply>
void replay(const ScenarioSpec& spec, PathBatch& batch, Apply&& apply) {
    const Dynamics dyn(spec, batch.grid());
    const auto& dw = batch.channel("dW");
    const std::size_t nrec = batch.n_records();
    const std::size_t n = batch.grid().n_steps;
    parallel_for(batch.n_paths(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            for (std::size_t i = 0; i <= n; ++i) {
                PathState& cur = batch.state(p, i);
                const Coeffs c = dyn.coeffs(i, cur, p);
                if (i == n) {
                    apply(p, i, c, cur, nullptr, 0.0, dyn);
                    break;
                }
                apply(p, i, c, cur, &batch.state(p, i + 1), dw[p * nrec + i], dyn);
            }
        }
    });
}

} // namespace

void simulate_market(const ScenarioSpec& spec, PathBatch& batch) {
    require_full(batch, "simulate_market");
    const std::size_t nrec = batch.n_records();
    auto& theta = batch.channel("theta");
    auto& dwq = batch.channel("dWQ");
    auto& lz = batch.channel("logZ");
    auto& S = batch.channel("S");
    const double dt = batch.grid().dt();
    replay(spec, batch,
           [&](std::size_t p, std::size_t i, const Coeffs& c, PathState& cur, PathState* next, double dw,
               const Dynamics&) {
               const std::size_t j = p * nrec + i;
               theta[j] = c.theta;
               lz[j] = cur.log_z;
               S[j] = std::exp(cur.log_s);
               if (!next) return;
               dwq[j] = dw - c.theta * dt;
               next->log_z = cur.log_z + (-0.5 * c.theta * c.theta * dt + c.theta * dw);
               next->log_s = cur.log_s + ((c.mu - 0.5 * c.sigma * c.sigma) * dt + c.sigma * dw);
               if (!std::isfinite(next->log_z) || !std::isfinite(next->log_s))
                   throw NumericalAbort(p, i + 1, "non-finite market state");
           });
}

void simulate_risk_aversion(const ScenarioSpec& spec, PathBatch& batch) {
    require_full(batch, "simulate_risk_aversion");
    if (!batch.has("dWQ")) throw Error("simulate_risk_aversion needs dWQ; run simulate_market first");
    if (spec.eta_mode == EtaMode::forward)
        throw RegimeError("forward eta couples gamma to wealth; use forward_family_simulate");
    const std::size_t nrec = batch.n_records();
    auto& g = batch.channel("gamma_inv");
    auto& eta = batch.channel("eta");
    const auto& dwq = batch.channel("dWQ");
    const double dt = batch.grid().dt();
    const double lg0 = -std::log(spec.gamma0);
    for (std::size_t p = 0; p < batch.n_paths(); ++p) batch.state(p, 0).log_g = lg0;
    replay(spec, batch,
           [&](std::size_t p, std::size_t i, const Coeffs& c, PathState& cur, PathState* next, double,
               const Dynamics&) {
               const std::size_t j = p * nrec + i;
               g[j] = std::exp(cur.log_g);
               eta[j] = c.eta;
               if (!next) return;
               next->log_g = cur.log_g + ((c.eta - 0.5 * c.beta * c.beta) * dt + c.beta * (dwq[j]));
               if (!std::isfinite(next->log_g)) throw NumericalAbort(p, i + 1, "non-finite risk aversion");
           });
}

void simulate_wealth(const StrategyRule& rule, const ScenarioSpec& spec, PathBatch& batch, double x0) {
    require_full(batch, "simulate_wealth");
    if (!batch.has("dWQ")) throw Error("simulate_wealth needs dWQ; run simulate_market first");
    const std::size_t nrec = batch.n_records();
    auto& V = batch.channel("V");
    auto& e = batch.channel("exposure");
    const auto& dwq = batch.channel("dWQ");
    for (std::size_t p = 0; p < batch.n_paths(); ++p) batch.state(p, 0).v = x0;
    replay(spec, batch,
           [&](std::size_t p, std::size_t i, const Coeffs& c, PathState& cur, PathState* next, double,
               const Dynamics& dyn) {
               const std::size_t j = p * nrec + i;
               V[j] = cur.v;
               e[j] = rule.exposure(StepContext{i, dyn.dt(), cur, c});
               if (!next) return;
               next->v = cur.v + e[j] * dwq[j];
               if (!std::isfinite(next->v)) throw NumericalAbort(p, i + 1, "non-finite wealth");
           });
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_channels_csv(const PathBatch& batch, std::ostream& out, std::size_t max_paths,
                        const std::vector<std::string>& channels) {
    const std::vector<std::string> names = channels.empty() ? batch.channel_names() : channels;
    out << "path,step,t";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    const std::size_t np = std::min(max_paths, batch.n_paths());
    for (std::size_t p = 0; p < np; ++p) {
        for (std::size_t k = 0; k < batch.n_records(); ++k) {
            const std::size_t step = batch.steps()[k];
            out << p << ',' << step << ',' << format_double(batch.grid().time(step));
            for (const auto& n : names) out << ',' << format_double(batch.at(n, p, k));
            out << '\n';
        }
    }
}

} // namespace sdu
