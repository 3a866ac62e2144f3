#include "bubble/montecarlo.hpp"

#include "bubble/errors.hpp"
#include "bubble/quadrature.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace bubble {

// ------------------------------------------------------------------- Philox

std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> c, std::array<uint32_t, 2> k) {
    constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int r = 0; r < 10; ++r) {
        uint64_t p0 = uint64_t(M0) * c[0];
        uint64_t p1 = uint64_t(M1) * c[2];
        c = {uint32_t(p1 >> 32) ^ c[1] ^ k[0], uint32_t(p1), uint32_t(p0 >> 32) ^ c[3] ^ k[1], uint32_t(p0)};
        k[0] += W0;
        k[1] += W1;
    }
    return c;
}

namespace {

double to_open_unit(uint32_t hi, uint32_t lo) {
    uint64_t bits = ((uint64_t(hi) << 32) | lo) >> 11;
    return (double(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

PathRng::PathRng(uint64_t seed, uint64_t path_index)
    : key_{uint32_t(seed), uint32_t(seed >> 32)}, pair_(path_index / 2), flip_(path_index % 2 == 1) {}

std::array<uint32_t, 4> PathRng::block(uint64_t b, uint32_t kind) const {
    return philox4x32({uint32_t(pair_), uint32_t(pair_ >> 32), uint32_t(b), kind ^ uint32_t(b >> 32) << 8}, key_);
}

double PathRng::normal(uint64_t i) {
    uint64_t b = i / 2;
    if (b != cached_) {
        auto x = block(b, 0);
        double u1 = to_open_unit(x[0], x[1]), u2 = to_open_unit(x[2], x[3]);
        double r = std::sqrt(-2.0 * std::log(u1));
        z_[0] = r * std::cos(2.0 * M_PI * u2);
        z_[1] = r * std::sin(2.0 * M_PI * u2);
        cached_ = b;
    }
    double z = z_[i % 2];
    return flip_ ? -z : z;
}

double PathRng::uniform(uint64_t i) {
    auto x = block(i / 2, 1);
    double u = i % 2 == 0 ? to_open_unit(x[0], x[1]) : to_open_unit(x[2], x[3]);
    return flip_ ? 1.0 - u : u;
}

std::string to_string(Measure m) { return m == Measure::P ? "P" : "Q"; }

std::string to_string(Estimand e) {
    switch (e) {
        case Estimand::E_ST: return "E_ST";
        case Estimand::E_U_of_XT: return "E_U_of_XT";
        case Estimand::EQ_XT: return "EQ_XT";
    }
    return "unknown";
}

// --------------------------------------------------------------- strategies

Strategy Strategy::constant(double pi, std::string label) {
    return Strategy{std::move(label), [pi](double) { return pi; }, pi};
}

Strategy Strategy::optimal(const Solution& sol) {
    auto s = std::make_shared<const Solution>(sol);
    return Strategy{"pi_hat", [s](double t) { return optimal_fraction(*s, t, false); },
                    optimal_fraction(sol, 0.0, true)};
}

Strategy Strategy::myopic(const Solution& sol) {
    auto s = std::make_shared<const Solution>(sol);
    const double ps2 = sol.prefs.p * sol.model.sigma() * sol.model.sigma();
    auto pre = [s, ps2](double t) {
        const auto& m = s->model;
        double tn = s->t_N();
        double d = m.dphi(t);
        double ym;
        if (t <= tn) {
            ym = s->y_myopic(t);
        } else {
            // phi' y^m held fixed beyond t_N
            double dn = m.dphi(tn);
            ym = s->y_myopic.values().back();
            if (dn > 0.0 && d > 0.0) ym *= dn / d;
        }
        return (m.mu() - d * ym) / ps2;
    };
    return Strategy{"pi_m", pre, optimal_fraction(sol, 0.0, true)};
}

Strategy Strategy::scaled(const Solution& sol, double k) {
    auto base = optimal(sol);
    auto f = base.pre;
    std::ostringstream os;
    os << k << "*pi_hat";
    return Strategy{os.str(), [f, k](double t) { return k * f(t); }, k * base.post};
}

Strategy Strategy::merton(const MarketModel& model, const Preference& prefs) {
    return constant(model.mu() / (prefs.p * model.sigma() * model.sigma()), "merton");
}

// ------------------------------------------------------------- crash times

double sample_crash_time(const HazardModel& hazard, double u) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("uniform variate must lie in (0, 1)");
    const double T = hazard.horizon();
    double L = -std::log1p(-u);
    if (hazard.integrable() && L >= hazard.cumulative(T)) return T;
    return std::min(hazard.inverse_cumulative(L), T);
}

double sample_crash_time(const TiltedMeasure& q, double u) { return q.inverse(u); }

double utility(double X, double p) {
    if (std::fabs(p - 1.0) < 1e-6) return std::log(X);
    return std::exp((1.0 - p) * std::log(X)) / (1.0 - p);
}

double inverse_utility(double u, double p) {
    if (std::fabs(p - 1.0) < 1e-6) return std::exp(u);
    return std::exp(std::log((1.0 - p) * u) / (1.0 - p));
}

// ------------------------------------------------------------------- engine

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-step data shared by all paths of one estimate.
class Engine {
public:
    Engine(const MarketModel& model, const SimConfig& cfg, const TiltedMeasure* q, std::vector<Strategy> strategies)
        : m_(model), cfg_(cfg), q_(q), strategies_(std::move(strategies)) {
        if (cfg.n_steps < 2) throw DomainError("simulation needs at least 2 steps");
        if (cfg.measure == Measure::Q && !q) throw DomainError("simulation under Q needs a tilted measure");
        const int n = cfg.n_steps;
        T_ = model.horizon();
        dt_ = T_ / n;
        sdt_ = std::sqrt(dt_);
        const double s = model.sigma();
        drift_ = (under_q() ? 0.0 : model.mu()) - 0.5 * s * s;
        t_.resize(n + 1);
        cum_.resize(n + 1);
        for (int k = 0; k <= n; ++k) t_[k] = k == n ? T_ : k * dt_;
        for (int k = 0; k < n; ++k) cum_[k] = pre_cum(t_[k]);
        cum_[n] = terminal_cum();
        for (const auto& st : strategies_) {
            std::vector<double> pi(n);
            for (int k = 0; k < n; ++k) pi[k] = st.pre(clip(0.5 * (t_[k] + t_[k + 1])));
            pi_mid_.push_back(std::move(pi));
        }
    }

    bool under_q() const { return cfg_.measure == Measure::Q; }

    double clip(double t) const { return cfg_.eps_T > 0.0 ? std::min(t, T_ - cfg_.eps_T) : t; }

    // log S_t - sigma W_t - drift t before the crash: phi under P, int phi'(1+y) under Q
    double pre_cum(double t) const { return under_q() ? q_->compensator(clip(t)) : m_.phi(clip(t)); }

    double terminal_cum() const {
        if (cfg_.eps_T > 0.0) return pre_cum(T_);
        if (!under_q()) return m_.phi_terminal();
        if (q_->atom() == 0.0) return kInf;
        auto tail = tail_integrate([this](double u) { return m_.dphi(u) * (1.0 + q_->tilt().y(u)); }, t_[cfg_.n_steps - 1], T_);
        return cum_[cfg_.n_steps - 1] + tail.value;
    }

    double crash_time(double u) const { return under_q() ? q_->inverse(u) : sample_crash_time(m_.hazard(), u); }

    // step index with t_j <= gamma < t_{j+1}; n when gamma = T
    int step_of(double gamma) const {
        if (gamma >= T_) return cfg_.n_steps;
        return std::min(int(gamma / dt_), cfg_.n_steps - 1);
    }

    PricePath price(const PathDraws& d) const {
        const int n = cfg_.n_steps;
        const double s = m_.sigma();
        PricePath out;
        out.gamma = crash_time(d.u);
        const int j = step_of(out.gamma);
        out.crashed = j < n;
        out.t = t_;
        out.S.resize(n + 1);
        double W = 0.0;
        double logS_post = 0.0, W_g = 0.0, g = out.gamma;
        for (int k = 0; k <= n; ++k) {
            if (k > 0) W += sdt_ * d.z[k - 1];
            if (k <= j) {
                out.S[k] = std::exp(drift_ * t_[k] + cum_[k] + s * W);
                if (k == j && j < n) {
                    W_g = bridge(W, k, g, d);
                    double jump = 1.0 - m_.delta(clip(g));
                    logS_post = jump > 0.0 ? drift_ * g + pre_cum(g) + s * W_g + std::log(jump) : -kInf;
                }
            } else {
                double post_drift = (under_q() ? 0.0 : m_.mu()) - 0.5 * s * s;
                out.S[k] = std::exp(logS_post + post_drift * (t_[k] - g) + s * (W - W_g));
            }
        }
        return out;
    }

    // W at gamma in [t_j, t_{j+1}) given W_j, from the Brownian bridge.
    double bridge(double Wj, int j, double g, const PathDraws& d) const {
        double a = g - t_[j], b = t_[j + 1] - g;
        return Wj + a / dt_ * sdt_ * d.z[j] + std::sqrt(a * b / dt_) * d.z_bridge;
    }

    struct WealthOut {
        double gamma;
        int j;
        std::vector<WealthPath> w;
    };

    WealthOut wealth(const PathDraws& d, double x) const {
        const int n = cfg_.n_steps;
        const double s = m_.sigma(), s2 = s * s;
        const double mu_pre = under_q() ? 0.0 : m_.mu();
        WealthOut out;
        out.gamma = crash_time(d.u);
        out.j = step_of(out.gamma);
        const double g = out.gamma;
        const int j = out.j;
        const bool crashed = j < n;
        double Wj = 0.0;
        for (int k = 0; k < std::min(j, n); ++k) Wj += sdt_ * d.z[k];
        double Wg = 0.0, Wn = Wj, cum_g = 0.0, delta_g = 0.0;
        if (crashed) {
            Wg = bridge(Wj, j, g, d);
            for (int k = j; k < n; ++k) Wn += sdt_ * d.z[k];
            cum_g = pre_cum(g);
            delta_g = m_.delta(clip(g));
        }
        const double post_mu = under_q() ? 0.0 : m_.mu();
        for (size_t i = 0; i < strategies_.size(); ++i) {
            const auto& pi = pi_mid_[i];
            const double pp = strategies_[i].post;
            WealthPath w;
            w.gamma = g;
            w.crashed = crashed;
            NeumaierSum L;
            for (int k = 0; k < std::min(j, n); ++k) {
                double p = pi[k];
                L.add(p * (mu_pre * dt_ + cum_[k + 1] - cum_[k]) - 0.5 * p * p * s2 * dt_ + p * s * sdt_ * d.z[k]);
            }
            if (crashed) {
                double a = g - t_[j];
                double p = strategies_[i].pre(clip(t_[j] + 0.5 * a));
                if (a > 0.0) L.add(p * (mu_pre * a + cum_g - cum_[j]) - 0.5 * p * p * s2 * a + p * s * (Wg - Wj));
                w.jump_factor = 1.0 - strategies_[i].pre(clip(g)) * delta_g;
                if (!(w.jump_factor > 0.0)) {
                    w.bankrupt = true;
                    w.X_T = 0.0;
                    out.w.push_back(w);
                    continue;
                }
                L.add(std::log(w.jump_factor));
                double b = T_ - g;
                L.add(pp * post_mu * b - 0.5 * pp * pp * s2 * b + pp * s * (Wn - Wg));
            }
            w.X_T = x * std::exp(L.value());
            out.w.push_back(w);
        }
        return out;
    }

private:
    const MarketModel& m_;
    SimConfig cfg_;
    const TiltedMeasure* q_;
    std::vector<Strategy> strategies_;
    double T_, dt_, sdt_, drift_;
    std::vector<double> t_, cum_;
    std::vector<std::vector<double>> pi_mid_;
};

// Accumulates pair means for one estimand.
struct Acc {
    NeumaierSum sum, pair_sum, pair_sq;
    long pairs = 0;
    long bankrupt = 0;
    double max = -kInf;

    void merge(const Acc& o) {
        sum.add(o.sum.value());
        pair_sum.add(o.pair_sum.value());
        pair_sq.add(o.pair_sq.value());
        pairs += o.pairs;
        bankrupt += o.bankrupt;
        max = std::max(max, o.max);
    }
};

int worker_count(const SimConfig& cfg) {
    int n = cfg.threads > 0 ? cfg.threads : int(std::thread::hardware_concurrency());
    return std::max(1, n);
}

// Runs body(path_index, slot) over all paths in fixed chunks; chunk results are
// merged in chunk order so the outcome is independent of scheduling.
template <class Body>
std::vector<Acc> run_paths(const SimConfig& cfg, size_t slots, Body body) {
    if (cfg.n_paths < 1) throw DomainError("simulation needs at least one path");
    const long pairs = (cfg.n_paths + 1) / 2;
    constexpr long chunk = 1024;
    const long n_chunks = (pairs + chunk - 1) / chunk;
    std::vector<std::vector<Acc>> partial(n_chunks, std::vector<Acc>(slots));
    std::atomic<long> next{0};
    std::vector<std::string> errors(n_chunks);
    auto work = [&] {
        for (long c; (c = next.fetch_add(1)) < n_chunks;) {
            try {
                auto& acc = partial[c];
                std::vector<double> first(slots);
                for (long pr = c * chunk; pr < std::min(pairs, (c + 1) * chunk); ++pr) {
                    const long a = 2 * pr, b = a + 1;
                    const bool has_b = b < cfg.n_paths;
                    for (size_t s = 0; s < slots; ++s) first[s] = 0.0;
                    body(a, [&](size_t s, double v, bool bust) {
                        first[s] = v;
                        acc[s].sum.add(v);
                        acc[s].max = std::max(acc[s].max, v);
                        acc[s].bankrupt += bust;
                    });
                    if (has_b) {
                        body(b, [&](size_t s, double v, bool bust) {
                            acc[s].sum.add(v);
                            acc[s].max = std::max(acc[s].max, v);
                            acc[s].bankrupt += bust;
                            double pm = 0.5 * (first[s] + v);
                            acc[s].pair_sum.add(pm);
                            acc[s].pair_sq.add(pm * pm);
                            acc[s].pairs += 1;
                        });
                    } else {
                        for (size_t s = 0; s < slots; ++s) {
                            acc[s].pair_sum.add(first[s]);
                            acc[s].pair_sq.add(first[s] * first[s]);
                            acc[s].pairs += 1;
                        }
                    }
                }
            } catch (const std::exception& e) {
                errors[c] = e.what();
            }
        }
    };
    const int nw = std::min<long>(worker_count(cfg), n_chunks);
    std::vector<std::thread> pool;
    for (int i = 1; i < nw; ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (!e.empty()) throw SimulationError(e);
    std::vector<Acc> total(slots);
    for (const auto& p : partial)
        for (size_t s = 0; s < slots; ++s) total[s].merge(p[s]);
    return total;
}

EstimatorResult finish(const Acc& a, const SimConfig& cfg, Estimand e, std::string label, double ms) {
    EstimatorResult r;
    r.estimand = e;
    r.label = std::move(label);
    r.n_paths = cfg.n_paths;
    r.seed = cfg.seed;
    r.mean = a.sum.value() / double(cfg.n_paths);
    const double n = double(a.pairs);
    if (a.pairs > 1) {
        double pm = a.pair_sum.value() / n;
        double var = std::max(0.0, (a.pair_sq.value() - n * pm * pm) / (n - 1.0));
        r.std_error = std::sqrt(var / n);
    }
    r.bankrupt = a.bankrupt;
    r.sample_max = a.max;
    r.runtime_ms = ms;
    return r;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

PathDraws draw_path(const SimConfig& cfg, uint64_t path_index) {
    PathRng rng(cfg.seed, path_index);
    PathDraws d;
    d.z.resize(cfg.n_steps);
    for (int k = 0; k < cfg.n_steps; ++k) d.z[k] = rng.normal(k);
    d.z_bridge = rng.normal(cfg.n_steps);
    d.u = rng.uniform(0);
    return d;
}

PricePath simulate_price_path(const MarketModel& model, const SimConfig& cfg, const PathDraws& d,
                              const TiltedMeasure* q) {
    if (int(d.z.size()) != cfg.n_steps) throw DomainError("draws do not match the step count");
    return Engine(model, cfg, q, {}).price(d);
}

PricePath simulate_price_path(const MarketModel& model, const SimConfig& cfg, uint64_t path_index,
                              const TiltedMeasure* q) {
    return simulate_price_path(model, cfg, draw_path(cfg, path_index), q);
}

WealthPath simulate_wealth_path(const MarketModel& model, const Strategy& strategy, double x, const SimConfig& cfg,
                                const PathDraws& d, const TiltedMeasure* q) {
    if (int(d.z.size()) != cfg.n_steps) throw DomainError("draws do not match the step count");
    return Engine(model, cfg, q, {strategy}).wealth(d, x).w.front();
}

WealthPath simulate_wealth_path(const MarketModel& model, const Strategy& strategy, double x, const SimConfig& cfg,
                                uint64_t path_index, const TiltedMeasure* q) {
    return simulate_wealth_path(model, strategy, x, cfg, draw_path(cfg, path_index), q);
}

EstimatorResult estimate_ST(const MarketModel& model, const SimConfig& cfg, const TiltedMeasure* q) {
    auto t0 = std::chrono::steady_clock::now();
    if (cfg.measure == Measure::Q && !q) throw DomainError("E_ST under Q needs a tilted measure");
    const bool under_q = cfg.measure == Measure::Q;
    const double T = model.horizon(), s = model.sigma();
    const double drift = (under_q ? 0.0 : model.mu()) - 0.5 * s * s;
    double cum_T = 0.0;
    bool have_cum_T = false;
    auto pre_cum = [&](double t) { return under_q ? q->compensator(t) : model.phi(t); };
    // exact in law: only W_gamma and W_T - W_gamma enter S_T
    auto sample = [&](long i) {
        PathRng rng(cfg.seed, uint64_t(i));
        double u = rng.uniform(0);
        double g = under_q ? q->inverse(u) : sample_crash_time(model.hazard(), u);
        double z1 = rng.normal(0), z2 = rng.normal(1);
        if (g >= T) {
            if (!have_cum_T) throw SimulationError("path survived to T without a finite terminal excess return");
            return std::exp(drift * T + cum_T + s * std::sqrt(T) * z1);
        }
        double jump = 1.0 - model.delta(g);
        if (!(jump > 0.0)) return 0.0;
        double Wg = std::sqrt(g) * z1, dW = std::sqrt(T - g) * z2;
        return std::exp(drift * T + pre_cum(g) + std::log(jump) + s * (Wg + dW));
    };
    const double atom = under_q ? q->atom() : model.hazard().atom();
    if (atom > 0.0) {
        if (under_q) {
            auto tail = tail_integrate([&](double u) { return model.dphi(u) * (1.0 + q->tilt().y(u)); }, 0.5 * T, T);
            cum_T = q->compensator(0.5 * T) + tail.value;
        } else {
            cum_T = model.phi_terminal();
        }
        have_cum_T = std::isfinite(cum_T);
    }
    std::vector<double> values(cfg.n_paths);
    auto acc = run_paths(cfg, 1, [&](long i, auto emit) {
        double v = sample(i);
        values[i] = v;
        emit(0, v, false);
    });
    auto r = finish(acc[0], cfg, Estimand::E_ST, "S_T", 0.0);
    long above = 0;
    for (double v : values) above += v > 10.0 * std::fabs(r.mean);
    r.tail_fraction = double(above) / double(cfg.n_paths);
    r.runtime_ms = elapsed_ms(t0);
    return r;
}

std::vector<EstimatorResult> estimate_utility(const MarketModel& model, const std::vector<Strategy>& strategies,
                                              const Preference& prefs, const SimConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    if (cfg.measure != Measure::P) throw DomainError("expected utility is estimated under P");
    Engine eng(model, cfg, nullptr, strategies);
    const double p = prefs.p;
    auto acc = run_paths(cfg, strategies.size(), [&](long i, auto emit) {
        auto w = eng.wealth(draw_path(cfg, uint64_t(i)), prefs.x);
        for (size_t s = 0; s < w.w.size(); ++s) {
            const auto& wp = w.w[s];
            if (wp.bankrupt && p >= 1.0)
                throw SimulationError("strategy " + strategies[s].label +
                                      " bankrupt at the crash (1 - pi delta <= 0); utility is -inf");
            emit(s, wp.bankrupt ? 0.0 : utility(wp.X_T, p), wp.bankrupt);
        }
    });
    std::vector<EstimatorResult> out;
    double ms = elapsed_ms(t0);
    for (size_t s = 0; s < strategies.size(); ++s)
        out.push_back(finish(acc[s], cfg, Estimand::E_U_of_XT, strategies[s].label, ms));
    return out;
}

EstimatorResult estimate_budget(const Solution& sol, const SimConfig& cfg_in) {
    auto t0 = std::chrono::steady_clock::now();
    SimConfig cfg = cfg_in;
    cfg.measure = Measure::Q;
    auto q = build_tilted_measure(sol.model, TiltFunction::from_solution(sol));
    Engine eng(sol.model, cfg, &q, {Strategy::optimal(sol)});
    auto acc = run_paths(cfg, 1, [&](long i, auto emit) {
        auto w = eng.wealth(draw_path(cfg, uint64_t(i)), sol.prefs.x);
        emit(0, w.w[0].X_T, w.w[0].bankrupt);
    });
    return finish(acc[0], cfg, Estimand::EQ_XT, "pi_hat", elapsed_ms(t0));
}

std::vector<EstimatorResult> estimate(const MarketModel& model, const SimConfig& cfg, const EstimandSpec& spec) {
    switch (spec.kind) {
        case Estimand::E_ST: return {estimate_ST(model, cfg, spec.q)};
        case Estimand::E_U_of_XT: {
            if (!spec.solution) throw DomainError("E_U_of_XT needs a solution for the preferences");
            auto strategies = spec.strategies;
            if (strategies.empty()) strategies.push_back(Strategy::optimal(*spec.solution));
            return estimate_utility(model, strategies, spec.solution->prefs, cfg);
        }
        case Estimand::EQ_XT:
            if (!spec.solution) throw DomainError("EQ_XT needs a solution");
            return {estimate_budget(*spec.solution, cfg)};
    }
    return {};
}

}  // namespace bubble
