#include "bubble/elmm.hpp"
#include "bubble/errors.hpp"
#include "bubble/montecarlo.hpp"
#include "bubble/solver.hpp"
#include "bubble/welfare.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>

using namespace bubble;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;
std::set<int> known;
int unexpected = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
    const auto start = Clock::now();
    Outcome r;
    try {
        r = body();
    } catch (const std::exception& e) {
        r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (secs > budget_s) {
        r.pass = false;
        r.detail += "; over budget";
    }
    if (!r.pass) {
        ++failures;
        if (!known.count(id)) ++unexpected;
    }
    std::printf("%s %2d %s: %s (%.2f s / %.0f s)\n", r.pass ? "PASS" : "FAIL", id, name, r.detail.c_str(), secs,
                budget_s);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

MarketModel exp_cutoff(double mu, double sigma, double alpha) {
    return MarketModel(mu, sigma, HazardModel::exponential_cutoff(1.0, 1.0), ExcessProfile::constant(alpha));
}

MarketModel uniform_jls(double alpha, double mu = 0.1) {
    return MarketModel(mu, 0.2, HazardModel::uniform(1.0), ExcessProfile::jls_polynomial({0.0, alpha}));
}

MarketModel example() { return uniform_jls(1.0, 0.0); }

// delta method: dCE/dEU = CE / ((1 - p) EU), = CE at p = 1
double ce_error(double eu, double se, double p) {
    const double ce = inverse_utility(eu, p);
    return p == 1.0 ? ce * se : std::fabs(ce / ((1.0 - p) * eu)) * se;
}

SimConfig mc_config(long paths) {
    SimConfig cfg;
    cfg.n_paths = paths;
    cfg.n_steps = 1024;
    return cfg;
}

const std::vector<double> kMu = {0.05, 0.1, 0.2, 0.3};
const std::vector<double> kSigma = {0.1, 0.2, 0.3, 0.4};
const std::vector<double> kAlpha = {0.1, 0.2, 0.4, 0.8};

}  // namespace

// --known-failures 9,... keeps the listed criteria out of the exit status.
int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--known-failures") {
            std::string list = argv[i + 1];
            for (size_t at = 0; at < list.size();) {
                size_t end = list.find(',', at);
                if (end == std::string::npos) end = list.size();
                known.insert(std::stoi(list.substr(at, end - at)));
                at = end + 1;
            }
        }
    criterion(1, "classification", 1.0, [] {
        const auto ex = classify_under_P(example()).verdict;
        auto t4 = uniform_jls(0.7);
        auto sol = solve_optimal(t4, Preference{4.0, 1.0});
        const auto q = classify_under_Q(t4, TiltFunction::from_solution(sol)).verdict;
        const auto p0 = classify_under_P(t4.with_mu(0.0)).verdict;
        const auto ec = classify_under_P(exp_cutoff(0.0, 0.2, 0.2)).verdict;
        const bool ok = ex == Verdict::StrictLocalMartingale && q == Verdict::TrueMartingale &&
                        p0 == Verdict::TrueMartingale && ec == Verdict::TrueMartingale;
        return Outcome{ok, "example " + to_string(ex) + ", uniform alpha=0.7 " + to_string(q) + " under Q_hat and " +
                               to_string(p0) + " under P, exp cutoff " + to_string(ec)};
    });

    criterion(2, "martingale defect", 60.0, [] {
        auto r = estimate_ST(example(), mc_config(1000000));
        const double target = 1.0 - std::exp(-1.0);
        const bool ok = std::fabs(r.mean - target) <= 3.0 * r.std_error && 1.0 - r.mean > 5.0 * r.std_error;
        return Outcome{ok, fmt("E[S_T] = %.6f +- %.2e, 1 - 1/e = %.6f", r.mean, r.std_error, target)};
    });

    criterion(3, "log-utility equivalence", 5.0, [] {
        double worst = 0.0;
        for (const auto& m : {exp_cutoff(0.1, 0.2, 0.2),
                              MarketModel(0.1, 0.2, HazardModel::exponential_cutoff(1.0, 1.0),
                                          ExcessProfile::linear_ramp(0.2))}) {
            GridSpec g;
            g.force_numeric = true;
            auto sol = solve_optimal(m, Preference{1.0, 1.0}, g);
            for (size_t i = 0; i < sol.t.size(); ++i)
                worst = std::max(worst, std::fabs(sol.y_hat.values()[i] - log_utility_solution(m, sol.t[i])));
        }
        return Outcome{worst <= 1e-8, fmt("sup error %.2e", worst)};
    });

    // criteria 4-6 share the 192 solves
    double bracket = 0.0, residual = 0.0, pos4 = 0.0, neg025 = 0.0, log_h = 0.0, tail_h = 0.0;
    double myopic_excess = -INFINITY;
    double myopic_min = INFINITY;
    long solves = 0;
    criterion(4, "bracket and residual", 120.0, [&] {
        for (double p : {0.25, 1.0, 4.0})
            for (double mu : kMu)
                for (double sigma : kSigma)
                    for (double alpha : kAlpha) {
                        auto sol = solve_optimal(exp_cutoff(mu, sigma, alpha), Preference{p, 1.0});
                        ++solves;
                        residual = std::max(residual, sol.max_residual);
                        for (size_t i = 0; i < sol.t.size(); ++i) {
                            const double t = sol.t[i], y = sol.y_hat.values()[i];
                            const double scale = 1.0 + std::fabs(y);
                            bracket = std::max({bracket, (sol.y_lower(t) - y) / scale, (y - sol.y_upper(t)) / scale});
                        }
                        auto d = decompose(sol);
                        const double merton = mu / (p * sigma * sigma);
                        for (size_t i = 0; i < d.t.size(); ++i) {
                            if (p == 4.0) pos4 = std::min(pos4, d.pi_h[i]);
                            if (p == 0.25) neg025 = std::max(neg025, d.pi_h[i]);
                            if (p == 1.0) log_h = std::max(log_h, std::fabs(d.pi_h[i]));
                            myopic_min = std::min(myopic_min, d.pi_m[i]);
                            myopic_excess = std::max(myopic_excess, (d.pi_m[i] - merton) / merton);
                        }
                        tail_h = std::max(tail_h, std::fabs(d.pi_h.back()));
                    }
        const bool ok = bracket <= 1e-12 && residual <= 1e-8;
        return Outcome{ok, fmt("%.0f solves, bracket violation %.2e, max residual %.2e", double(solves), bracket,
                               residual)};
    });

    criterion(5, "hedging-demand signs", 1.0, [&] {
        const bool ok = solves == 192 && pos4 >= -1e-12 && neg025 <= 1e-12 && log_h <= 1e-12 && tail_h <= 1e-3;
        return Outcome{ok, fmt("min pi_h(p=4) %.2e, max pi_h(p=0.25) %.2e, max |pi_h(p=1)| %.2e", pos4, neg025, log_h) +
                               fmt(", max |pi_h(t_N)| %.2e", tail_h)};
    });

    criterion(6, "myopic bounds", 1.0, [&] {
        // phi' = alpha > 0 throughout, so the bound is strict
        const bool ok = solves == 192 && myopic_min > 0.0 && myopic_excess < 0.0;
        return Outcome{ok, fmt("min pi_m %.3e, max (pi_m - merton)/merton %.3e", myopic_min, myopic_excess)};
    });

    struct McCase {
        double p;
        Solution sol;
    };
    std::vector<McCase> cases;
    for (double p : {4.0, 0.25}) cases.push_back({p, solve_optimal(exp_cutoff(0.1, 0.2, 0.2), Preference{p, 1.0})});
    std::vector<std::vector<EstimatorResult>> utilities;

    criterion(7, "certainty-equivalent cross-check", 120.0, [&] {
        bool ok = true;
        std::string detail;
        for (const auto& c : cases) {
            const auto& sol = c.sol;
            std::vector<Strategy> s = {Strategy::optimal(sol), Strategy::merton(sol.model, sol.prefs),
                                       Strategy::myopic(sol), Strategy::scaled(sol, 0.5), Strategy::scaled(sol, 1.5)};
            utilities.push_back(estimate_utility(sol.model, s, sol.prefs, mc_config(100000)));
            const auto& u = utilities.back()[0];
            const double ce = inverse_utility(u.mean, c.p), se = ce_error(u.mean, u.std_error, c.p);
            const double exact = certainty_equivalent(sol);
            ok = ok && std::fabs(ce - exact) <= 3.0 * se;
            detail += fmt("p=%.2f: MC %.6f +- %.1e", c.p, ce, se) + fmt(" vs %.6f; ", exact);
        }
        return Outcome{ok, detail};
    });

    criterion(8, "budget under the dual measure", 120.0, [&] {
        bool ok = true;
        std::string detail;
        for (const auto& c : cases) {
            auto r = estimate_budget(c.sol, mc_config(100000));
            ok = ok && std::fabs(r.mean - c.sol.prefs.x) <= 3.0 * r.std_error;
            detail += fmt("p=%.2f: %.6f +- %.1e; ", c.p, r.mean, r.std_error);
        }
        return Outcome{ok, detail};
    });

    criterion(9, "optimality dominance", 1.0, [&] {
        if (utilities.size() != cases.size()) return Outcome{false, "utility estimates missing"};
        bool ok = true;
        std::string detail;
        for (size_t k = 0; k < cases.size(); ++k) {
            const auto& u = utilities[k];
            detail += fmt("p=%.2f:", cases[k].p);
            for (size_t j = 1; j < u.size(); ++j) {
                const double margin = (u[0].mean - u[j].mean) / std::hypot(u[0].std_error, u[j].std_error);
                ok = ok && margin >= -3.0;
                detail += " " + u[j].label + fmt(" %+.1f SE", margin);
                if (u[j].bankrupt) detail += fmt(" (%.0f bankrupt paths)", double(u[j].bankrupt));
            }
            detail += "; ";
        }
        return Outcome{ok, detail};
    });

    criterion(10, "above-Merton fraction", 5.0, [] {
        auto m = MarketModel(0.3, 0.05, HazardModel::exponential_cutoff(1.0, 1.0), ExcessProfile::linear_ramp(0.2));
        auto sol = solve_optimal(m, Preference{4.0, 1.0});
        double best = 0.0;
        for (double t : sol.t) best = std::max(best, optimal_fraction(sol, t, false));
        return Outcome{best > 30.0, fmt("max pi_hat %.4f against merton 30", best)};
    });

    criterion(11, "strict-local continuity", 30.0, [] {
        const auto ref = solve_optimal(uniform_jls(1.0), Preference{4.0, 1.0});
        std::vector<double> sup;
        for (double a : {0.7, 0.9, 0.99}) {
            auto s = solve_optimal(uniform_jls(a), Preference{4.0, 1.0});
            double d = 0.0;
            for (size_t i = 0; i < s.t.size(); ++i)
                d = std::max(d, std::fabs(s.y_hat.values()[i] - ref.y(s.t[i])));
            sup.push_back(d);
        }
        const bool ok = sup[0] > sup[1] && sup[1] > sup[2];
        return Outcome{ok, fmt("sup |y_a - y_1| = %.3e, %.3e, %.3e", sup[0], sup[1], sup[2])};
    });

    criterion(12, "rESRL monotonicity", 10.0, [] {
        std::vector<double> r;
        for (double a : kAlpha) r.push_back(safe_rates(solve_optimal(exp_cutoff(0.1, 0.2, a), Preference{4.0, 1.0})).rESRL);
        const bool ok = r[0] < r[1] && r[1] < r[2] && r[2] < r[3];
        return Outcome{ok, fmt("rESRL %.4f, %.4f, %.4f", r[0], r[1], r[2]) + fmt(", %.4f", r[3])};
    });

    criterion(13, "tilted-measure identities", 60.0, [] {
        LpplHazard l{1.0, 0.3, 0.6, 8.0, 1.0};
        std::vector<MarketModel> models = {exp_cutoff(0.1, 0.2, 0.2), uniform_jls(0.7),
                                           MarketModel(0.2, 0.3, HazardModel::lppl(1.0, l), ExcessProfile::constant(0.4))};
        std::vector<TiltFunction> tilts = {
            TiltFunction::constant(0.0),
            TiltFunction::custom([](double t) { return 0.5 * (1.0 - t); }, [](double) { return -0.5; }, "linear"),
            TiltFunction::custom([](double t) { return 0.3 * std::sin(5.0 * t) * (1.0 - t); },
                                 [](double t) { return 1.5 * std::cos(5.0 * t) * (1.0 - t) - 0.3 * std::sin(5.0 * t); },
                                 "wave")};
        double rel = 0.0;
        for (const auto& m : models)
            for (const auto& y : tilts) {
                auto q = build_tilted_measure(m, y);
                for (double t : q.grid()) rel = std::max(rel, q.residuals(t).max());
            }
        double xi = 0.0;
        std::mt19937_64 rng(13);
        std::uniform_real_distribution<double> U(0.01, 0.99);
        for (const auto& m : models)
            for (double p : {0.25, 1.0, 4.0}) {
                auto s = solve_optimal(m, Preference{p, 1.0});
                auto q = build_tilted_measure(s.model, TiltFunction::from_solution(s));
                for (int i = 0; i < 10; ++i) xi = std::max(xi, xihat_identity_check(s, q, U(rng)));
            }
        return Outcome{rel <= 1e-10 && xi <= 1e-6, fmt("relation residual %.2e, xi_hat residual %.2e", rel, xi)};
    });

    criterion(14, "derivative identities", 60.0, [] {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        LpplHazard l{1.0, 0.3, 0.6, 8.0, 1.0};
        std::vector<MarketModel> models = {
            MarketModel(0.1, 0.2, HazardModel::exponential_cutoff(1.0, 1.0), ExcessProfile::linear_ramp(0.5)),
            MarketModel(0.2, 0.3, HazardModel::lppl(1.0, l), ExcessProfile::constant(0.4)),
            MarketModel(0.1, 0.2, HazardModel::uniform(1.0), ExcessProfile::jls_polynomial({0.1, 0.6}))};
        double worst = 0.0, ident = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const auto& m = models[size_t(i) % models.size()];
            Preference pr{std::exp(std::log(0.25) + std::log(16.0) * U(rng)), 1.0};
            const double t = 0.99 * U(rng);
            const double lb = lower_boundary(m, pr, t);
            const double y = lb + std::exp(std::log(1e-2) + std::log(1e3) * U(rng));
            const auto e = aux_eval(m, pr, t, y);
            const double h = 1e-3 * std::min(y - lb, 1.0);
            auto at = [&](double v) { return aux_eval(m, pr, t, v); };
            const double dm = derivative5([&](double v) { return at(v).m; }, y, h);
            const double dn = derivative5([&](double v) { return at(v).n; }, y, h);
            const double da = derivative5([&](double v) { return at(v).a; }, y, h);
            auto rel = [](double x, double ref) { return std::fabs(x - ref) / std::max(std::fabs(ref), 1e-3); };
            worst = std::max({worst, rel(e.dm_dy, dm), rel(e.dn_dy, dn), rel(e.da_dy, da)});

            const double s2 = m.sigma() * m.sigma(), p = pr.p, mu = m.mu(), d = m.dphi(t);
            const double c = (1.0 - p) / (2.0 * p * p * s2);
            const double b1 = aux_eval(m, Preference{1.0, 1.0}, t, y).b;
            const double n = -c * mu * mu + c * (d * y - mu) * (d * y - mu) + m.kappa(t) * (b1 - 1.0) / p;
            ident = std::max(ident, std::fabs(n - e.n) / std::max(std::fabs(e.n), 1.0));
        }
        return Outcome{worst <= 1e-6 && ident <= 1e-6,
                       fmt("max relative derivative error %.2e, n-identity %.2e", worst, ident)};
    });

    std::printf("%s: %d failing, %d unexpected\n", failures ? "FAIL" : "PASS", failures, unexpected);
    return unexpected ? 1 : 0;
}
