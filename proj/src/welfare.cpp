#include "bubble/welfare.hpp"

#include "bubble/errors.hpp"
#include "bubble/quadrature.hpp"

#include <cmath>

namespace bubble {

namespace {

// int_0^T f along the solver grid, tail beyond t_N by dyadic shells.
double grid_integral(const Solution& sol, const ScalarFn& f) {
    NeumaierSum s;
    for (size_t i = 0; i + 1 < sol.t.size(); ++i) s.add(gauss_legendre(f, sol.t[i], sol.t[i + 1]));
    auto tail = tail_integrate(f, sol.t_N(), sol.model.horizon());
    if (tail.status == TailStatus::Diverged) throw SolverError("welfare integral diverges near T");
    s.add(tail.value);
    return s.value();
}

double log_ce_over_x(const Solution& sol) {
    const auto& m = sol.model;
    const double mu = m.mu(), s2 = m.sigma() * m.sigma(), T = m.horizon(), p = sol.prefs.p;
    if (!sol.prefs.is_log()) return mu * mu * T / (2.0 * p * s2) - p / (1.0 - p) * std::log(sol.m0);
    const auto& hz = m.hazard();
    double diffusive = grid_integral(sol, [&](double u) {
        double v = m.dphi(u) * sol.y(u);
        return v == 0.0 ? 0.0 : v * v * hz.survival(u) / (2.0 * s2);
    });
    double jump = grid_integral(sol, [&](double u) {
        double y = sol.y(u);
        return (std::log1p(y) - y / (1.0 + y)) * hz.density(u);
    });
    return mu * mu * T / (2.0 * s2) - diffusive - jump;
}

}  // namespace

double certainty_equivalent(const Solution& sol) { return sol.prefs.x * std::exp(log_ce_over_x(sol)); }

double black_scholes_ce(const Solution& sol) {
    const auto& m = sol.model;
    return sol.prefs.x * std::exp(m.mu() * m.mu() * m.horizon() / (2.0 * sol.prefs.p * m.sigma() * m.sigma()));
}

WelfareReport safe_rates(const Solution& sol) {
    const auto& m = sol.model;
    WelfareReport r;
    double l = log_ce_over_x(sol);
    r.CE = sol.prefs.x * std::exp(l);
    r.ESR = l / m.horizon();
    r.ESR_BS = m.mu() * m.mu() / (2.0 * sol.prefs.p * m.sigma() * m.sigma());
    r.rESRL = 1.0 - r.ESR / r.ESR_BS;
    return r;
}

namespace {

ScalarFn xihat_rate(const Solution& sol) {
    const auto& m = sol.model;
    const double ps2 = sol.prefs.p * m.sigma() * m.sigma();
    return [&sol, &m, ps2](double u) {
        double d = m.dphi(u);
        if (d == 0.0) return 0.0;
        double y = sol.y(u);
        return d * (m.mu() - d * y) * (1.0 + y) / ps2;
    };
}

}  // namespace

double xihat(const Solution& sol, double v) {
    const double T = sol.model.horizon();
    if (v < 0.0 || v >= T) throw DomainError("xi_hat is defined on [0, T)");
    return std::exp(integrate_toward(xihat_rate(sol), 0.0, v, T));
}

double xihat_identity_check(const Solution& sol, const TiltedMeasure& q, double v) {
    const double T = sol.model.horizon();
    if (!(v > 0.0 && v < T)) throw DomainError("identity check needs v in (0, T)");
    auto g = xihat_rate(sol);
    auto local = [&](double s) { return s >= v ? integrate_toward(g, v, s, T) : -integrate_toward(g, s, v, T); };
    double dlog = derivative5(local, v, 1e-3 * std::min(v, T - v));
    double kh = q.kappa_H(v);
    double a = aux_eval(sol.model, sol.prefs, v, sol.y(v)).a;
    // A^H xi / xi = 1 - (log xi)' / kappa^H
    return std::fabs(1.0 - dlog / kh - a);
}

double xihat_identity_check(const Solution& sol, double v) {
    return xihat_identity_check(sol, build_tilted_measure(sol.model, TiltFunction::from_solution(sol)), v);
}

}  // namespace bubble
