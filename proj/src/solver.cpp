#include "bubble/solver.hpp"

#include "bubble/errors.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bubble {

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

// Model data at a fixed time.
struct Coef {
    double k, d1, d2, delta, ddelta;
};

Coef coef(const MarketModel& model, double t) {
    Coef c;
    c.k = model.kappa(t);
    c.d1 = model.dphi(t);
    c.d2 = model.d2phi(t);
    c.delta = model.delta(t);
    c.ddelta = model.ddelta(t);
    return c;
}

struct Aux {
    const MarketModel& model;
    double p, mu, s2;  // s2 = p sigma^2

    Aux(const MarketModel& m, const Preference& prefs)
        : model(m), p(prefs.p), mu(m.mu()), s2(prefs.p * m.sigma() * m.sigma()) {}

    double am1(const Coef& c, double y) const { return -c.delta * (mu - c.d1 * y) / s2; }
    double a(const Coef& c, double y) const { return 1.0 + am1(c, y); }

    double m(const Coef& c, double y) const {
        if (y <= -1.0) return 0.0;
        return std::pow(1.0 + y, 1.0 / p) * a(c, y);
    }

    double dm(const Coef& c, double y) const {
        double da = c.delta * c.d1 / s2;
        return std::pow(1.0 + y, 1.0 / p) * (a(c, y) / (p * (1.0 + y)) + da);
    }

    double n(const Coef& c, double y) const {
        double av = a(c, y);
        double bm1 = am1(c, y) + (y / p) * av;
        double fy = c.d1 * y;
        return -(1.0 - p) * fy * fy / (2.0 * p * s2) + (c.k == 0.0 ? 0.0 : c.k * bm1);
    }

    double ybar(const Coef& c) const {
        if (c.d1 == 0.0) return -1.0;
        return std::max(-1.0, mu / c.d1 - s2 / (c.delta * c.d1));
    }

    double solve(const Coef& c, double f) const {
        if (!(f > 0.0) || !std::isfinite(f)) throw DomainError("implicit_solve target must be positive, got " + fmt(f));
        if (c.d1 == 0.0 || c.delta == 0.0) return std::pow(f, p) - 1.0;
        const double lo = ybar(c);
        double hi;
        if (mu > 0.0 && c.delta <= s2 / (2.0 * mu))
            hi = std::pow(2.0 * f, p);
        else
            hi = std::max(std::pow(f, p), mu / c.d1);
        hi = std::max(hi, lo + 1e-12 * (1.0 + std::fabs(lo)));
        auto g = [&](double y) { return m(c, y) - f; };
        for (int i = 0; g(hi) < 0.0; ++i) {
            if (i > 200) throw SolverError("implicit_solve: no upper bracket for target " + fmt(f));
            hi = 2.0 * hi + 1.0;
        }
        if (g(hi) == 0.0) return hi;
        boost::uintmax_t it = 200;
        auto r = boost::math::tools::toms748_solve(g, lo, hi, -f, g(hi), boost::math::tools::eps_tolerance<double>(50), it);
        double y = 0.5 * (r.first + r.second);
        const double tol = 1e-12 * std::max(1.0, f);
        for (int k = 0; k < 4; ++k) {
            double e = g(y);
            if (std::fabs(e) <= 0.25 * tol) break;
            double d = dm(c, y);
            if (!(d > 0.0)) break;
            double yn = y - e / d;
            if (!(yn > lo) || !(yn <= hi)) break;
            y = yn;
        }
        if (!(std::fabs(g(y)) <= 1e3 * tol))
            throw SolverError("implicit_solve: residual " + fmt(g(y)) + " for target " + fmt(f));
        return y;
    }

    double rhs(const Coef& c, double y) const {
        double av = a(c, y);
        double da_dy = c.delta * c.d1 / s2;
        double da_dt = -c.ddelta * (mu - c.d1 * y) / s2 + c.delta * c.d2 * y / s2;
        double den = av / (p * (1.0 + y)) + da_dy;
        return (av * n(c, y) - da_dt) / den;
    }
};

double bracket_exponent(const MarketModel& model, const Preference& prefs, double t) {
    double s = model.sigma();
    double mu = model.mu();
    return (1.0 - prefs.p) * mu * mu * (model.horizon() - t) / (2.0 * prefs.p * prefs.p * s * s);
}

void require_solvable(const MarketModel& model, const Preference& prefs) {
    if (!(prefs.p > 0.0) || !std::isfinite(prefs.p)) throw DomainError("risk aversion p must be positive");
    if (!(prefs.x > 0.0) || !std::isfinite(prefs.x)) throw DomainError("initial capital x must be positive");
    if (!(model.mu() > 0.0)) throw DomainError("optimal investment requires mu > 0");
}

}  // namespace

bool Preference::is_log() const { return std::fabs(p - 1.0) < 1e-6; }

double lower_boundary(const MarketModel& model, const Preference& prefs, double t) {
    return Aux(model, prefs).ybar(coef(model, t));
}

AuxEval aux_eval(const MarketModel& model, const Preference& prefs, double t, double y) {
    Aux ax(model, prefs);
    Coef c = coef(model, t);
    const double p = prefs.p;
    AuxEval e;
    e.a = ax.a(c, y);
    e.b = (1.0 + y / p) * e.a;
    e.m = ax.m(c, y);
    e.n = ax.n(c, y);
    e.da_dy = c.delta * c.d1 / ax.s2;
    e.dm_dy = ax.dm(c, y);
    e.dn_dy = c.k * (e.a / p + (1.0 + y) * e.da_dy);
    e.da_dt = -c.ddelta * (ax.mu - c.d1 * y) / ax.s2 + c.delta * c.d2 * y / ax.s2;
    return e;
}

double implicit_solve(const MarketModel& model, const Preference& prefs, double t, double target) {
    return Aux(model, prefs).solve(coef(model, t), target);
}

Curve myopic_curve(const MarketModel& model, const Preference& prefs, const std::vector<double>& grid) {
    Aux ax(model, prefs);
    std::vector<double> y(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) y[i] = ax.solve(coef(model, grid[i]), 1.0);
    return Curve::monotone(grid, std::move(y));
}

std::pair<Curve, Curve> bracket_curves(const MarketModel& model, const Preference& prefs,
                                       const std::vector<double>& grid) {
    Aux ax(model, prefs);
    std::vector<double> lo(grid.size()), hi(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) {
        Coef c = coef(model, grid[i]);
        double ym = ax.solve(c, 1.0);
        double e = bracket_exponent(model, prefs, grid[i]);
        double yb = e == 0.0 ? ym : ax.solve(c, std::exp(e));
        if (prefs.p < 1.0) {
            lo[i] = ym;
            hi[i] = yb;
        } else {
            lo[i] = yb;
            hi[i] = ym;
        }
    }
    return {Curve::monotone(grid, std::move(lo)), Curve::monotone(grid, std::move(hi))};
}

double ode_rhs(const MarketModel& model, const Preference& prefs, double t, double y) {
    Aux ax(model, prefs);
    Coef c = coef(model, t);
    if (!(y > ax.ybar(c))) throw DomainError("ode_rhs: (t, y) outside the admissible domain");
    return ax.rhs(c, y);
}

double log_utility_solution(const MarketModel& model, double t) {
    double d1 = model.dphi(t);
    if (d1 == 0.0) return 0.0;
    double delta = model.delta(t);
    double mu = model.mu(), s = model.sigma();
    double c = mu - d1 - s * s / delta;
    double r = std::sqrt(c * c + 4.0 * mu * d1);
    return c >= 0.0 ? (c + r) / (2.0 * d1) : 2.0 * mu / (r - c);
}

std::vector<double> solver_grid(double T, const GridSpec& spec) {
    if (spec.points < 3) throw DomainError("solver grid needs at least 3 points");
    if (!(spec.eps_rel > 0.0 && spec.eps_rel < 0.5)) throw DomainError("terminal truncation must lie in (0, 0.5)");
    return chebyshev_grid(T * (1.0 - spec.eps_rel), spec.points);
}

double Solution::y(double s) const {
    const double tn = t_N();
    if (s <= tn) return y_hat(s);
    double yn = y_hat.values().back();
    if (s >= model.horizon()) return yn;
    double dn = model.dphi(tn), ds = model.dphi(s);
    if (dn > 0.0 && ds > 0.0) return yn * dn / ds;
    return yn;
}

std::vector<double> integral_residuals(const MarketModel& model, const Preference& prefs, const Curve& y,
                                       double eps_T, double* tail_out) {
    Aux ax(model, prefs);
    const auto& t = y.knots();
    const size_t N = t.size() - 1;
    const auto& xs = gl_nodes();
    const auto& ws = gl_weights();
    std::vector<double> res(N + 1);
    double tail = eps_T * ax.n(coef(model, t[N]), y.values()[N]);
    NeumaierSum J;
    J.add(tail);
    auto r_at = [&](size_t i) {
        double m = ax.m(coef(model, t[i]), y.values()[i]);
        return std::fabs(m * std::exp(J.value()) - 1.0);
    };
    res[N] = r_at(N);
    for (size_t i = N; i-- > 0;) {
        double c = 0.5 * (t[i] + t[i + 1]), h = 0.5 * (t[i + 1] - t[i]);
        double s = 0.0;
        for (size_t j = 0; j < xs.size(); ++j) {
            double u = c + h * xs[j];
            s += ws[j] * ax.n(coef(model, u), y(u));
        }
        J.add(s * h);
        res[i] = r_at(i);
    }
    if (tail_out) *tail_out = tail;
    return res;
}

namespace {

namespace odeint = boost::numeric::odeint;

struct RawSolve {
    std::vector<double> y, residual;
    double tail = 0.0;
    int iterations = 0;
};

// L(t) = log m(t, y(t)) solves L' = n(t, Y(t, L)) backward from L(T) = 0.
RawSolve solve_backward_ode(const MarketModel& model, const Preference& prefs, const std::vector<double>& t,
                            double eps_T) {
    Aux ax(model, prefs);
    const size_t N = t.size() - 1;
    auto Y = [&](double s, double L) { return ax.solve(coef(model, s), std::exp(L)); };
    auto sys = [&](const double& L, double& dL, double s) {
        Coef c = coef(model, s);
        dL = ax.n(c, ax.solve(c, std::exp(L)));
    };

    // tail int_{t_N}^T n by a one-point rule, iterated for consistency
    double L = 0.0;
    for (int k = 0; k < 4; ++k) L = -eps_T * ax.n(coef(model, t[N]), Y(t[N], L));
    const double tail = -L;

    const auto& xs = gl_nodes();
    const auto& ws = gl_weights();
    const size_t G = xs.size();
    std::vector<double> times;
    times.reserve(N * (G + 1) + 1);
    times.push_back(t[N]);
    std::vector<size_t> order(G);
    for (size_t j = 0; j < G; ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return xs[a] > xs[b]; });
    for (size_t i = N; i-- > 0;) {
        double c = 0.5 * (t[i] + t[i + 1]), h = 0.5 * (t[i + 1] - t[i]);
        for (size_t j : order) times.push_back(c + h * xs[j]);
        times.push_back(t[i]);
    }
    std::vector<double> Ls;
    Ls.reserve(times.size());
    using stepper_t = odeint::runge_kutta_dopri5<double, double, double, double, odeint::vector_space_algebra>;
    auto stepper = odeint::make_controlled<stepper_t>(1e-14, 1e-13);
    double dt = -(t[N] - t[N - 1]) * 0.1;
    odeint::integrate_times(stepper, sys, L, times.begin(), times.end(), dt,
                            [&](const double& x, double) { Ls.push_back(x); },
                            odeint::max_step_checker(100000));

    RawSolve out;
    out.tail = tail;
    out.y.assign(N + 1, 0.0);
    out.residual.assign(N + 1, 0.0);
    NeumaierSum J;
    J.add(tail);
    size_t pos = 0;
    out.y[N] = Y(t[N], Ls[pos]);
    out.residual[N] = std::fabs(std::exp(Ls[pos] + J.value()) - 1.0);
    ++pos;
    for (size_t i = N; i-- > 0;) {
        double h = 0.5 * (t[i + 1] - t[i]);
        double s = 0.0;
        for (size_t j : order) {
            double u = times[pos];
            s += ws[j] * ax.n(coef(model, u), Y(u, Ls[pos]));
            ++pos;
        }
        J.add(s * h);
        out.y[i] = Y(t[i], Ls[pos]);
        out.residual[i] = std::fabs(std::exp(Ls[pos] + J.value()) - 1.0);
        ++pos;
    }
    out.iterations = int(times.size());
    return out;
}

RawSolve solve_fixed_point(const MarketModel& model, const Preference& prefs, const std::vector<double>& t,
                           const std::vector<double>& lo, const std::vector<double>& hi, double eps_T,
                           int max_iterations) {
    Aux ax(model, prefs);
    const size_t N = t.size() - 1;
    std::vector<double> y = lo;
    std::vector<double> next(N + 1);
    RawSolve out;
    for (int it = 1; it <= max_iterations; ++it) {
        Curve cur = Curve::monotone(t, y);
        // J_i = int_{t_i}^T n(u, y(u))
        std::vector<double> J(N + 1);
        NeumaierSum acc;
        acc.add(eps_T * ax.n(coef(model, t[N]), y[N]));
        J[N] = acc.value();
        for (size_t i = N; i-- > 0;) {
            acc.add(gauss_legendre([&](double u) { return ax.n(coef(model, u), cur(u)); }, t[i], t[i + 1]));
            J[i] = acc.value();
        }
        double change = 0.0;
        for (size_t i = 0; i <= N; ++i) {
            double target = ax.solve(coef(model, t[i]), std::exp(-J[i]));
            target = std::clamp(target, lo[i], hi[i]);
            next[i] = 0.5 * y[i] + 0.5 * target;
            change = std::max(change, std::fabs(next[i] - y[i]));
        }
        y.swap(next);
        if (change <= 1e-10) {
            out.iterations = it;
            out.y = y;
            Curve fin = Curve::monotone(t, y);
            out.residual = integral_residuals(model, prefs, fin, eps_T, &out.tail);
            return out;
        }
    }
    throw SolverError("fixed-point iteration did not converge in " + std::to_string(max_iterations) + " iterations");
}

Solution assemble(const MarketModel& model, const Preference& prefs, const std::vector<double>& t,
                  std::vector<double> y, const Curve& lo, const Curve& hi, double eps_T) {
    Solution sol(model, prefs);
    Aux ax(model, prefs);
    sol.t = t;
    sol.eps_T = eps_T;
    sol.y_lower = lo;
    sol.y_upper = hi;
    sol.y_myopic = prefs.p < 1.0 ? lo : hi;
    if (prefs.is_log()) sol.y_myopic = lo;
    double viol = 0.0;
    for (size_t i = 0; i < t.size(); ++i) {
        double l = lo.values()[i], u = hi.values()[i];
        double v = std::max({l - y[i], y[i] - u, 0.0}) / (1.0 + std::fabs(y[i]));
        viol = std::max(viol, v);
        y[i] = std::clamp(y[i], l, u);
    }
    sol.bracket_violation = viol;
    std::vector<double> dy(t.size());
    for (size_t i = 0; i < t.size(); ++i) {
        Coef c = coef(model, t[i]);
        if (!(y[i] > ax.ybar(c))) throw SolverError("solution left the admissible domain at t=" + fmt(t[i]));
        if (!(ax.a(c, y[i]) > 0.0)) throw SolverError("post-crash wealth factor a <= 0 at t=" + fmt(t[i]));
        dy[i] = ax.rhs(c, y[i]);
    }
    sol.y_hat = Curve(t, std::move(y), std::move(dy));
    sol.m0 = ax.m(coef(model, 0.0), sol.y_hat.values()[0]);
    sol.z_hat = dual_multiplier(sol);
    return sol;
}

}  // namespace

Solution solve_optimal(const MarketModel& model, const Preference& prefs, const GridSpec& spec) {
    require_solvable(model, prefs);
    const double T = model.horizon();
    const double eps_T = spec.eps_rel * T;
    auto t = solver_grid(T, spec);
    auto [lo, hi] = bracket_curves(model, prefs, t);

    if (prefs.is_log() && !spec.force_numeric) {
        std::vector<double> y(t.size());
        for (size_t i = 0; i < t.size(); ++i) y[i] = log_utility_solution(model, t[i]);
        Solution sol = assemble(model, prefs, t, std::move(y), lo, hi, eps_T);
        sol.residual = integral_residuals(model, prefs, sol.y_hat, eps_T, &sol.tail);
        sol.max_residual = *std::max_element(sol.residual.begin(), sol.residual.end());
        sol.method = "closed_form";
        return sol;
    }

    RawSolve raw;
    std::string method;
    std::string failures;
    auto worst = [](const RawSolve& r) { return *std::max_element(r.residual.begin(), r.residual.end()); };
    auto attempt = [&](SolveMethod which) {
        try {
            RawSolve r = which == SolveMethod::FixedPoint
                             ? solve_fixed_point(model, prefs, t, lo.values(), hi.values(), eps_T, spec.max_iterations)
                             : solve_backward_ode(model, prefs, t, eps_T);
            if (method.empty() || worst(r) < worst(raw)) {
                raw = std::move(r);
                method = which == SolveMethod::FixedPoint ? "fixed_point" : "backward_ode";
            }
        } catch (const std::exception& e) {
            failures += std::string(failures.empty() ? "" : "; ") + e.what();
        }
    };
    attempt(spec.method);
    if (method.empty() || !(worst(raw) <= spec.tol))
        attempt(spec.method == SolveMethod::FixedPoint ? SolveMethod::BackwardOde : SolveMethod::FixedPoint);
    if (method.empty()) throw SolverError("integral equation not solved: " + failures);
    Solution sol = assemble(model, prefs, t, raw.y, lo, hi, eps_T);
    sol.residual = std::move(raw.residual);
    sol.tail = raw.tail;
    sol.iterations = raw.iterations;
    sol.method = method;
    sol.max_residual = *std::max_element(sol.residual.begin(), sol.residual.end());
    if (!(sol.max_residual <= spec.tol)) {
        std::ostringstream os;
        os << "integral-equation residual " << sol.max_residual << " exceeds tolerance " << spec.tol << " (" << method
           << "); residual trace:";
        for (size_t i = 0; i < sol.residual.size(); i += std::max<size_t>(1, sol.residual.size() / 8))
            os << " t=" << sol.t[i] << ":" << sol.residual[i];
        if (!failures.empty()) os << "; " << failures;
        throw SolverError(os.str());
    }
    const double m_N = aux_eval(model, prefs, sol.t_N(), sol.y_hat.values().back()).m;
    if (!(std::fabs(m_N - 1.0) <= 1e-4))
        throw SolverError("terminal condition violated: m(t_N, y_hat(t_N)) = " + fmt(m_N) + " (" + method + ")");
    return sol;
}

Solution solution_from_values(const MarketModel& model, const Preference& prefs, std::vector<double> t,
                              std::vector<double> y) {
    require_solvable(model, prefs);
    if (t.size() != y.size() || t.size() < 3) throw DomainError("tabulated solution needs matching t and y columns");
    const double eps_T = model.horizon() - t.back();
    if (!(eps_T > 0.0)) throw DomainError("tabulated solution must end before the horizon");
    auto [lo, hi] = bracket_curves(model, prefs, t);
    Solution sol = assemble(model, prefs, t, std::move(y), lo, hi, eps_T);
    sol.residual = integral_residuals(model, prefs, sol.y_hat, eps_T, &sol.tail);
    sol.max_residual = *std::max_element(sol.residual.begin(), sol.residual.end());
    sol.method = "tabulated";
    return sol;
}

double optimal_fraction(const Solution& sol, double t, bool crashed) {
    const auto& m = sol.model;
    const double ps2 = sol.prefs.p * m.sigma() * m.sigma();
    if (crashed || t >= m.horizon()) return m.mu() / ps2;
    return (m.mu() - m.dphi(t) * sol.y(t)) / ps2;
}

Decomposition decompose(const Solution& sol) {
    Decomposition d;
    const auto& m = sol.model;
    const double ps2 = sol.prefs.p * m.sigma() * m.sigma();
    d.t = sol.t;
    for (size_t i = 0; i < sol.t.size(); ++i) {
        double d1 = m.dphi(sol.t[i]);
        double yh = sol.y_hat.values()[i], ym = sol.y_myopic.values()[i];
        d.pi_hat.push_back((m.mu() - d1 * yh) / ps2);
        d.pi_m.push_back((m.mu() - d1 * ym) / ps2);
        d.pi_h.push_back(d1 * (ym - yh) / ps2);
    }
    return d;
}

double dual_multiplier(const Solution& sol) {
    const auto& m = sol.model;
    const double p = sol.prefs.p, s = m.sigma(), mu = m.mu();
    double log_inv = std::log(sol.prefs.x) + std::log(sol.m0) -
                     (1.0 - p) * mu * mu * m.horizon() / (2.0 * p * p * s * s);
    return std::exp(-p * log_inv);
}

}  // namespace bubble
