#include "bubble/elmm.hpp"
#include "bubble/errors.hpp"
#include "bubble/solver.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace bubble;

namespace {

MarketModel baseline(double alpha = 0.2, double mu = 0.1, double sigma = 0.2) {
    return MarketModel(mu, sigma, HazardModel::exponential_cutoff(1.0, 1.0), ExcessProfile::constant(alpha));
}

MarketModel zero_profile() {
    return MarketModel(0.1, 0.2, HazardModel::exponential_cutoff(1.0, 1.0), ExcessProfile::zero());
}

MarketModel ramp(double beta = 0.2) {
    return MarketModel(0.1, 0.2, HazardModel::exponential_cutoff(1.0, 1.0), ExcessProfile::linear_ramp(beta));
}

// 30-digit roots of m(0, y, p) = target for the baseline model
constexpr double kMyopic4 = 0.268842865712801288;
constexpr double kLower4 = 0.218777076150516596;
constexpr double kLog = 0.280776406404415137;

}  // namespace

TEST_CASE("lower boundary") {
    CHECK(lower_boundary(zero_profile(), Preference{4.0, 1.0}, 0.3) == -1.0);
    CHECK(lower_boundary(baseline(), Preference{4.0, 1.0}, 0.3) == -1.0);
    CHECK(lower_boundary(baseline(0.2, 0.3, 0.05), Preference{4.0, 1.0}, 0.3) == doctest::Approx(1.25).epsilon(1e-14));
}

TEST_CASE("auxiliary functions") {
    auto z = aux_eval(zero_profile(), Preference{4.0, 1.0}, 0.4, 0.0);
    CHECK(z.a == 1.0);
    CHECK(z.b == 1.0);
    CHECK(z.m == 1.0);
    CHECK(z.n == 0.0);
    auto b = aux_eval(baseline(), Preference{4.0, 1.0}, 0.4, 0.0);
    CHECK(b.a == doctest::Approx(0.875).epsilon(1e-15));
    CHECK(b.m == doctest::Approx(0.875).epsilon(1e-15));
}

TEST_CASE("implicit solve") {
    Preference p4{4.0, 1.0};
    CHECK(implicit_solve(zero_profile(), p4, 0.2, 1.0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(std::fabs(implicit_solve(baseline(), p4, 0.2, 0.875)) < 1e-13);
    CHECK(implicit_solve(baseline(), p4, 0.2, 1.0) == doctest::Approx(kMyopic4).epsilon(1e-13));
    CHECK(aux_eval(baseline(), p4, 0.2, implicit_solve(baseline(), p4, 0.2, 1.7)).m ==
          doctest::Approx(1.7).epsilon(1e-13));
}

TEST_CASE("myopic curve") {
    auto grid = solver_grid(1.0, GridSpec{});
    auto z = myopic_curve(zero_profile(), Preference{4.0, 1.0}, grid);
    for (double v : z.values()) CHECK(std::fabs(v) < 1e-14);
    auto b = myopic_curve(baseline(), Preference{4.0, 1.0}, grid);
    for (double v : b.values()) CHECK(v == doctest::Approx(kMyopic4).epsilon(1e-12));
    auto l = myopic_curve(baseline(), Preference{1.0, 1.0}, grid);
    for (double v : l.values()) CHECK(v == doctest::Approx(kLog).epsilon(1e-12));
}

TEST_CASE("bracket curves") {
    auto grid = solver_grid(1.0, GridSpec{});
    auto [lo1, up1] = bracket_curves(baseline(), Preference{1.0, 1.0}, grid);
    for (size_t i = 0; i < grid.size(); ++i) {
        CHECK(lo1.values()[i] == doctest::Approx(kLog).epsilon(1e-12));
        CHECK(up1.values()[i] == doctest::Approx(kLog).epsilon(1e-12));
    }
    auto [lo, up] = bracket_curves(baseline(), Preference{4.0, 1.0}, grid);
    CHECK(lo(0.0) == doctest::Approx(kLower4).epsilon(1e-12));
    CHECK(up(0.0) == doctest::Approx(kMyopic4).epsilon(1e-12));
    for (double p : {0.25, 4.0}) {
        auto [l, u] = bracket_curves(ramp(), Preference{p, 1.0}, grid);
        for (size_t i = 0; i < grid.size(); ++i) CHECK(u.values()[i] >= l.values()[i]);
    }
}

TEST_CASE("ODE right-hand side") {
    CHECK(ode_rhs(zero_profile(), Preference{4.0, 1.0}, 0.3, 0.0) == 0.0);
    CHECK(std::fabs(ode_rhs(baseline(), Preference{1.0, 1.0}, 0.3, kLog)) < 1e-13);
    auto sol = solve_optimal(ramp(), Preference{4.0, 1.0});
    // ramp data are smooth, so y_hat' = f(t, y_hat) in the interior
    for (double t : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const double h = 1e-5;
        double fd = (sol.y(t + h) - sol.y(t - h)) / (2 * h);
        CHECK(fd == doctest::Approx(ode_rhs(sol.model, sol.prefs, t, sol.y(t))).epsilon(1e-4));
    }
}

TEST_CASE("zero profile solves to y_hat = 0") {
    for (double p : {0.25, 1.0, 4.0}) {
        auto sol = solve_optimal(zero_profile(), Preference{p, 1.0});
        for (double v : sol.y_hat.values()) CHECK(std::fabs(v) < 1e-14);
        CHECK(sol.max_residual < 1e-14);
        for (double t : {0.0, 0.5, 0.99})
            CHECK(optimal_fraction(sol, t, false) == doctest::Approx(0.1 / (p * 0.04)).epsilon(1e-13));
    }
}

TEST_CASE("log utility closed form") {
    CHECK(log_utility_solution(zero_profile(), 0.4) == 0.0);
    CHECK(log_utility_solution(baseline(), 0.4) == doctest::Approx(kLog).epsilon(1e-14));
    CHECK(aux_eval(baseline(), Preference{1.0, 1.0}, 0.4, log_utility_solution(baseline(), 0.4)).m ==
          doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& m : {baseline(), ramp()}) {
        GridSpec g;
        g.force_numeric = true;
        auto sol = solve_optimal(m, Preference{1.0, 1.0}, g);
        double worst = 0.0;
        for (size_t i = 0; i < sol.t.size(); ++i)
            worst = std::max(worst, std::fabs(sol.y_hat.values()[i] - log_utility_solution(m, sol.t[i])));
        CHECK(worst <= 1e-8);
    }
}

TEST_CASE("bracket and residual on the baseline") {
    for (double p : {0.25, 4.0}) {
        auto sol = solve_optimal(baseline(), Preference{p, 1.0});
        CHECK(sol.max_residual <= 1e-8);
        CHECK(aux_eval(sol.model, sol.prefs, sol.t_N(), sol.y_hat.values().back()).m == doctest::Approx(1.0).epsilon(1e-4));
        for (size_t i = 0; i < sol.t.size(); ++i) {
            const double t = sol.t[i], y = sol.y_hat.values()[i];
            CHECK(y >= sol.y_lower(t) - 1e-12);
            CHECK(y <= sol.y_upper(t) + 1e-12);
        }
    }
}

TEST_CASE("backward ODE and fixed point agree") {
    for (double p : {0.25, 4.0}) {
        GridSpec fp;
        fp.method = SolveMethod::FixedPoint;
        auto a = solve_optimal(baseline(), Preference{p, 1.0});
        auto b = solve_optimal(baseline(), Preference{p, 1.0}, fp);
        CHECK(a.method == "backward_ode");
        CHECK(b.method == "fixed_point");
        double worst = 0.0;
        for (size_t i = 0; i < a.t.size(); ++i)
            worst = std::max(worst, std::fabs(a.y_hat.values()[i] - b.y_hat.values()[i]));
        CHECK(worst < 1e-7);
    }
}

TEST_CASE("fixed point falls back to the backward ODE") {
    GridSpec g;
    g.method = SolveMethod::FixedPoint;
    g.max_iterations = 2;
    auto sol = solve_optimal(baseline(), Preference{4.0, 1.0}, g);
    CHECK(sol.method == "backward_ode");
    CHECK(sol.max_residual <= 1e-8);
    g.tol = 1e-30;
    auto jls = MarketModel(0.1, 0.2, HazardModel::uniform(1.0), ExcessProfile::jls_polynomial({0.0, 0.7}));
    CHECK_THROWS_AS(solve_optimal(jls, Preference{4.0, 1.0}, g), SolverError);
}

TEST_CASE("optimal fraction") {
    auto sol = solve_optimal(baseline(), Preference{4.0, 1.0});
    CHECK(optimal_fraction(sol, 0.5, true) == doctest::Approx(0.625).epsilon(1e-15));
    auto log = solve_optimal(baseline(), Preference{1.0, 1.0});
    CHECK(optimal_fraction(log, 0.5, false) == doctest::Approx(1.0961179679779243).epsilon(1e-12));
}

TEST_CASE("decomposition") {
    auto log = decompose(solve_optimal(baseline(), Preference{1.0, 1.0}));
    for (double v : log.pi_h) CHECK(std::fabs(v) < 1e-12);
    auto d4 = decompose(solve_optimal(baseline(), Preference{4.0, 1.0}));
    for (double v : d4.pi_h) CHECK(v >= -1e-12);
    auto d025 = decompose(solve_optimal(baseline(), Preference{0.25, 1.0}));
    for (double v : d025.pi_h) CHECK(v <= 1e-12);
    auto z = decompose(solve_optimal(zero_profile(), Preference{4.0, 1.0}));
    for (size_t i = 0; i < z.t.size(); ++i) {
        CHECK(z.pi_m[i] == doctest::Approx(0.625).epsilon(1e-13));
        CHECK(std::fabs(z.pi_h[i]) < 1e-13);
    }
}

TEST_CASE("dual multiplier") {
    CHECK(dual_multiplier(solve_optimal(baseline(), Preference{1.0, 1.0})) == doctest::Approx(1.0).epsilon(1e-12));
    auto z = solve_optimal(zero_profile(), Preference{4.0, 1.0});
    // z^(-1/p) = exp(3 * 0.01 / (2 * 16 * 0.04))
    CHECK(dual_multiplier(z) == doctest::Approx(std::exp(-0.09375)).epsilon(1e-12));
    auto b1 = solve_optimal(baseline(), Preference{4.0, 1.0});
    auto b2 = solve_optimal(baseline(), Preference{4.0, 2.0});
    CHECK(dual_multiplier(b2) == doctest::Approx(dual_multiplier(b1) / 16.0).epsilon(1e-12));
}

TEST_CASE("m is strictly increasing in y above the lower boundary") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto m = ramp(0.5);
    for (int i = 0; i < 2000; ++i) {
        Preference pr{0.25 + 4.0 * U(rng), 1.0};
        double t = 0.999 * U(rng);
        double lb = lower_boundary(m, pr, t);
        double y1 = lb + 1e-6 + 3.0 * U(rng), y2 = y1 + 1e-3 + U(rng);
        auto a1 = aux_eval(m, pr, t, y1), a2 = aux_eval(m, pr, t, y2);
        CHECK(a2.m > a1.m);
        CHECK(a1.dm_dy > 0.0);
    }
}

TEST_CASE("solution round trip through tabulated values") {
    auto sol = solve_optimal(baseline(), Preference{4.0, 1.0});
    auto back = solution_from_values(sol.model, sol.prefs, sol.t, sol.y_hat.values());
    CHECK(back.m0 == doctest::Approx(sol.m0).epsilon(1e-14));
    for (double t : {0.1, 0.5, 0.9}) CHECK(back.y(t) == doctest::Approx(sol.y(t)).epsilon(1e-8));
}

TEST_CASE("invalid inputs") {
    auto flat = MarketModel(0.0, 0.2, HazardModel::exponential_cutoff(1.0, 1.0), ExcessProfile::constant(0.2));
    CHECK_THROWS_AS(solve_optimal(flat, Preference{4.0, 1.0}), DomainError);
    CHECK_THROWS_AS(solve_optimal(baseline(), Preference{-1.0, 1.0}), DomainError);
}

TEST_CASE("derivative identities on random points of U") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    LpplHazard l{1.0, 0.3, 0.6, 8.0, 1.0};
    std::vector<MarketModel> models = {
        ramp(0.5), MarketModel(0.2, 0.3, HazardModel::lppl(1.0, l), ExcessProfile::constant(0.4)),
        MarketModel(0.1, 0.2, HazardModel::uniform(1.0), ExcessProfile::jls_polynomial({0.1, 0.6}))};
    double worst = 0.0;
    for (int i = 0; i < 3000; ++i) {
        const auto& m = models[size_t(i) % models.size()];
        Preference pr{std::exp(std::log(0.25) + std::log(16.0) * U(rng)), 1.0};
        const double t = 0.99 * U(rng);
        const double lb = lower_boundary(m, pr, t);
        const double y = lb + std::exp(std::log(1e-2) + std::log(1e3) * U(rng));
        auto e = aux_eval(m, pr, t, y);
        const double h = 1e-3 * std::min(y - lb, 1.0);
        auto at = [&](double v) { return aux_eval(m, pr, t, v); };
        double dm = derivative5([&](double v) { return at(v).m; }, y, h);
        double dn = derivative5([&](double v) { return at(v).n; }, y, h);
        double da = derivative5([&](double v) { return at(v).a; }, y, h);
        auto rel = [](double x, double ref) { return std::fabs(x - ref) / std::max(std::fabs(ref), 1e-3); };
        worst = std::max({worst, rel(e.dm_dy, dm), rel(e.dn_dy, dn), rel(e.da_dy, da)});

        const double s2 = m.sigma() * m.sigma(), p = pr.p, mu = m.mu(), d = m.dphi(t);
        const double c = (1.0 - p) / (2.0 * p * p * s2);
        const double b1 = aux_eval(m, Preference{1.0, 1.0}, t, y).b;
        const double n = -c * mu * mu + c * (d * y - mu) * (d * y - mu) + m.kappa(t) * (b1 - 1.0) / p;
        const double scale = std::fabs(c) * (mu * mu + (d * y - mu) * (d * y - mu)) + m.kappa(t) * std::fabs(b1 - 1.0) / p;
        CHECK(std::fabs(n - e.n) <= 1e-12 * std::max(scale, 1.0));
        CHECK(e.a > 0.0);
        CHECK(e.dn_dy > 0.0);
        CHECK(e.b == doctest::Approx((1.0 + y / p) * e.a).epsilon(1e-13));
    }
    CHECK(worst <= 1e-6);
}
