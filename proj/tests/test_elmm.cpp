#include "bubble/elmm.hpp"
#include "bubble/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace bubble;

namespace {

MarketModel uniform_jls(double a, double mu = 0.1) {
    return MarketModel(mu, 0.2, HazardModel::uniform(1.0), ExcessProfile::jls_polynomial({0.0, a}));
}

MarketModel baseline(double alpha = 0.2, double mu = 0.1) {
    return MarketModel(mu, 0.2, HazardModel::exponential_cutoff(1.0, 1.0), ExcessProfile::constant(alpha));
}

MarketModel lppl_model() {
    LpplHazard l{1.0, 0.2, 0.5, 6.0, 0.3};
    return MarketModel(0.1, 0.2, HazardModel::lppl(1.0, l), ExcessProfile::constant(0.2));
}

}  // namespace

TEST_CASE("zero tilt preserves the law") {
    auto m = baseline();
    auto q = build_tilted_measure(m, TiltFunction::constant(0.0));
    for (double t : {0.0, 0.2, 0.7, 0.99}) {
        CHECK(q.zeta(t) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(q.H(t) == doctest::Approx(m.hazard().cdf(t)).epsilon(1e-13));
        CHECK(q.kappa_H(t) == doctest::Approx(m.kappa(t)).epsilon(1e-9));
    }
    CHECK(q.atom() == doctest::Approx(std::exp(-1.0)).epsilon(1e-13));
}

TEST_CASE("constant tilt on the uniform hazard") {
    for (double c : {-0.5, 0.3, 2.0}) {
        auto m = MarketModel(0.1, 0.2, HazardModel::uniform(1.0), ExcessProfile::zero());
        auto q = build_tilted_measure(m, TiltFunction::constant(c));
        for (double t : {0.1, 0.5, 0.9, 0.999}) {
            CHECK(q.zeta(t) == doctest::Approx(std::pow(1.0 - t, c)).epsilon(1e-11));
            CHECK(q.H(t) == doctest::Approx(1.0 - std::pow(1.0 - t, 1.0 + c)).epsilon(1e-11));
        }
        CHECK(q.atom() == 0.0);
        for (double u : {0.05, 0.37, 0.9})
            CHECK(q.inverse(u) == doctest::Approx(1.0 - std::pow(1.0 - u, 1.0 / (1.0 + c))).epsilon(1e-10));
    }
}

TEST_CASE("unit tilt on the exponential cutoff") {
    auto q = build_tilted_measure(baseline(), TiltFunction::constant(1.0));
    for (double t : {0.1, 0.5, 0.9}) {
        CHECK(q.zeta(t) == doctest::Approx(std::exp(-t)).epsilon(1e-13));
        CHECK(q.compensator(t) == doctest::Approx(0.4 * t).epsilon(1e-13));
    }
    CHECK(q.atom() == doctest::Approx(std::exp(-2.0)).epsilon(1e-13));
    CHECK(q.inverse(0.95) == 1.0);
    CHECK(q.inverse(0.5) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("tilts with 1 + y <= 0 are rejected") {
    CHECK_THROWS_AS(build_tilted_measure(baseline(), TiltFunction::constant(-1.0)), ModelError);
    auto y = TiltFunction::custom([](double t) { return -2.0 * t; }, [](double) { return -2.0; }, "ramp");
    CHECK_THROWS_AS(build_tilted_measure(baseline(), y), ModelError);
}

TEST_CASE("relation residuals at every grid point") {
    // decaying tilts keep phi' y square integrable under the uniform hazard
    std::vector<MarketModel> models = {baseline(), uniform_jls(0.7), lppl_model()};
    std::vector<TiltFunction> tilts = {
        TiltFunction::constant(0.0),
        TiltFunction::custom([](double t) { return 0.5 * (1.0 - t); }, [](double) { return -0.5; }, "linear"),
        TiltFunction::custom([](double t) { return 0.3 * std::sin(5.0 * t) * (1.0 - t); },
                             [](double t) { return 1.5 * std::cos(5.0 * t) * (1.0 - t) - 0.3 * std::sin(5.0 * t); },
                             "wave")};
    for (const auto& m : models)
        for (const auto& y : tilts) {
            auto q = build_tilted_measure(m, y);
            double worst = 0.0;
            for (double t : q.grid()) worst = std::max(worst, q.residuals(t).max());
            CHECK(worst <= 1e-10);
        }
}

TEST_CASE("tilt bounds") {
    auto m = baseline();
    auto zero = verify_tilt_bounds(m, TiltFunction::constant(0.0));
    REQUIRE(zero);
    CHECK(zero->eps == 1.0);
    CHECK(zero->C == 1.0);
    auto half = verify_tilt_bounds(m, TiltFunction::constant(-0.5));
    REQUIRE(half);
    CHECK(half->eps == doctest::Approx(0.5));
    CHECK(half->C == 1.0);

    // phi' = 0.2 (1 - t): y = 1/phi' blows up where the upper indicator is off
    auto ramp = MarketModel(0.1, 0.2, HazardModel::exponential_cutoff(1.0, 1.0),
                            ExcessProfile::custom([](double t) { return 0.2 * (t - 0.5 * t * t); },
                                                  [](double t) { return 0.2 * (1.0 - t); },
                                                  [](double) { return -0.2; }, "decay"));
    auto inv = TiltFunction::custom([](double t) { return 1.0 / (0.2 * (1.0 - t)); },
                                    [](double t) { return 5.0 / ((1.0 - t) * (1.0 - t)); }, "inverse");
    CHECK_FALSE(verify_tilt_bounds(ramp, inv));
}

TEST_CASE("classification under tilted measures") {
    auto ex = uniform_jls(1.0, 0.0);
    CHECK(classify_under_Q(ex, TiltFunction::constant(0.0)).verdict == Verdict::StrictLocalMartingale);
    for (double c : {-0.5, 0.0, 1.0})
        CHECK(classify_under_Q(baseline(), TiltFunction::constant(c)).verdict == Verdict::TrueMartingale);
    auto t4 = uniform_jls(1.0);
    auto sol = solve_optimal(t4, Preference{4.0, 1.0});
    CHECK(classify_under_Q(t4, TiltFunction::from_solution(sol)).verdict == Verdict::StrictLocalMartingale);
    auto t7 = uniform_jls(0.7);
    auto sol7 = solve_optimal(t7, Preference{4.0, 1.0});
    CHECK(classify_under_Q(t7, TiltFunction::from_solution(sol7)).verdict == Verdict::TrueMartingale);
}

TEST_CASE("five-point derivative") {
    auto f = [](double x) { return std::sin(x); };
    CHECK(derivative5(f, 0.7, 1e-3) == doctest::Approx(std::cos(0.7)).epsilon(1e-11));
    CHECK(derivative5(f, 1e-4, 1e-3) == doctest::Approx(std::cos(1e-4)).epsilon(1e-9));
}
