#pragma once

#include "bubble/curve.hpp"
#include "bubble/hazard_model.hpp"

#include <string>
#include <utility>
#include <vector>

namespace bubble {

struct Preference {
    double p = 4.0;  // relative risk aversion
    double x = 1.0;  // initial capital
    bool is_log() const;
};

struct AuxEval {
    double a, b, m, n;
    double da_dy, dm_dy, dn_dy, da_dt;
};

double lower_boundary(const MarketModel& model, const Preference& prefs, double t);
AuxEval aux_eval(const MarketModel& model, const Preference& prefs, double t, double y);
// Unique y > lower_boundary(t) with m(t, y, p) = target.
double implicit_solve(const MarketModel& model, const Preference& prefs, double t, double target);
Curve myopic_curve(const MarketModel& model, const Preference& prefs, const std::vector<double>& grid);
// (y_lower, y_upper)
std::pair<Curve, Curve> bracket_curves(const MarketModel& model, const Preference& prefs,
                                       const std::vector<double>& grid);
double ode_rhs(const MarketModel& model, const Preference& prefs, double t, double y);
double log_utility_solution(const MarketModel& model, double t);

enum class SolveMethod { BackwardOde, FixedPoint };

struct GridSpec {
    int points = 512;
    double eps_rel = 1e-6;  // t_N = T (1 - eps_rel)
    double tol = 1e-8;      // residual tolerance
    SolveMethod method = SolveMethod::BackwardOde;  // the other method is the fallback
    bool force_numeric = false;  // skip the log-utility closed form at p = 1
    int max_iterations = 2000;   // fixed-point budget
};

std::vector<double> solver_grid(double T, const GridSpec& spec);

class Solution {
public:
    Solution(MarketModel model, Preference prefs) : model(std::move(model)), prefs(prefs) {}

    MarketModel model;
    Preference prefs;
    std::vector<double> t;
    Curve y_hat;
    Curve y_lower, y_upper, y_myopic;
    std::vector<double> residual;
    double max_residual = 0.0;
    double bracket_violation = 0.0;  // before clamping, relative to 1 + |y|
    double m0 = 1.0;                 // m(0, y_hat(0), p)
    double z_hat = 1.0;
    double eps_T = 0.0;
    double tail = 0.0;  // int_{t_N}^T n
    std::string method;
    int iterations = 0;

    double t_N() const { return t.back(); }
    // y_hat on [0, t_N]; beyond t_N the product phi' y_hat is held fixed.
    double y(double s) const;
};

Solution solve_optimal(const MarketModel& model, const Preference& prefs, const GridSpec& spec = {});
// Rebuild a Solution from tabulated y_hat values (e.g. a CSV round trip).
Solution solution_from_values(const MarketModel& model, const Preference& prefs, std::vector<double> t,
                              std::vector<double> y);

double optimal_fraction(const Solution& sol, double t, bool crashed);

struct Decomposition {
    std::vector<double> t, pi_hat, pi_m, pi_h;
};
Decomposition decompose(const Solution& sol);

double dual_multiplier(const Solution& sol);

// Integral-equation residuals |m(t_i, y_i) exp(int_{t_i}^T n) - 1| for a curve.
std::vector<double> integral_residuals(const MarketModel& model, const Preference& prefs, const Curve& y,
                                       double eps_T, double* tail_out = nullptr);

}  // namespace bubble
