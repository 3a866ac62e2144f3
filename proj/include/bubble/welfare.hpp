#pragma once

#include "bubble/elmm.hpp"
#include "bubble/solver.hpp"

namespace bubble {

struct WelfareReport {
    double CE = 0.0;      // wealth units
    double ESR = 0.0;     // (1/T) log(CE/x)
    double ESR_BS = 0.0;  // mu^2 / (2 p sigma^2)
    double rESRL = 0.0;   // 1 - ESR/ESR_BS
};

double certainty_equivalent(const Solution& sol);
// Black-Scholes certainty equivalent x exp(mu^2 T / (2 p sigma^2)).
double black_scholes_ce(const Solution& sol);
WelfareReport safe_rates(const Solution& sol);

// xi_hat(v) = exp(int_0^v phi' (mu - phi' y_hat)(1 + y_hat) / (p sigma^2))
double xihat(const Solution& sol, double v);
// |A^H xi_hat(v) - xi_hat(v) a(v, y_hat(v), p)| / xi_hat(v) with H from the tilt y_hat.
double xihat_identity_check(const Solution& sol, const TiltedMeasure& q, double v);
double xihat_identity_check(const Solution& sol, double v);

}  // namespace bubble
