#pragma once

#include "bubble/elmm.hpp"
#include "bubble/solver.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace bubble {

// Philox4x32-10 block function.
std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key);

// Draws of one path: stream = pair index, the odd member of a pair is antithetic.
class PathRng {
public:
    PathRng(uint64_t seed, uint64_t path_index);
    double normal(uint64_t i);
    double uniform(uint64_t i);  // in (0, 1)

private:
    std::array<uint32_t, 4> block(uint64_t b, uint32_t kind) const;
    std::array<uint32_t, 2> key_;
    uint64_t pair_;
    bool flip_;
    uint64_t cached_ = ~uint64_t(0);
    double z_[2] = {0.0, 0.0};
};

enum class Measure { P, Q };
std::string to_string(Measure m);

struct SimConfig {
    long n_paths = 100000;
    int n_steps = 1024;
    uint64_t seed = 20240611;
    Measure measure = Measure::P;
    double eps_T = 0.0;  // pre-crash coefficients frozen beyond T - eps_T
    int threads = 0;     // 0: hardware concurrency
};

// Pre-crash fraction pi(t) and constant post-crash fraction.
struct Strategy {
    std::string label;
    ScalarFn pre;
    double post = 0.0;

    static Strategy constant(double pi, std::string label = "constant");
    static Strategy optimal(const Solution& sol);
    static Strategy myopic(const Solution& sol);
    static Strategy scaled(const Solution& sol, double k);
    static Strategy merton(const MarketModel& model, const Preference& prefs);
};

enum class Estimand { E_ST, E_U_of_XT, EQ_XT };
std::string to_string(Estimand e);

struct EstimatorResult {
    Estimand estimand = Estimand::E_ST;
    std::string label;
    double mean = 0.0;
    double std_error = 0.0;  // from antithetic pair means
    long n_paths = 0;
    uint64_t seed = 0;
    double runtime_ms = 0.0;
    long bankrupt = 0;
    double sample_max = 0.0;
    double tail_fraction = 0.0;  // share of samples above 10 |mean|
};

// Generalized inverse of G (hazard) or H (tilted measure); T on the atom.
double sample_crash_time(const HazardModel& hazard, double u);
double sample_crash_time(const TiltedMeasure& q, double u);

// Explicit draws: z[k] drives step k, z_bridge places W at gamma, u picks gamma.
struct PathDraws {
    std::vector<double> z;
    double z_bridge = 0.0;
    double u = 0.5;
};
PathDraws draw_path(const SimConfig& cfg, uint64_t path_index);

struct PricePath {
    double gamma = 0.0;
    bool crashed = false;
    std::vector<double> t, S;  // grid times and prices, S.back() = S_T
    double S_T() const { return S.back(); }
};

// q is required under Q.
PricePath simulate_price_path(const MarketModel& model, const SimConfig& cfg, uint64_t path_index,
                              const TiltedMeasure* q = nullptr);
PricePath simulate_price_path(const MarketModel& model, const SimConfig& cfg, const PathDraws& d,
                              const TiltedMeasure* q = nullptr);

struct WealthPath {
    double gamma = 0.0;
    bool crashed = false;
    bool bankrupt = false;
    double jump_factor = 1.0;  // 1 - pi(gamma) delta(gamma)
    double X_T = 0.0;
};

WealthPath simulate_wealth_path(const MarketModel& model, const Strategy& strategy, double x, const SimConfig& cfg,
                                uint64_t path_index, const TiltedMeasure* q = nullptr);
WealthPath simulate_wealth_path(const MarketModel& model, const Strategy& strategy, double x, const SimConfig& cfg,
                                const PathDraws& d, const TiltedMeasure* q = nullptr);

double utility(double X, double p);
double inverse_utility(double u, double p);

EstimatorResult estimate_ST(const MarketModel& model, const SimConfig& cfg, const TiltedMeasure* q = nullptr);
// One result per strategy, all on common paths.
std::vector<EstimatorResult> estimate_utility(const MarketModel& model, const std::vector<Strategy>& strategies,
                                              const Preference& prefs, const SimConfig& cfg);
// E^Q[X_T] of pi_hat under the measure tilted by y_hat.
EstimatorResult estimate_budget(const Solution& sol, const SimConfig& cfg);

struct EstimandSpec {
    Estimand kind = Estimand::E_ST;
    const Solution* solution = nullptr;  // E_U_of_XT (default strategy pi_hat) and EQ_XT
    std::vector<Strategy> strategies;    // E_U_of_XT overrides
    const TiltedMeasure* q = nullptr;    // E_ST under Q
};
std::vector<EstimatorResult> estimate(const MarketModel& model, const SimConfig& cfg, const EstimandSpec& spec);

}  // namespace bubble
