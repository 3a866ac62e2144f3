#pragma once

#include "bubble/elmm.hpp"
#include "bubble/hazard_model.hpp"
#include "bubble/montecarlo.hpp"
#include "bubble/solver.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace bubble {

struct TiltSpec {
    std::string kind = "auto";  // auto | zero | constant | solution
    double value = 0.0;
};

// Strategy compared under E_U_of_XT: optimal | myopic | merton | scaled (value * pi_hat) | constant (value)
struct StrategySpec {
    std::string kind = "optimal";
    double value = 1.0;
};

struct SweepSpec {
    std::string parameter;  // dot path into the scenario document, e.g. excess.params.alpha
    std::vector<nlohmann::json> values;
    std::string command;
};

struct Scenario {
    std::string name;
    nlohmann::json doc;
    MarketModel model;
    Preference prefs;
    GridSpec grid;
    SimConfig sim;
    std::vector<Estimand> estimands;
    std::vector<StrategySpec> strategies;
    TiltSpec tilt;
    SweepSpec sweep;
};

// Missing keys take the baseline values T = 1, mu = 0.1, sigma = 0.2,
// exponential cutoff rate 1, constant alpha = 0.2, p = 4, x = 1.
// Throws ParseError for malformed documents, DomainError/ModelError for invalid models.
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);

// Copy of doc with the dot path set to value.
nlohmann::json with_parameter(nlohmann::json doc, const std::string& path, const nlohmann::json& value);

// Tilt named by the scenario; auto uses y_hat when mu > 0 and y = 0 otherwise.
TiltFunction scenario_tilt(const Scenario& sc, const GridSpec& grid);

std::vector<Strategy> scenario_strategies(const Scenario& sc, const Solution& sol);

}  // namespace bubble
