#include "bubble/scenario.hpp"

#include "bubble/errors.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace bubble {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ParseError(where + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) throw ParseError("unknown key " + where + "." + it.key());
}

const json& section(const json& doc, const std::string& key) {
    static const json empty = json::object();
    auto it = doc.find(key);
    return it == doc.end() ? empty : *it;
}

double number(const json& obj, const std::string& key, double fallback, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number()) throw ParseError(where + "." + key + " must be a number");
    return it->get<double>();
}

std::vector<double> numbers(const json& obj, const std::string& key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_array()) throw ParseError(where + "." + key + " must be an array of numbers");
    std::vector<double> v;
    for (const auto& x : *it) {
        if (!x.is_number()) throw ParseError(where + "." + key + " must be an array of numbers");
        v.push_back(x.get<double>());
    }
    return v;
}

std::string text(const json& obj, const std::string& key, const std::string& fallback, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_string()) throw ParseError(where + "." + key + " must be a string");
    return it->get<std::string>();
}

HazardModel parse_hazard(const json& h, double T) {
    check_keys(h, "hazard", {"family", "params"});
    const std::string fam = text(h, "family", "exponential_cutoff", "hazard");
    const json& p = section(h, "params");
    if (fam == "exponential_cutoff") {
        check_keys(p, "hazard.params", {"rate"});
        return HazardModel::exponential_cutoff(T, number(p, "rate", 1.0, "hazard.params"));
    }
    if (fam == "uniform") {
        check_keys(p, "hazard.params", {});
        return HazardModel::uniform(T);
    }
    if (fam == "lppl") {
        check_keys(p, "hazard.params", {"B", "C", "m", "omega", "psi"});
        LpplHazard l;
        l.B = number(p, "B", l.B, "hazard.params");
        l.C = number(p, "C", l.C, "hazard.params");
        l.m = number(p, "m", l.m, "hazard.params");
        l.omega = number(p, "omega", l.omega, "hazard.params");
        l.psi = number(p, "psi", l.psi, "hazard.params");
        return HazardModel::lppl(T, l);
    }
    if (fam == "tabulated") {
        check_keys(p, "hazard.params", {"t", "G"});
        auto hz = HazardModel::tabulated(numbers(p, "t", "hazard.params"), numbers(p, "G", "hazard.params"));
        if (std::fabs(hz.horizon() - T) > 1e-12 * T)
            throw DomainError("tabulated hazard must end at market.horizon");
        return hz;
    }
    throw ParseError("unknown hazard.family " + fam);
}

ExcessProfile parse_excess(const json& e) {
    check_keys(e, "excess", {"family", "params"});
    const std::string fam = text(e, "family", "constant", "excess");
    const json& p = section(e, "params");
    if (fam == "zero") {
        check_keys(p, "excess.params", {});
        return ExcessProfile::zero();
    }
    if (fam == "constant") {
        check_keys(p, "excess.params", {"alpha"});
        return ExcessProfile::constant(number(p, "alpha", 0.2, "excess.params"));
    }
    if (fam == "linear_ramp") {
        check_keys(p, "excess.params", {"beta"});
        return ExcessProfile::linear_ramp(number(p, "beta", 0.2, "excess.params"));
    }
    if (fam == "constant_jump_size") {
        check_keys(p, "excess.params", {"delta"});
        return ExcessProfile::constant_jump_size(number(p, "delta", 0.2, "excess.params"));
    }
    if (fam == "jls_relaxed") {
        check_keys(p, "excess.params", {"delta_coeffs"});
        return ExcessProfile::jls_polynomial(numbers(p, "delta_coeffs", "excess.params"));
    }
    throw ParseError("unknown excess.family " + fam);
}

Estimand parse_estimand(const std::string& s) {
    if (s == "E_ST") return Estimand::E_ST;
    if (s == "E_U_of_XT") return Estimand::E_U_of_XT;
    if (s == "EQ_XT") return Estimand::EQ_XT;
    throw ParseError("unknown estimand " + s);
}

Scenario parse(const json& doc) {
    check_keys(doc, "scenario",
               {"name", "market", "hazard", "excess", "preference", "grid", "simulation", "tilt", "sweep"});
    const json& mk = section(doc, "market");
    check_keys(mk, "market", {"mu", "sigma", "horizon"});
    const double mu = number(mk, "mu", 0.1, "market");
    const double sigma = number(mk, "sigma", 0.2, "market");
    const double T = number(mk, "horizon", 1.0, "market");
    if (!(T > 0.0)) throw DomainError("market.horizon must be positive");

    MarketModel model(mu, sigma, parse_hazard(section(doc, "hazard"), T), parse_excess(section(doc, "excess")));
    auto report = validate(model);
    if (!report.ok) {
        const auto& v = report.violations.front();
        std::ostringstream os;
        os << "model validation failed at t=" << v.t << ": " << v.condition;
        throw ModelError(os.str());
    }

    Scenario sc{text(doc, "name", "scenario", "scenario"), doc, model, {}, {}, {}, {}, {}, {}, {}};

    const json& pr = section(doc, "preference");
    check_keys(pr, "preference", {"p", "x"});
    sc.prefs.p = number(pr, "p", 4.0, "preference");
    sc.prefs.x = number(pr, "x", 1.0, "preference");
    if (!(sc.prefs.p > 0.0)) throw DomainError("preference.p must be positive");
    if (!(sc.prefs.x > 0.0)) throw DomainError("preference.x must be positive");

    const json& g = section(doc, "grid");
    check_keys(g, "grid", {"points", "eps_rel", "tol", "method", "max_iterations"});
    sc.grid.points = int(number(g, "points", sc.grid.points, "grid"));
    sc.grid.eps_rel = number(g, "eps_rel", sc.grid.eps_rel, "grid");
    sc.grid.tol = number(g, "tol", sc.grid.tol, "grid");
    sc.grid.max_iterations = int(number(g, "max_iterations", sc.grid.max_iterations, "grid"));
    const std::string method = text(g, "method", "backward_ode", "grid");
    if (method == "backward_ode")
        sc.grid.method = SolveMethod::BackwardOde;
    else if (method == "fixed_point")
        sc.grid.method = SolveMethod::FixedPoint;
    else
        throw ParseError("unknown grid.method " + method);

    const json& s = section(doc, "simulation");
    check_keys(s, "simulation", {"paths", "steps", "seed", "measure", "estimands", "strategies", "eps_T", "threads"});
    sc.sim.n_paths = long(number(s, "paths", double(sc.sim.n_paths), "simulation"));
    sc.sim.n_steps = int(number(s, "steps", sc.sim.n_steps, "simulation"));
    if (auto it = s.find("seed"); it != s.end()) {
        if (!it->is_number_unsigned()) throw ParseError("simulation.seed must be a nonnegative integer");
        sc.sim.seed = it->get<uint64_t>();
    }
    sc.sim.eps_T = number(s, "eps_T", 0.0, "simulation");
    sc.sim.threads = int(number(s, "threads", 0, "simulation"));
    const std::string measure = text(s, "measure", "P", "simulation");
    if (measure == "P")
        sc.sim.measure = Measure::P;
    else if (measure == "Q")
        sc.sim.measure = Measure::Q;
    else
        throw ParseError("simulation.measure must be P or Q");
    if (auto it = s.find("estimands"); it != s.end()) {
        if (!it->is_array()) throw ParseError("simulation.estimands must be an array");
        for (const auto& e : *it) {
            if (!e.is_string()) throw ParseError("simulation.estimands must hold strings");
            sc.estimands.push_back(parse_estimand(e.get<std::string>()));
        }
    } else {
        sc.estimands.push_back(mu > 0.0 ? Estimand::E_U_of_XT : Estimand::E_ST);
    }
    if (auto it = s.find("strategies"); it != s.end()) {
        if (!it->is_array()) throw ParseError("simulation.strategies must be an array");
        for (const auto& e : *it) {
            check_keys(e, "simulation.strategies[]", {"kind", "value"});
            StrategySpec st{text(e, "kind", "optimal", "simulation.strategies[]"),
                            number(e, "value", 1.0, "simulation.strategies[]")};
            if (st.kind != "optimal" && st.kind != "myopic" && st.kind != "merton" && st.kind != "scaled" &&
                st.kind != "constant")
                throw ParseError("unknown strategy kind " + st.kind);
            sc.strategies.push_back(st);
        }
    }
    if (sc.sim.n_paths < 1) throw DomainError("simulation.paths must be >= 1");
    if (sc.sim.n_steps < 2) throw DomainError("simulation.steps must be >= 2");

    const json& t = section(doc, "tilt");
    check_keys(t, "tilt", {"kind", "value"});
    sc.tilt.kind = text(t, "kind", "auto", "tilt");
    sc.tilt.value = number(t, "value", 0.0, "tilt");
    if (sc.tilt.kind != "auto" && sc.tilt.kind != "zero" && sc.tilt.kind != "constant" && sc.tilt.kind != "solution")
        throw ParseError("tilt.kind must be auto, zero, constant or solution");

    const json& sw = section(doc, "sweep");
    check_keys(sw, "sweep", {"parameter", "values", "command"});
    sc.sweep.parameter = text(sw, "parameter", "", "sweep");
    sc.sweep.command = text(sw, "command", "welfare", "sweep");
    if (auto it = sw.find("values"); it != sw.end()) {
        if (!it->is_array()) throw ParseError("sweep.values must be an array");
        for (const auto& v : *it) sc.sweep.values.push_back(v);
    }
    return sc;
}

}  // namespace

Scenario parse_scenario(const json& doc) {
    try {
        return parse(doc);
    } catch (const json::exception& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    }
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file " + path);
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ParseError("scenario " + path + ": " + e.what());
    }
    return parse_scenario(doc);
}

json with_parameter(json doc, const std::string& path, const json& value) {
    if (path.empty()) throw ParseError("sweep.parameter is empty");
    json* node = &doc;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) throw ParseError("sweep.parameter " + path + " does not name an object path");
        node = &(*node)[parts[i]];
        if (node->is_null()) *node = json::object();
    }
    if (!node->is_object()) throw ParseError("sweep.parameter " + path + " does not name an object path");
    (*node)[parts.back()] = value;
    return doc;
}

TiltFunction scenario_tilt(const Scenario& sc, const GridSpec& grid) {
    std::string kind = sc.tilt.kind;
    if (kind == "auto") kind = sc.model.mu() > 0.0 ? "solution" : "zero";
    if (kind == "zero") return TiltFunction::constant(0.0);
    if (kind == "constant") return TiltFunction::constant(sc.tilt.value);
    return TiltFunction::from_solution(solve_optimal(sc.model, sc.prefs, grid));
}

std::vector<Strategy> scenario_strategies(const Scenario& sc, const Solution& sol) {
    std::vector<Strategy> out;
    for (const auto& st : sc.strategies) {
        if (st.kind == "optimal")
            out.push_back(Strategy::optimal(sol));
        else if (st.kind == "myopic")
            out.push_back(Strategy::myopic(sol));
        else if (st.kind == "merton")
            out.push_back(Strategy::merton(sc.model, sc.prefs));
        else if (st.kind == "scaled")
            out.push_back(Strategy::scaled(sol, st.value));
        else
            out.push_back(Strategy::constant(st.value));
    }
    return out;
}

}  // namespace bubble
