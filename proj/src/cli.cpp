#include "bubble/cli.hpp"

#include "bubble/errors.hpp"
#include "bubble/scenario.hpp"
#include "bubble/welfare.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>

namespace bubble::cli {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

struct Options {
    std::string command;
    std::string scenario;
    std::string out;
    std::string strategy;
    std::string payload;
    std::optional<int> grid;
    std::optional<long> paths;
    std::optional<uint64_t> seed;
    std::optional<double> tol;
    bool under_q = false;
};

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

std::string csv_row(std::initializer_list<std::string> cells) {
    std::string row;
    for (const auto& c : cells) {
        if (!row.empty()) row += ',';
        row += c;
    }
    return row + "\n";
}

uint64_t point_seed(uint64_t base, const std::string& value) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : value) {
        h ^= c;
        h *= 1099511628211ull;
    }
    uint64_t z = base ^ h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

void apply_overrides(Scenario& sc, const Options& o, std::optional<uint64_t> seed) {
    if (o.grid) {
        if (*o.grid < 2) throw DomainError("--grid must be >= 2");
        sc.grid.points = *o.grid;
    }
    if (o.tol) {
        if (!(*o.tol > 0.0)) throw DomainError("--tol must be positive");
        sc.grid.tol = *o.tol;
    }
    if (o.paths) {
        if (*o.paths < 1) throw DomainError("--paths must be >= 1");
        sc.sim.n_paths = *o.paths;
    }
    if (seed) sc.sim.seed = *seed;
}

Solution read_strategy(const Scenario& sc, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open strategy file " + path);
    std::string line;
    int it = -1, iy = -1;
    std::vector<double> t, y;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (it < 0) {
            for (size_t k = 0; k < cells.size(); ++k) {
                if (cells[k] == "t") it = int(k);
                if (cells[k] == "y_hat") iy = int(k);
            }
            if (it < 0 || iy < 0) throw ParseError("strategy file needs t and y_hat columns");
            continue;
        }
        if (int(cells.size()) <= std::max(it, iy)) throw ParseError("short row in strategy file");
        try {
            t.push_back(std::stod(cells[size_t(it)]));
            y.push_back(std::stod(cells[size_t(iy)]));
        } catch (const std::exception&) {
            throw ParseError("non-numeric value in strategy file: " + line);
        }
    }
    if (t.size() < 2) throw ParseError("strategy file has fewer than two rows");
    return solution_from_values(sc.model, sc.prefs, std::move(t), std::move(y));
}

std::string profile_id(const ExcessProfile& e) {
    switch (e.family()) {
        case ExcessFamily::Constant: return format_double(e.parameter());
        case ExcessFamily::LinearRamp: return "linear_ramp:" + format_double(e.parameter());
        case ExcessFamily::ConstantJumpSize: return "constant_jump_size:" + format_double(e.parameter());
        default: return e.label();
    }
}

void cmd_classify(const Scenario& sc, const Options& o, std::ostream& out) {
    Classification c;
    std::string tilt = "none";
    if (o.under_q) {
        auto y = scenario_tilt(sc, sc.grid);
        tilt = y.label;
        c = classify_under_Q(sc.model, y);
    } else {
        c = classify_under_P(sc.model);
    }
    out << "measure,verdict,atom,defect,defect_finite,limsup_delta,tilt,diagnostic\n";
    out << csv_row({o.under_q ? "Q" : "P", to_string(c.verdict), format_double(c.atom), format_double(c.defect),
                    c.defect_finite ? "true" : "false", format_double(c.limsup_delta), quote(tilt),
                    quote(c.diagnostic)});
}

void cmd_solve(const Scenario& sc, std::ostream& out) {
    auto sol = solve_optimal(sc.model, sc.prefs, sc.grid);
    out << "t,y_hat,y_star_lower,y_star_upper,pi_hat,residual\n";
    for (size_t i = 0; i < sol.t.size(); ++i) {
        const double t = sol.t[i];
        out << csv_row({format_double(t), format_double(sol.y_hat.values()[i]), format_double(sol.y_lower(t)),
                        format_double(sol.y_upper(t)), format_double(optimal_fraction(sol, t, false)),
                        format_double(sol.residual[i])});
    }
}

void cmd_decompose(const Scenario& sc, std::ostream& out) {
    auto d = decompose(solve_optimal(sc.model, sc.prefs, sc.grid));
    out << "t,pi_m,pi_h\n";
    for (size_t i = 0; i < d.t.size(); ++i)
        out << csv_row({format_double(d.t[i]), format_double(d.pi_m[i]), format_double(d.pi_h[i])});
}

void cmd_welfare(const Scenario& sc, const Options& o, std::ostream& out) {
    auto sol = o.strategy.empty() ? solve_optimal(sc.model, sc.prefs, sc.grid) : read_strategy(sc, o.strategy);
    auto w = safe_rates(sol);
    out << "p,mu,sigma,profile,CE,ESR,ESR_BS,rESRL\n";
    out << csv_row({format_double(sc.prefs.p), format_double(sc.model.mu()), format_double(sc.model.sigma()),
                    quote(profile_id(sc.model.excess())), format_double(w.CE), format_double(w.ESR),
                    format_double(w.ESR_BS), format_double(w.rESRL)});
}

void cmd_simulate(const Scenario& sc, std::ostream& out) {
    std::optional<Solution> sol;
    auto solution = [&]() -> const Solution& {
        if (!sol) sol.emplace(solve_optimal(sc.model, sc.prefs, sc.grid));
        return *sol;
    };
    std::vector<EstimatorResult> rows;
    for (auto kind : sc.estimands) {
        EstimandSpec spec;
        spec.kind = kind;
        std::optional<TiltedMeasure> q;
        if (kind == Estimand::E_ST && sc.sim.measure == Measure::Q) {
            q.emplace(build_tilted_measure(sc.model, scenario_tilt(sc, sc.grid)));
            spec.q = &*q;
        }
        if (kind != Estimand::E_ST) spec.solution = &solution();
        if (kind == Estimand::E_U_of_XT) spec.strategies = scenario_strategies(sc, solution());
        for (auto& r : estimate(sc.model, sc.sim, spec)) rows.push_back(r);
    }
    out << "estimand,mean,stderr,n_paths,seed,runtime_ms,label,bankrupt,sample_max,tail_fraction\n";
    for (const auto& r : rows)
        out << csv_row({to_string(r.estimand), format_double(r.mean), format_double(r.std_error),
                        std::to_string(r.n_paths), std::to_string(r.seed), format_double(r.runtime_ms),
                        quote(r.label), std::to_string(r.bankrupt), format_double(r.sample_max),
                        format_double(r.tail_fraction)});
}

void dispatch(const std::string& command, const Scenario& sc, const Options& o, std::ostream& out) {
    if (command == "classify")
        cmd_classify(sc, o, out);
    else if (command == "solve")
        cmd_solve(sc, out);
    else if (command == "decompose")
        cmd_decompose(sc, out);
    else if (command == "welfare")
        cmd_welfare(sc, o, out);
    else if (command == "simulate")
        cmd_simulate(sc, out);
    else
        throw ParseError("sweep payload must be one of classify, solve, decompose, welfare, simulate");
}

void cmd_sweep(const Scenario& sc, const Options& o, std::optional<uint64_t> seed, std::ostream& out) {
    if (sc.sweep.parameter.empty() || sc.sweep.values.empty())
        throw ParseError("sweep needs sweep.parameter and sweep.values in the scenario");
    const std::string payload = o.payload.empty() ? sc.sweep.command : o.payload;
    if (payload == "sweep") throw ParseError("sweep payload cannot be sweep");
    const uint64_t base = seed.value_or(sc.sim.seed);

    std::vector<std::future<std::string>> jobs;
    for (const auto& v : sc.sweep.values) {
        jobs.push_back(std::async(std::launch::async, [&, v] {
            auto point = parse_scenario(with_parameter(sc.doc, sc.sweep.parameter, v));
            apply_overrides(point, o, point_seed(base, v.dump()));
            std::ostringstream block;
            block << "# " << sc.sweep.parameter << "=" << v.dump() << "\n";
            dispatch(payload, point, o, block);
            return block.str();
        }));
    }
    std::vector<std::string> blocks;
    for (auto& j : jobs) j.wait();
    for (auto& j : jobs) blocks.push_back(j.get());
    for (size_t i = 0; i < blocks.size(); ++i) out << (i ? "\n" : "") << blocks[i];
}

int fail(std::ostream& err, int code, const std::string& kind, const std::string& message) {
    nlohmann::json line = {{"error", kind}, {"code", code}, {"message", message}};
    err << line.dump() << std::endl;
    return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Bubble market model: classification, optimal investment, welfare and simulation"};
    app.add_option("command", o.command, "classify | solve | decompose | welfare | simulate | sweep")
        ->required()
        ->check(CLI::IsMember({"classify", "solve", "decompose", "welfare", "simulate", "sweep"}));
    app.add_option("--scenario", o.scenario, "scenario JSON file")->required();
    app.add_option("--out", o.out, "write CSV here instead of standard output");
    app.add_option("--grid", o.grid, "solver grid points");
    app.add_option("--paths", o.paths, "Monte Carlo paths");
    app.add_option("--seed", o.seed, "Monte Carlo seed (default: $BUBBLECTL_SEED, then the scenario)");
    app.add_option("--tol", o.tol, "solver residual tolerance");
    app.add_flag("--under-q", o.under_q, "classify under the measure tilted by the scenario tilt");
    app.add_option("--strategy", o.strategy, "welfare of a tabulated y_hat (CSV with t and y_hat columns)");
    app.add_option("--payload", o.payload, "command run at each sweep point (default: sweep.command)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return Ok;
    } catch (const CLI::ParseError& e) {
        return fail(err, ParseFailure, "parse", e.what());
    }

    try {
        std::optional<uint64_t> seed = o.seed;
        if (!seed) {
            if (const char* env = std::getenv("BUBBLECTL_SEED"); env && *env) {
                char* end = nullptr;
                auto v = std::strtoull(env, &end, 10);
                if (*end != '\0') throw ParseError("BUBBLECTL_SEED must be an unsigned integer");
                seed = v;
            }
        }
        Scenario sc = load_scenario(o.scenario);
        apply_overrides(sc, o, seed);

        std::ostringstream buf;
        if (o.command == "sweep")
            cmd_sweep(sc, o, seed, buf);
        else
            dispatch(o.command, sc, o, buf);

        if (o.out.empty()) {
            out << buf.str();
        } else {
            std::ofstream f(o.out);
            if (!f) throw ParseError("cannot write " + o.out);
            f << buf.str();
        }
        return Ok;
    } catch (const ParseError& e) {
        return fail(err, ParseFailure, "parse", e.what());
    } catch (const DomainError& e) {
        return fail(err, ValidationFailure, "validation", e.what());
    } catch (const ModelError& e) {
        return fail(err, ValidationFailure, "validation", e.what());
    } catch (const SolverError& e) {
        return fail(err, SolverFailure, "solver", e.what());
    } catch (const SimulationError& e) {
        return fail(err, SimulationFailure, "simulation", e.what());
    } catch (const std::exception& e) {
        return fail(err, SolverFailure, "internal", e.what());
    }
}

}  // namespace bubble::cli
