#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bubble::cli {

enum ExitCode { Ok = 0, ParseFailure = 1, ValidationFailure = 2, SolverFailure = 3, SimulationFailure = 4 };

// args excludes the program name. Errors go to err as one JSON line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// %.17g
std::string format_double(double v);

}  // namespace bubble::cli
