#pragma once

#include <stdexcept>
#include <string>

namespace bubble {

// Argument outside the domain of an operation.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Model fails validation or a tilt is rejected.
struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SimulationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace bubble
