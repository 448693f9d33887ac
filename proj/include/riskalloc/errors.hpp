#pragma once

#include <stdexcept>
#include <string>

namespace riskalloc {

struct ModelError : std::runtime_error {
    explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Solver reported numerical_failure somewhere the caller cannot recover.
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// Eq-style impact program infeasible: a stealthy attack of unbounded energy
// exists or the stability/minimality assumptions are violated.
struct UnboundedImpactError : std::runtime_error {
    explicit UnboundedImpactError(const std::string& what) : std::runtime_error(what) {}
};

struct AllocationError : std::runtime_error {
    explicit AllocationError(const std::string& what) : std::runtime_error(what) {}
};

struct SimulationError : std::runtime_error {
    explicit SimulationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace riskalloc
