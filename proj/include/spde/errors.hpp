#pragma once

#include <stdexcept>
#include <string>

namespace spde {

// Non-finite coefficient encountered in a state or derived quantity.
struct invalid_state_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operands with incompatible mode counts.
struct dimension_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Operation called with a model kind it does not support.
struct unsupported_kind_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Parameter outside its admissible range.
struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

// Time grids that do not nest / factors that do not divide.
struct grid_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A single scheme step could not be completed.  Carries the step index and,
// for linear-solve failures, the condition estimate of the system.
struct step_failure_error : std::runtime_error {
    int step;
    double condition_estimate;
    step_failure_error(const std::string& msg, int step_, double cond_)
        : std::runtime_error(msg), step(step_), condition_estimate(cond_) {}
};

// Fixed-point iteration did not reach its residual tolerance.
struct nonconvergence_error : std::runtime_error {
    double last_residual;
    int iterations;
    nonconvergence_error(const std::string& msg, double residual, int iters)
        : std::runtime_error(msg), last_residual(residual), iterations(iters) {}
};

// Invalid experiment configuration.  `field` names the offending key.
struct config_error : std::runtime_error {
    std::string field;
    config_error(const std::string& field_, const std::string& msg)
        : std::runtime_error(field_ + ": " + msg), field(field_) {}
};

// Missing or malformed input/output file.
struct file_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace spde
