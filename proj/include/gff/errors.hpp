#pragma once

#include <stdexcept>
#include <string>

namespace gff {

// Base class for all library errors.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument value (non-finite input, t <= 0, tau < 0, ...).
class domain_error : public error {
public:
    explicit domain_error(const std::string& msg) : error(msg) {}
};

// Structurally invalid configuration or data (non-monotone radii,
// too-small lattice cap, empty detector window, too few replicas, ...).
class validation_error : public error {
public:
    explicit validation_error(const std::string& msg) : error(msg) {}
};

// Operation not available for this configuration (e.g. closed concentric
// form requested for p != 1).
class unsupported_error : public error {
public:
    explicit unsupported_error(const std::string& msg) : error(msg) {}
};

// Result exceeds the representable range; carries the scaled value
// (value * exp(-scale_exponent)) so callers can keep working in log space.
class range_error : public error {
public:
    range_error(const std::string& msg, double scaled_value, double scale_exponent)
        : error(msg), scaled_value(scaled_value), scale_exponent(scale_exponent) {}
    double scaled_value;
    double scale_exponent;
};

// Requested accuracy not reached within budget; carries the best value
// obtained and its estimated error.
class accuracy_error : public error {
public:
    accuracy_error(const std::string& msg, double partial_value, double est_error)
        : error(msg), partial_value(partial_value), est_error(est_error) {}
    double partial_value;
    double est_error;
};

// Numerical failure with a diagnostic magnitude (e.g. Cholesky failure
// reporting the most negative eigenvalue estimate).
class numerical_error : public error {
public:
    numerical_error(const std::string& msg, double diagnostic)
        : error(msg), diagnostic(diagnostic) {}
    double diagnostic;
};

// Request exceeds configured resource limits (matrix size, point budget).
class resource_error : public error {
public:
    explicit resource_error(const std::string& msg) : error(msg) {}
};

// Internal consistency violated (negative variance radicand, non-monotone
// kernel where monotonicity is guaranteed, ...). Indicates a library bug
// or corrupted state, not a user mistake.
class internal_error : public error {
public:
    explicit internal_error(const std::string& msg) : error(msg) {}
};

} // namespace gff
