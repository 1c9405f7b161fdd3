#pragma once

#include <stdexcept>
#include <string>

namespace eopd {

// Thrown when an argument violates a documented precondition
// (bad ranges, empty sequences, non-finite values, malformed config).
struct invalid_input : std::invalid_argument {
    explicit invalid_input(const std::string& what) : std::invalid_argument(what) {}
};

// Thrown when an input is structurally valid but has no well-defined
// answer (e.g. recovering a phase from an identically-zero field).
struct degenerate_input : std::domain_error {
    explicit degenerate_input(const std::string& what) : std::domain_error(what) {}
};

// Thrown when an iterative computation produced a non-finite value.
struct numeric_failure : std::runtime_error {
    explicit numeric_failure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace eopd
