// errors.hpp: exception types shared by the dimerdyn modules

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dimerdyn {

struct InvalidParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Fock cutoff too small for the requested state; carries a cutoff that would work.
struct TruncationError : std::runtime_error {
    TruncationError(const std::string& what, std::size_t suggested)
        : std::runtime_error(what), suggested_n_max(suggested) {}
    std::size_t suggested_n_max;
};

struct DimensionGuardError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A frame failed the observable invariant suite.
struct InvariantViolation : std::runtime_error {
    InvariantViolation(const std::string& what, double time)
        : std::runtime_error(what), t(time) {}
    double t;
};

}  // namespace dimerdyn
