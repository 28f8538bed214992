#pragma once

#include <stdexcept>
#include <string>

namespace largen {

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Exponential moment does not exist; `mode` is the first offending grid mode.
struct DivergenceError : std::domain_error {
    DivergenceError(const std::string& what, int k1, int k2)
        : std::domain_error(what), k1(k1), k2(k2) {}
    int k1, k2;
};

struct PrecisionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace largen
