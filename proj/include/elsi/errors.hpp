#pragma once

#include <stdexcept>
#include <string>

namespace elsi {

/// Raised when a linear solve, factorization or eigen iteration breaks down.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a query point falls outside the meshed domain.
struct OutOfDomainError : std::runtime_error {
    explicit OutOfDomainError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace elsi
