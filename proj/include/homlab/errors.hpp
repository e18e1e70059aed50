#pragma once

#include <stdexcept>
#include <string>

namespace homlab {

// Configuration / schema problems. The CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures (non-convergence, violated ellipticity, uncertified
// enumeration bounds). The CLI maps these to exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// An enumeration bound too small to certify a geometric query.
struct CertificationError : NumericalError {
    explicit CertificationError(const std::string& what) : NumericalError(what) {}
};

}  // namespace homlab
