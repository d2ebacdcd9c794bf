#pragma once

#include <stdexcept>
#include <string>

namespace eunn {

// Error taxonomy shared by the whole library. The CLI maps these onto
// process exit codes (see tools/).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mismatched vector or matrix sizes.
struct DimensionError : Error {
    using Error::Error;
};

// Dimension outside what a mesh supports (odd n for the tunable mesh,
// non-power-of-two n for the FFT mesh).
struct UnsupportedDimensionError : Error {
    using Error::Error;
};

// A rotation layer whose pair list overlaps or is otherwise malformed.
struct InvalidPlanError : Error {
    using Error::Error;
};

// Bad user-supplied configuration values.
struct ConfigError : Error {
    using Error::Error;
};

// Input data failed a documented precondition (e.g. a matrix that is not
// unitary within tolerance, or a file that does not parse).
struct ValidationError : Error {
    using Error::Error;
};

// Numerical failure inside an algorithm that should not occur for valid
// input (singular solve, non-diagonal elimination residual).
struct NumericalError : Error {
    using Error::Error;
};

// Dataset files missing or corrupt.
struct IngestionError : Error {
    using Error::Error;
};

// Training produced a non-finite loss.
struct DivergedError : Error {
    using Error::Error;
};

}  // namespace eunn
