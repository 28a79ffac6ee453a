#pragma once

#include <stdexcept>
#include <string>

namespace flowmend {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Grid/frame dimension disagreements.
struct ShapeError : Error {
    using Error::Error;
};

// Parameter or positivity-domain violations (q <= 0, iterate below the floor, ...).
struct DomainError : Error {
    using Error::Error;
};

// Linear systems that cannot be solved: zero Gauss-Seidel diagonal, rank-deficient
// normal equations, singular dense solve.
struct SingularSystemError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct MalformedHeaderError : IoError {
    using IoError::IoError;
};

struct TruncatedDataError : IoError {
    using IoError::IoError;
};

struct FrameIndexError : IoError {
    using IoError::IoError;
};

} // namespace flowmend
