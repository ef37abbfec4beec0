#pragma once

#include <stdexcept>
#include <string>

namespace p3s {

struct P3sError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : P3sError {
    using P3sError::P3sError;
};
struct MissingTarget : P3sError {
    using P3sError::P3sError;
};
struct RaggedRows : P3sError {
    using P3sError::P3sError;
};
struct DegenerateTarget : P3sError {
    using P3sError::P3sError;
};
struct BadK : P3sError {
    using P3sError::P3sError;
};
struct ShapeMismatch : P3sError {
    using P3sError::P3sError;
};
struct UnfittedState : P3sError {
    using P3sError::P3sError;
};
struct NumericOverflow : P3sError {
    using P3sError::P3sError;
};
struct StaleAssignment : P3sError {
    using P3sError::P3sError;
};
struct DegenerateTraining : P3sError {
    using P3sError::P3sError;
};
struct NoValidPipeline : P3sError {
    using P3sError::P3sError;
};
struct SpecMismatch : P3sError {
    using P3sError::P3sError;
};
struct BadConfig : P3sError {
    using P3sError::P3sError;
};

}  // namespace p3s
