#pragma once

#include <stdexcept>
#include <string>

namespace dexkit {

// Base class for everything the library throws. The CLI maps ConfigError to
// exit code 2 and every other Error to exit code 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or inconsistent user-supplied configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Incompatible array/matrix dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

// NaN or infinity where a finite value is required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Argument outside its documented domain (joint limits, bad index, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Operation called on an object in the wrong state (e.g. sigma not set).
class StateError : public Error {
public:
    using Error::Error;
};

// Planner could not produce a result (e.g. every candidate cost was NaN).
class PlanningError : public Error {
public:
    using Error::Error;
};

// Persistence: file exists but its contents are not a valid artifact.
class CorruptFileError : public Error {
public:
    using Error::Error;
};

// Persistence: artifact was written with an unsupported format version.
class VersionMismatchError : public Error {
public:
    using Error::Error;
};

// An artifact does not fit the object it is bound to (e.g. model K vs hand K).
class DimensionMismatchError : public Error {
public:
    using Error::Error;
};

}  // namespace dexkit
