#pragma once

#include <stdexcept>
#include <string>

namespace spatter {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class SceneInfeasible : public Error {
public:
    using Error::Error;
};

class SingularConfiguration : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class DegenerateInput : public Error {
public:
    using Error::Error;
};

class NoMeltPool : public Error {
public:
    using Error::Error;
};

class UndefinedAngle : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Bad or unknown configuration key/value.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace spatter
