#pragma once

#include <stdexcept>
#include <string>

namespace mpslam {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateGeometry : public Error {
public:
    using Error::Error;
};

/// A model function was evaluated outside its domain (e.g. non-positive amplitude).
class DomainError : public Error {
public:
    using Error::Error;
};

/// The array has no aperture orthogonal to the requested direction.
class DegenerateAperture : public Error {
public:
    using Error::Error;
};

/// Scenario document has an unknown or missing field. `where()` is a JSON pointer.
class SchemaError : public Error {
public:
    SchemaError(std::string where, const std::string& what)
        : Error(where + ": " + what), where_(std::move(where)) {}
    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

/// A scenario value violates an invariant. `where()` is a JSON pointer.
class ValidationError : public Error {
public:
    ValidationError(std::string where, const std::string& what)
        : Error(where + ": " + what), where_(std::move(where)) {}
    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

class SizeLimit : public Error {
public:
    using Error::Error;
};

class DegenerateEvidence : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace mpslam
