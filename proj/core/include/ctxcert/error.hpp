#pragma once

#include <stdexcept>
#include <string>

namespace ctxcert {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed file contents (NPY header, JSON manifest, CSV).
class FormatError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

// A numeric argument outside its documented domain.
class RangeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// The model misclassifies the unperturbed sample, so a formal query is meaningless.
class CleanMisclassification : public Error {
public:
    using Error::Error;
};

// A result that was valid when computed no longer reproduces. Must abort.
class InconsistencyError : public Error {
public:
    using Error::Error;
};

[[noreturn]] void throw_range(const std::string &what);

} // namespace ctxcert
