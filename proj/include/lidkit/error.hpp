#pragma once

#include <stdexcept>
#include <string>

namespace lidkit {

/// Base for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, ids, shapes).
class DataError : public Error {
public:
    using Error::Error;
};

/// Arguments that violate an operation's preconditions.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// All neighbor distances are equal, so the log-ratio sum is zero and the
/// MLE diverges.
class DegenerateNeighborhood : public Error {
public:
    DegenerateNeighborhood() : Error("degenerate neighborhood: all neighbor distances equal") {}
    using Error::Error;
};

} // namespace lidkit
