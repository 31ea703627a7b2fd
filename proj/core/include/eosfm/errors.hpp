#pragma once

#include <stdexcept>
#include <string>

namespace eos {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Precondition or argument violation (bad config, out-of-range index, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed structured-text input (manifests, rule files, CSV).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Checkpoint manifest unreadable or internally inconsistent.
class ManifestError : public ParseError {
public:
    using ParseError::ParseError;
};

/// Stored tensor bytes do not match the declared shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Checkpoint written by an unknown format version.
class VersionError : public Error {
public:
    using Error::Error;
};

/// CSV cell-level problems carry the offending cell in the message.
class MissingCellError : public ParseError {
public:
    using ParseError::ParseError;
};

class DuplicateCellError : public ParseError {
public:
    using ParseError::ParseError;
};

class UnknownDirectionError : public ParseError {
public:
    using ParseError::ParseError;
};

}  // namespace eos
