#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pedeval {

/// Base for every error raised by the library. The CLI maps these to exit 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented contract (bad schema, bad argument, broken invariant).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Operation called outside its precondition (e.g. Level 5 on a context-free pair).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Model output could not be interpreted. Keeps the raw text for inspection.
class UnparseableError : public Error {
public:
    UnparseableError(const std::string& what, std::string raw)
        : Error(what), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Write would replace an existing immutable record.
class ConflictError : public Error {
public:
    using Error::Error;
};

/// Stored payload does not match its recorded digest.
class CorruptionError : public Error {
public:
    using Error::Error;
};

/// Network-level failure talking to a backend; the only retryable kind.
class TransportError : public Error {
public:
    using Error::Error;
};

/// Backend call failed for good, after `attempts` tries.
class ProviderError : public Error {
public:
    ProviderError(const std::string& what, int attempts)
        : Error(what), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

}  // namespace pedeval
