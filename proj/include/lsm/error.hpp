#pragma once

#include <stdexcept>
#include <string>

namespace lsm {

enum class ErrorKind { config, data, divergence, shape, argument, internal };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Invalid configuration or a violated precondition on user-supplied settings.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Malformed, misaligned or out-of-range input data.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Training produced a non-finite objective.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& what) : Error(ErrorKind::divergence, what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorKind::shape, what) {}
};

class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& what) : Error(ErrorKind::argument, what) {}
};

class InternalError : public Error {
public:
    explicit InternalError(const std::string& what) : Error(ErrorKind::internal, what) {}
};

/// Rethrows `e` as the same error class with `context` prepended to the message.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
    const std::string what = context + e.what();
    switch (e.kind()) {
    case ErrorKind::config: throw ConfigError(what);
    case ErrorKind::data: throw DataError(what);
    case ErrorKind::divergence: throw DivergenceError(what);
    case ErrorKind::shape: throw ShapeError(what);
    case ErrorKind::argument: throw ArgumentError(what);
    case ErrorKind::internal: throw InternalError(what);
    }
    throw InternalError(what);
}

/// Process exit code for an error category: 2 config, 3 data, 4 divergence, 1 otherwise.
inline int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::divergence: return 4;
    default: return 1;
    }
}

}  // namespace lsm
