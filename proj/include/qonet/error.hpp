#pragma once

#include <stdexcept>
#include <string>

namespace qonet {

enum class ErrorCategory {
    Config,
    Dimension,
    Resource,
    Convergence,
    Parse,
    Numerical,
    Io,
};

inline const char* to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Config: return "config error";
        case ErrorCategory::Dimension: return "dimension error";
        case ErrorCategory::Resource: return "resource error";
        case ErrorCategory::Convergence: return "convergence error";
        case ErrorCategory::Parse: return "parse error";
        case ErrorCategory::Numerical: return "numerical error";
        case ErrorCategory::Io: return "io error";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(std::string(to_string(category)) + ": " + what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

/// Parse failure carrying the JSON pointer (or line) where the document went wrong.
class ParseError : public Error {
public:
    ParseError(std::string location, const std::string& what)
        : Error(ErrorCategory::Parse, what + " (at " + location + ")"), location_(std::move(location)) {}

    const std::string& location() const noexcept { return location_; }

private:
    std::string location_;
};

}  // namespace qonet
