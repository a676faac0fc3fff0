#pragma once

#include <stdexcept>
#include <string>

namespace labsim {

// Raised for malformed source text (YAML, plan documents, config files).
class ParseError : public std::runtime_error {
public:
    ParseError(std::string message, int line = -1, int column = -1)
        : std::runtime_error(std::move(message)), line_(line), column_(column) {}

    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

// Raised when a lab configuration violates its structural invariants
// (dangling nest reference, duplicate name, ...). Carries the offending entity.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string message, std::string entity = {})
        : std::runtime_error(std::move(message)), entity_(std::move(entity)) {}

    const std::string& entity() const { return entity_; }

private:
    std::string entity_;
};

class UnknownLocationError : public std::runtime_error {
public:
    explicit UnknownLocationError(const std::string& name)
        : std::runtime_error("unknown location: " + name), name_(name) {}

    const std::string& name() const { return name_; }

private:
    std::string name_;
};

}  // namespace labsim
