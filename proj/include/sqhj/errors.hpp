#pragma once

#include <stdexcept>
#include <string>

namespace sqhj {

/** @brief Raised when an argument lies outside the domain of an operation. */
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/** @brief Raised for invalid problem, scheme or experiment configuration. */
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/** @brief Raised when a numerical procedure cannot produce a result. */
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sqhj
