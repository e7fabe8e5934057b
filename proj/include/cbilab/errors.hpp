#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbilab {

// Every library failure derives from Error so callers (the CLI in particular)
// can report a stable machine-readable kind.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class InvalidMechanism : public Error {
public:
    explicit InvalidMechanism(const std::string& what) : Error("invalid-mechanism", what) {}
};

class UnsupportedFamily : public Error {
public:
    explicit UnsupportedFamily(const std::string& what) : Error("unsupported-family", what) {}
};

class OrderingError : public Error {
public:
    explicit OrderingError(const std::string& what) : Error("ordering", what) {}
};

class AdmissibilityError : public Error {
public:
    explicit AdmissibilityError(const std::string& what) : Error("admissibility", what) {}
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what) : Error("invalid-argument", what) {}
};

/// Explosion quadrature did not settle; carries the partial integrals
/// computed on the dyadic sequence delta_k = eps * 2^-k.
class IndeterminateError : public Error {
public:
    IndeterminateError(const std::string& what, std::vector<double> partial)
        : Error("indeterminate", what), partial_integrals(std::move(partial)) {}

    std::vector<double> partial_integrals;
};

/// u_t(lambda) left (0, inf) during integration.
class DomainExitError : public Error {
public:
    DomainExitError(const std::string& what, double t, double u)
        : Error("domain-exit", what), last_time(t), last_value(u) {}

    double last_time;
    double last_value;
};

class InfeasibleError : public Error {
public:
    explicit InfeasibleError(const std::string& what) : Error("infeasible", what) {}
};

class BudgetExceeded : public Error {
public:
    BudgetExceeded(const std::string& what, std::uint64_t n)
        : Error("budget-exceeded", what), attempts(n) {}

    std::uint64_t attempts;
};

class InsufficientData : public Error {
public:
    explicit InsufficientData(const std::string& what) : Error("insufficient-data", what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

}  // namespace cbilab
