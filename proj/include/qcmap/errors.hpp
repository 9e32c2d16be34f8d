#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace qcmap {

// Base for every library error. code() is a short machine-readable tag used by
// the CLI error envelope; context() carries structured diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message, nlohmann::json context = nlohmann::json::object())
        : std::runtime_error(message), code_(std::move(code)), context_(std::move(context)) {}

    const std::string& code() const noexcept { return code_; }
    const nlohmann::json& context() const noexcept { return context_; }

private:
    std::string code_;
    nlohmann::json context_;
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& msg, nlohmann::json ctx = nlohmann::json::object())
        : Error("invalid-argument", msg, std::move(ctx)) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg, nlohmann::json ctx = nlohmann::json::object())
        : Error("domain-error", msg, std::move(ctx)) {}
};

class Unsupported : public Error {
public:
    explicit Unsupported(const std::string& msg, nlohmann::json ctx = nlohmann::json::object())
        : Error("unsupported", msg, std::move(ctx)) {}
};

class ValidationError : public Error {
public:
    ValidationError(const std::string& msg, int node)
        : Error("validation-error", msg, nlohmann::json{{"node", node}}), node_(node) {}

    // Offending node id, or -1 when the problem is graph-wide.
    int node() const noexcept { return node_; }

private:
    int node_;
};

class BracketError : public Error {
public:
    BracketError(double f_lo, double f_hi, double lo, double hi)
        : Error("bracket-error", "no sign change on bracket",
                nlohmann::json{{"lo", lo}, {"hi", hi}, {"f_lo", f_lo}, {"f_hi", f_hi}}),
          f_lo_(f_lo), f_hi_(f_hi) {}

    double f_lo() const noexcept { return f_lo_; }
    double f_hi() const noexcept { return f_hi_; }

private:
    double f_lo_, f_hi_;
};

class SolverFailure : public Error {
public:
    explicit SolverFailure(const std::string& msg, nlohmann::json ctx = nlohmann::json::object())
        : Error("solver-failure", msg, std::move(ctx)) {}
};

class UnattainableTarget : public Error {
public:
    UnattainableTarget(const std::string& msg, double max_value)
        : Error("unattainable-target", msg, nlohmann::json{{"max", max_value}}), max_(max_value) {}

    double max_value() const noexcept { return max_; }

private:
    double max_;
};

class NotFound : public Error {
public:
    explicit NotFound(const std::string& msg, nlohmann::json ctx = nlohmann::json::object())
        : Error("not-found", msg, std::move(ctx)) {}
};

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& msg, nlohmann::json ctx = nlohmann::json::object())
        : Error("shape-mismatch", msg, std::move(ctx)) {}
};

}  // namespace qcmap
