#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace redteam {

// Error hierarchy. Every failure surfaced by the library is one of these; the
// CLI maps them onto stable exit codes.

class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class DomainError : public std::domain_error {
    using std::domain_error::domain_error;
};

class PreconditionError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

class ShapeError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class UndefinedMetric : public std::domain_error {
    using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class NoBudget : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ExportError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class TargetUnreachable : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class AuditCorrupt : public std::runtime_error {
public:
    explicit AuditCorrupt(std::uint64_t seq)
        : std::runtime_error("audit chain corrupt at seq " + std::to_string(seq)), seq_(seq) {}

    [[nodiscard]] std::uint64_t seq() const noexcept { return seq_; }

private:
    std::uint64_t seq_;
};

}  // namespace redteam
