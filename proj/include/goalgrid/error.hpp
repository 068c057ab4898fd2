#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace goalgrid {

/// Machine-readable error categories. The CLI echoes `name()` in its error JSON.
enum class ErrorKind {
    InvalidLadder,
    InvalidMarket,
    InvalidAllocation,
    InvalidTransfer,
    NonconformingGrid,
    PolicyIterationDiverged,
    EmptyRegion,
    ConfigMismatch,
    BudgetExceeded,
    ParseError,
    ValidationError,
    IoError,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidLadder: return "InvalidLadder";
        case ErrorKind::InvalidMarket: return "InvalidMarket";
        case ErrorKind::InvalidAllocation: return "InvalidAllocation";
        case ErrorKind::InvalidTransfer: return "InvalidTransfer";
        case ErrorKind::NonconformingGrid: return "NonconformingGrid";
        case ErrorKind::PolicyIterationDiverged: return "PolicyIterationDiverged";
        case ErrorKind::EmptyRegion: return "EmptyRegion";
        case ErrorKind::ConfigMismatch: return "ConfigMismatch";
        case ErrorKind::BudgetExceeded: return "BudgetExceeded";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::ValidationError: return "ValidationError";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

/// Base of every exception thrown by the library.
///
/// `where` carries a field path ("goals.1.penalty_in"), a config line
/// ("line 12"), or is empty when no location applies.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message, std::string where = {})
        : std::runtime_error(compose(kind, message, where)),
          kind_(kind),
          detail_(std::move(message)),
          where_(std::move(where)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }
    const std::string& where() const noexcept { return where_; }

private:
    static std::string compose(ErrorKind kind, const std::string& message,
                               const std::string& where) {
        std::string out = to_string(kind);
        if (!where.empty()) out += " at " + where;
        out += ": " + message;
        return out;
    }

    ErrorKind kind_;
    std::string detail_;
    std::string where_;
};

/// Thrown when policy iteration exhausts its budget. Carries the sup-norm
/// change of every sweep so callers can see whether it was stalling or cycling.
class PolicyIterationDiverged : public Error {
public:
    PolicyIterationDiverged(double time, std::vector<double> history)
        : Error(ErrorKind::PolicyIterationDiverged,
                "no convergence at t=" + std::to_string(time) + " after " +
                    std::to_string(history.size()) + " sweeps"),
          time_(time),
          history_(std::move(history)) {}

    double time() const noexcept { return time_; }
    const std::vector<double>& history() const noexcept { return history_; }

private:
    double time_;
    std::vector<double> history_;
};

}  // namespace goalgrid
