// errors.hpp
// Exception types thrown by the lpsmc library.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lpsmc {

// Base class for all lpsmc errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input outside the mathematical domain of an operation (e.g. t > t_upper).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Structurally invalid argument (wrong dimension, bad penalty order, ...).
class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

// Dataset failed validation.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Non-finite value produced while evaluating a per-unit likelihood term.
class NumericError : public Error {
public:
    NumericError(const std::string& msg, long unit_index)
        : Error(msg + " (unit index " + std::to_string(unit_index) + ")"),
          unit_index(unit_index) {}
    long unit_index;
};

// Newton-Raphson failed to converge; carries the last iterate.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& msg, int iterations, double gradient_norm,
                     std::vector<double> last_iterate)
        : Error(msg + " (iterations=" + std::to_string(iterations) +
                ", gradient max-norm=" + std::to_string(gradient_norm) + ")"),
          iterations(iterations),
          gradient_norm(gradient_norm),
          last_iterate(std::move(last_iterate)) {}
    int iterations;
    double gradient_norm;
    std::vector<double> last_iterate;
};

// Request touched the coordinate pinned by the theta_K constraint.
class ConstraintError : public Error {
public:
    explicit ConstraintError(const std::string& msg) : Error(msg) {}
};

// The log(-log) transform degenerated (probability numerically 0 or 1).
class SingularTransformError : public Error {
public:
    explicit SingularTransformError(const std::string& msg) : Error(msg) {}
};

// CSV ingestion failure; carries 1-based row and the column name.
class CsvError : public Error {
public:
    CsvError(const std::string& msg, long row, const std::string& column)
        : Error(msg + " (row " + std::to_string(row) +
                (column.empty() ? "" : ", column '" + column + "'") + ")"),
          row(row),
          column(column) {}
    long row;
    std::string column;
};

// Simulation-study level failure (too many non-converged replications).
class StudyError : public Error {
public:
    explicit StudyError(const std::string& msg) : Error(msg) {}
};

}  // namespace lpsmc
