#ifndef GOHSP_ERRORS_HPP_
#define GOHSP_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace gohsp {

// Base for everything this library throws. Subclasses map to CLI exit codes:
// ConfigError -> 2, DataError (and FormatError) -> 3, DivergenceError -> 4.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape disagreement.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Out-of-range label or index.
class IndexError : public Error {
public:
    explicit IndexError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf detected in a kernel input.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// API precondition violated (non-scalar backward root, mask/budget mismatch).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Iterative method exhausted its iteration budget.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& msg, double final_delta)
        : Error(msg), delta(final_delta) {}
    double delta;
};

// Sparsity budget out of range for the tensor it applies to.
class BudgetError : public Error {
public:
    explicit BudgetError(const std::string& msg) : Error(msg) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Unreadable or malformed input data (file level).
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Malformed serialized payload (checkpoint or dataset record level).
class FormatError : public DataError {
public:
    explicit FormatError(const std::string& msg) : DataError(msg) {}
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

} // namespace gohsp

#endif // GOHSP_ERRORS_HPP_
