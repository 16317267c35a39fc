#pragma once

#include <stdexcept>
#include <string>

namespace gbm {

enum class ErrorCode {
    zero_vector,
    non_convex,
    wrong_family,
    not_spd,
    stencil_out_of_domain,
    vertical_contact,
    inconsistent,
    not_a_symmetry,
    curve_leaves_chart,
    syntax_error,
    unknown_family,
    dimension_mismatch,
    invalid_argument,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::zero_vector: return "ZeroVector";
        case ErrorCode::non_convex: return "NonConvex";
        case ErrorCode::wrong_family: return "WrongFamily";
        case ErrorCode::not_spd: return "NotSPD";
        case ErrorCode::stencil_out_of_domain: return "StencilOutOfDomain";
        case ErrorCode::vertical_contact: return "VerticalContact";
        case ErrorCode::inconsistent: return "Inconsistent";
        case ErrorCode::not_a_symmetry: return "NotASymmetry";
        case ErrorCode::curve_leaves_chart: return "CurveLeavesChart";
        case ErrorCode::syntax_error: return "SyntaxError";
        case ErrorCode::unknown_family: return "UnknownFamily";
        case ErrorCode::dimension_mismatch: return "DimensionMismatch";
        case ErrorCode::invalid_argument: return "InvalidArgument";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Parse failure with a 1-based source location.
class SyntaxError : public Error {
public:
    SyntaxError(int line, int column, const std::string& what)
        : Error(ErrorCode::syntax_error,
                "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

}  // namespace gbm
