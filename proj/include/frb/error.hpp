#pragma once

#include <stdexcept>
#include <string>

namespace frb {

/// Error categories; each maps to a process exit code in the CLI.
enum class ErrorKind {
    Dimension,
    Domain,
    OutOfRange,
    InsufficientData,
    InsufficientResolution,
    Divergence,
    Config,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Dimension: return "dimension";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::OutOfRange: return "out_of_range";
        case ErrorKind::InsufficientData: return "insufficient_data";
        case ErrorKind::InsufficientResolution: return "insufficient_resolution";
        case ErrorKind::Divergence: return "divergence";
        case ErrorKind::Config: return "config";
    }
    return "unknown";
}

/// 0 success, 2 config error, 3 numerical divergence, 4 insufficient data, 1 anything else.
inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return 2;
        case ErrorKind::Divergence: return 3;
        case ErrorKind::InsufficientData: return 4;
        default: return 1;
    }
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) throw Error(kind, what);
}

}  // namespace frb
