#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace riskshare {

enum class ErrorKind {
    parameter,
    ingestion,
    domain,
    configuration,
    shape,
    infeasible,
    unsupported,
    bound_exceeded,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers switch on kind() when they
// need to distinguish (the CLI maps kinds onto exit codes).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) fail(kind, message);
}

}  // namespace riskshare
