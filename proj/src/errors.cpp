#include "riskshare/errors.hpp"

namespace riskshare {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::parameter: return "parameter error";
        case ErrorKind::ingestion: return "ingestion error";
        case ErrorKind::domain: return "domain error";
        case ErrorKind::configuration: return "configuration error";
        case ErrorKind::shape: return "shape error";
        case ErrorKind::infeasible: return "infeasible";
        case ErrorKind::unsupported: return "unsupported";
        case ErrorKind::bound_exceeded: return "bound exceeded";
    }
    return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace riskshare
