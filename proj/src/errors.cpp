#include "flatlens/errors.hpp"

namespace flatlens {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::parse: return "parse";
        case ErrorKind::config: return "config";
        case ErrorKind::integrity: return "integrity";
        case ErrorKind::timeout: return "timeout";
        case ErrorKind::degenerate: return "degenerate";
    }
    return "unknown";
}

}  // namespace flatlens
