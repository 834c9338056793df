#pragma once

#include <stdexcept>
#include <string>

namespace flatlens {

enum class ErrorKind {
    dimension,
    numeric,
    parse,
    config,
    integrity,
    timeout,
    degenerate,
};

const char* to_string(ErrorKind kind) noexcept;

// All library failures are reported through this type; the CLI maps the kind
// onto a process exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool ok, ErrorKind kind, const std::string& what) {
    if (!ok) fail(kind, what);
}

}  // namespace flatlens
