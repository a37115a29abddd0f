#pragma once

#include <stdexcept>
#include <string>

namespace posi {

// Coarse failure class; maps 1:1 onto the C API status codes and CLI exit codes.
enum class ErrorKind {
    usage = 1,       // invalid argument or configuration
    data = 2,        // unparsable input, rank problems
    infeasible = 3,  // well-formed request the input cannot satisfy
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_usage(const std::string& msg) { throw Error(ErrorKind::usage, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw Error(ErrorKind::data, msg); }
[[noreturn]] inline void fail_infeasible(const std::string& msg) { throw Error(ErrorKind::infeasible, msg); }

}  // namespace posi
