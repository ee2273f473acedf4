#pragma once

#include <stdexcept>
#include <string>

namespace svfbp {

// Error categories map onto the CLI exit codes: validation -> 2,
// data_consistency -> 3, numerical -> 4, io -> 2.
enum class ErrorKind { validation, data_consistency, numerical, io };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_validation(const std::string& msg) {
    throw Error(ErrorKind::validation, msg);
}
[[noreturn]] inline void fail_consistency(const std::string& msg) {
    throw Error(ErrorKind::data_consistency, msg);
}
[[noreturn]] inline void fail_numerical(const std::string& msg) {
    throw Error(ErrorKind::numerical, msg);
}
[[noreturn]] inline void fail_io(const std::string& msg) {
    throw Error(ErrorKind::io, msg);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail_validation(msg);
}

}  // namespace svfbp
