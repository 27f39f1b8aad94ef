#pragma once

#include <stdexcept>
#include <string>

namespace lexchain {

// Error categories map 1:1 onto lex_status / CLI exit codes.
enum class ErrorKind { config, data, numeric, io };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string &msg) : Error(ErrorKind::config, msg) {}
};

struct DataError : Error {
    explicit DataError(const std::string &msg) : Error(ErrorKind::data, msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string &msg) : Error(ErrorKind::numeric, msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string &msg) : Error(ErrorKind::io, msg) {}
};

} // namespace lexchain
