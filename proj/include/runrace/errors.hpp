#pragma once

#include <stdexcept>
#include <string>

namespace runrace {

// Error classes map 1:1 onto CLI exit codes and advisory "error.class" strings.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input text. line == 0 means "no line context".
struct FormatError : std::runtime_error {
    int line;
    explicit FormatError(const std::string& msg, int line_no = 0)
        : std::runtime_error(line_no > 0 ? msg + " (line " + std::to_string(line_no) + ")" : msg),
          line(line_no) {}
};

struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NotFoundError : std::runtime_error {
    explicit NotFoundError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InsufficientDataError : DomainError {
    explicit InsufficientDataError(const std::string& msg) : DomainError(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace runrace
