#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace harim {

/// Malformed or inconsistent input: bad dump lines, unknown keys, join failures.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}

    ValidationError(const std::string& source, std::size_t line, const std::string& what)
        : std::runtime_error(source + ":" + std::to_string(line) + ": " + what),
          line_(line) {}

    /// 1-based line number, 0 when not tied to a line.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_ = 0;
};

/// A statistic is undefined for the given data (constant vector, too few samples).
class DegenerateError : public std::runtime_error {
public:
    explicit DegenerateError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace harim
