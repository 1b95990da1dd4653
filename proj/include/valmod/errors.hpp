#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace valmod {

/// Invalid argument or parameter combination supplied by the caller.
class ParameterError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed series input. Carries the 1-based physical line number.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string &what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

} // namespace valmod
