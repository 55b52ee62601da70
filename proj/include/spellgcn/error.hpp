#pragma once

#include <stdexcept>
#include <string>

namespace spellgcn {

// Data/validation problems (bad files, malformed lines, contract violations).
// The CLI maps these to exit code 1; usage errors are handled by the parser.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite arithmetic is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace spellgcn
