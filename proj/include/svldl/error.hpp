#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace svldl {

// Precondition on a numeric argument violated (bad range, size mismatch).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Binary file (SVF feature file or checkpoint) is malformed.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Text input (manifest, config) is malformed. Line numbers are 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A NaN or infinity appeared in activations or gradients.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace svldl
