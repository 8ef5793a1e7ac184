#ifndef RANKWEAVE_ERROR_HPP_
#define RANKWEAVE_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rankweave {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. Carries the 1-based line number when known.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  explicit ParseError(const std::string& what) : ValidationError(what) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

/// Failure to open, read or write a file.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rankweave

#endif  // RANKWEAVE_ERROR_HPP_
