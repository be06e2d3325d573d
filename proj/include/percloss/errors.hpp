#pragma once

#include <stdexcept>
#include <string>

namespace percloss {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller handed in something that violates a precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Unreadable, malformed or unsupported file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared inside a loss pipeline. `stage()` names where.
class NumericError : public Error {
 public:
  NumericError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace percloss
