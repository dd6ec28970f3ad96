#pragma once

#include <stdexcept>
#include <string>

namespace rsoanom {

// Base of every error thrown by the library. The CLI maps subclasses onto
// distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration: invalid windows, missing paths, unknown keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data could not be used (empty files, too few observations, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Fixed-width field layout violated (wrong line length, bad column).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// A TLE line pair that could not be decoded. Carries the offending line
// number (1 or 2) and the 1-indexed inclusive column span.
class ParseError : public DataError {
 public:
  ParseError(int line, int first_col, int last_col, const std::string& what)
      : DataError("line " + std::to_string(line) + " cols " + std::to_string(first_col) + "-" +
                  std::to_string(last_col) + ": " + what),
        line_(line),
        first_col_(first_col),
        last_col_(last_col) {}

  int line() const noexcept { return line_; }
  int first_col() const noexcept { return first_col_; }
  int last_col() const noexcept { return last_col_; }

 private:
  int line_;
  int first_col_;
  int last_col_;
};

// Remote catalog failures. Kept distinct so callers can tell a credential
// problem from a flaky server from a garbage payload.
class AuthError : public Error {
 public:
  using Error::Error;
};

class HttpError : public Error {
 public:
  HttpError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class PayloadError : public Error {
 public:
  using Error::Error;
};

// Model used in a state it does not support (e.g. scoring before calibration).
class ModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace rsoanom
