#pragma once

#include <stdexcept>
#include <string>

namespace alpr {

/// Base class for every error the toolkit reports.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input. `where` names the offending element, line, or row.
class ParseError : public Error {
 public:
  ParseError(std::string where, const std::string& what)
      : Error(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}

  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// Well-formed input that violates a precondition (empty corpus, id mismatch, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A state machine or protocol was driven out of order.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace alpr
