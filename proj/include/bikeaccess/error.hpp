#pragma once

#include <stdexcept>
#include <string>

namespace bikeaccess {

enum class ErrorCode {
  InvalidArgument = 1,
  Io,
  Parse,
  Integrity,
  Domain,
  Snap,
  Unreachable,
  Model,
  NotFound,
  Capacity,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Malformed input record; `line` is 1-based, 0 when not line oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& what) : Error(ErrorCode::Integrity, what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorCode::Domain, what) {}
};

class SnapError : public Error {
 public:
  explicit SnapError(const std::string& what) : Error(ErrorCode::Snap, what) {}
};

class UnreachableError : public Error {
 public:
  explicit UnreachableError(const std::string& what) : Error(ErrorCode::Unreachable, what) {}
};

class ModelError : public Error {
 public:
  explicit ModelError(const std::string& what) : Error(ErrorCode::Model, what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorCode::InvalidArgument, what) {}
};

}  // namespace bikeaccess
