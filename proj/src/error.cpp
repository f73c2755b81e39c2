#include "bikeaccess/error.hpp"

#include <fmt/format.h>

namespace bikeaccess {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Integrity: return "integrity";
    case ErrorCode::Domain: return "domain";
    case ErrorCode::Snap: return "snap";
    case ErrorCode::Unreachable: return "unreachable";
    case ErrorCode::Model: return "model";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::Capacity: return "capacity";
  }
  return "unknown";
}

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& what)
    : Error(ErrorCode::Parse,
            line > 0 ? fmt::format("{}:{}: {}", file, line, what) : fmt::format("{}: {}", file, what)),
      line_(line) {}

}  // namespace bikeaccess
