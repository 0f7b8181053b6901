#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace featloc {

/// Failure classes. Each maps to a distinct CLI exit code.
enum class ErrorKind {
  parameter = 2,
  io = 3,
  parse = 4,
  structural = 5,
  empty_result = 6,
  not_found = 7,
  stale_artifact = 8,
  empty_query = 9,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    case ErrorKind::structural: return "structural";
    case ErrorKind::empty_result: return "empty_result";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::stale_artifact: return "stale_artifact";
    case ErrorKind::empty_query: return "empty_query";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace featloc
