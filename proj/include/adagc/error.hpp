#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace adagc {

enum class ErrorKind {
  dimension_mismatch,
  invalid_argument,
  invalid_data,
  io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::invalid_data: return "invalid_data";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

// Every failure surfaced by the library carries a kind so the CLI can emit
// machine-readable errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_dimension_mismatch(std::string_view what, std::size_t expected,
                                                  std::size_t actual) {
  throw Error(ErrorKind::dimension_mismatch, std::string(what) + ": expected " +
                                                 std::to_string(expected) + ", got " +
                                                 std::to_string(actual));
}

inline void require(bool ok, ErrorKind kind, std::string_view message) {
  if (!ok) throw Error(kind, std::string(message));
}

}  // namespace adagc
