#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mrag {

enum class Errc {
  invalid_input,
  precondition,
  not_found,
  empty_input,
  duplicate_id,
  dimension_mismatch,
  parse_error,
  io_error,
  bad_magic,
  version_mismatch,
  truncated,
  backend_unreachable,
  backend_error,
  timeout,
};

inline std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_input: return "invalid-input";
    case Errc::precondition: return "precondition";
    case Errc::not_found: return "not-found";
    case Errc::empty_input: return "empty-input";
    case Errc::duplicate_id: return "duplicate-id";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::parse_error: return "parse-error";
    case Errc::io_error: return "io-error";
    case Errc::bad_magic: return "bad-magic";
    case Errc::version_mismatch: return "version-mismatch";
    case Errc::truncated: return "truncated";
    case Errc::backend_unreachable: return "backend-unreachable";
    case Errc::backend_error: return "backend-error";
    case Errc::timeout: return "timeout";
  }
  return "unknown";
}

/// Single exception type for the library. The code separates caller mistakes
/// (validation) from environmental failures; the CLI maps them to exit 1 / 2.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

  bool is_validation() const noexcept {
    switch (code_) {
      case Errc::invalid_input:
      case Errc::precondition:
      case Errc::not_found:
      case Errc::empty_input:
      case Errc::duplicate_id:
      case Errc::dimension_mismatch:
        return true;
      default:
        return false;
    }
  }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace mrag
