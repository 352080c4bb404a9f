#pragma once

#include <stdexcept>
#include <string>

namespace gad {

enum class ErrorCode {
  kInvalidArgument = 1,
  kOutOfRange,
  kParse,
  kIo,
  kNumeric,
  kState,
};

// Single exception type for the core library; the C API maps `code()` onto
// its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace gad
