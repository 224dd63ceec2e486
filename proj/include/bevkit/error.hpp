#pragma once

#include <stdexcept>
#include <string>

namespace bevkit {

// Machine-readable failure category. The CLI prints it as
// "error: <code>: <detail>".
enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kValidation,
  kParse,
  kFormat,
  kIo,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(detail), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bevkit
