#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tapkit {

enum class ErrorCode {
  kInvalidInterval,
  kOutOfRange,
  kDegenerateClip,
  kParse,
  kSchema,
  kCorruptFile,
  kBadMagic,
  kIo,
  kConfig,
  kPlacement,
  kShape,
  kDivergence,
  kIdMismatch,
  kMissingLabel,
  kUndefinedMetric,
  kStageDependency,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this one exception type; the
// code lets callers (and the CLI exit-code table) distinguish categories.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tapkit
