#pragma once

#include <stdexcept>
#include <string>

namespace tdc {

enum class ErrorKind {
  EmptyFile,
  MalformedLine,
  DegenerateResult,
  InvalidParams,
  InvalidK,
  DegenerateClustering,
  CoincidentMedoids,
  InvalidKRange,
  FrontTooSmall,
  InvalidRange,
  TooFewSamples,
  IoError,
  SchemaMismatch,
  EmptyTraining,
  AllTargetsZero,
  TooFewSets,
  NoModels,
  InvalidObjective,
  InvalidArgument,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so
/// callers (CLI, HTTP layer) can map it to an exit code or status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace tdc
