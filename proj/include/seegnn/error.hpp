#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace seegnn {

// Validation failures raised by the library. Every kind maps to exit code 1
// in the CLI; anything that is not a seegnn::Error is treated as internal.
enum class ErrorKind {
  MissingFile,
  SchemaViolation,
  ShapeMismatch,
  DuplicateSeizureId,
  UnreadableFile,
  InvalidConfig,
  IoFailure,
  EmptySignal,
  NonPositiveRate,
  LengthMismatch,
  TooShort,
  TooFewChannels,
  InvalidThreshold,
  TooFewNodes,
  IndexOutOfRange,
  NoThalamicNodes,
  NonSymmetric,
  NegativeWeight,
  NonFiniteInput,
  LabelOutOfRange,
  StaleCache,
  InvalidDims,
  VersionMismatch,
  ClassTooSmall,
  NonFiniteLoss,
  EmptyMatrix,
  InconsistentTruth,
  EmptySpace,
  UntrainedModel,
  EmptyResult,
  UnknownCommand,
  BadFlag,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace seegnn
