#include "seegnn/error.hpp"

namespace seegnn {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DuplicateSeizureId: return "DuplicateSeizureId";
    case ErrorKind::UnreadableFile: return "UnreadableFile";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::EmptySignal: return "EmptySignal";
    case ErrorKind::NonPositiveRate: return "NonPositiveRate";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::TooFewChannels: return "TooFewChannels";
    case ErrorKind::InvalidThreshold: return "InvalidThreshold";
    case ErrorKind::TooFewNodes: return "TooFewNodes";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::NoThalamicNodes: return "NoThalamicNodes";
    case ErrorKind::NonSymmetric: return "NonSymmetric";
    case ErrorKind::NegativeWeight: return "NegativeWeight";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::StaleCache: return "StaleCache";
    case ErrorKind::InvalidDims: return "InvalidDims";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::ClassTooSmall: return "ClassTooSmall";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::InconsistentTruth: return "InconsistentTruth";
    case ErrorKind::EmptySpace: return "EmptySpace";
    case ErrorKind::UntrainedModel: return "UntrainedModel";
    case ErrorKind::EmptyResult: return "EmptyResult";
    case ErrorKind::UnknownCommand: return "UnknownCommand";
    case ErrorKind::BadFlag: return "BadFlag";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      detail_(message) {}

}  // namespace seegnn
