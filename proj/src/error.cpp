#include "tdc/error.hpp"

namespace tdc {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::DegenerateResult: return "DegenerateResult";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::InvalidK: return "InvalidK";
    case ErrorKind::DegenerateClustering: return "DegenerateClustering";
    case ErrorKind::CoincidentMedoids: return "CoincidentMedoids";
    case ErrorKind::InvalidKRange: return "InvalidKRange";
    case ErrorKind::FrontTooSmall: return "FrontTooSmall";
    case ErrorKind::InvalidRange: return "InvalidRange";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::EmptyTraining: return "EmptyTraining";
    case ErrorKind::AllTargetsZero: return "AllTargetsZero";
    case ErrorKind::TooFewSets: return "TooFewSets";
    case ErrorKind::NoModels: return "NoModels";
    case ErrorKind::InvalidObjective: return "InvalidObjective";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace tdc
