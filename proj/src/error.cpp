#include "mbda/error.hpp"

namespace mbda {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "Io";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::NegativeCount: return "NegativeCount";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DegenerateDataset: return "DegenerateDataset";
    case ErrorKind::TreeMismatch: return "TreeMismatch";
    case ErrorKind::EmptySample: return "EmptySample";
    case ErrorKind::DegenerateQuantile: return "DegenerateQuantile";
    case ErrorKind::RleInadmissible: return "RleInadmissible";
    case ErrorKind::TmmDegenerate: return "TmmDegenerate";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::InconsistentState: return "InconsistentState";
    case ErrorKind::ModelMismatch: return "ModelMismatch";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::NotApplicable: return "NotApplicable";
    case ErrorKind::Undefined: return "Undefined";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace mbda
