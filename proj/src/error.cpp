#include "qcspharm/error.hpp"

namespace qcs {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::TopologyError: return "TopologyError";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::SimplificationError: return "SimplificationError";
    case ErrorCode::ParamFailure: return "ParamFailure";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::RealityViolation: return "RealityViolation";
    case ErrorCode::DegenerateTriangle: return "DegenerateTriangle";
    case ErrorCode::ZeroVolume: return "ZeroVolume";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::TooFewSubjects: return "TooFewSubjects";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace qcs
