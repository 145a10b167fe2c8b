#include "offemma/errors.hpp"

namespace offemma {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptySamples: return "EmptySamples";
    case ErrorCode::NonFiniteSample: return "NonFiniteSample";
    case ErrorCode::NonPositiveDt: return "NonPositiveDt";
    case ErrorCode::InsufficientPoses: return "InsufficientPoses";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::HorizonNotCovered: return "HorizonNotCovered";
    case ErrorCode::EmptyValues: return "EmptyValues";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::MismatchedEnsemble: return "MismatchedEnsemble";
    case ErrorCode::EmptyHistory: return "EmptyHistory";
    case ErrorCode::MalformedMotion: return "MalformedMotion";
    case ErrorCode::TooFewSteps: return "TooFewSteps";
    case ErrorCode::NegativeSpeed: return "NegativeSpeed";
    case ErrorCode::BadTemplate: return "BadTemplate";
    case ErrorCode::UnknownClassId: return "UnknownClassId";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::BadClassTable: return "BadClassTable";
    case ErrorCode::BadImage: return "BadImage";
    case ErrorCode::EndpointUnreachable: return "EndpointUnreachable";
    case ErrorCode::BadStatus: return "BadStatus";
    case ErrorCode::FixtureMissing: return "FixtureMissing";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MissingManifest: return "MissingManifest";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedScenario: return "MalformedScenario";
    case ErrorCode::EmptyResult: return "EmptyResult";
    case ErrorCode::HorizonMissing: return "HorizonMissing";
    case ErrorCode::DegeneratePolygon: return "DegeneratePolygon";
    case ErrorCode::EmptyRecords: return "EmptyRecords";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::AllBackendsFailed: return "AllBackendsFailed";
    case ErrorCode::FrameNotFound: return "FrameNotFound";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace offemma
