#pragma once

#include <stdexcept>
#include <string>

namespace offemma {

enum class ErrorCode {
  // kinematics
  EmptySamples,
  NonFiniteSample,
  NonPositiveDt,
  InsufficientPoses,
  NonMonotonicTimestamps,
  HorizonNotCovered,
  // consistency
  EmptyValues,
  NonFiniteValue,
  MismatchedEnsemble,
  // prompting
  EmptyHistory,
  MalformedMotion,
  TooFewSteps,
  NegativeSpeed,
  BadTemplate,
  // visual prompt
  UnknownClassId,
  DimensionMismatch,
  AlphaOutOfRange,
  BadClassTable,
  BadImage,
  // backends
  EndpointUnreachable,
  BadStatus,
  FixtureMissing,
  Timeout,
  // dataset
  MissingManifest,
  MissingFile,
  MalformedScenario,
  EmptyResult,
  // metrics
  HorizonMissing,
  DegeneratePolygon,
  EmptyRecords,
  // pipeline / cli
  ConfigInvalid,
  AllBackendsFailed,
  FrameNotFound,
  IoError,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace offemma
