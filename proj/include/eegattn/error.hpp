#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eegattn {

enum class ErrorCode {
  BlockTooShort,
  InvalidConfig,
  InvalidCorners,
  SegmentTooShort,
  TooFewSamples,
  SiftingDiverged,
  SignalTooShort,
  ManifestMismatch,
  DegenerateData,
  NonConvergence,
  FeatureMismatch,
  DegenerateFold,
  ZeroVariance,
  UnpairedLengths,
  EmptySession,
  ModelMissing,
  SourceExhausted,
  PortUnavailable,
  ParseError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BlockTooShort: return "BlockTooShort";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidCorners: return "InvalidCorners";
    case ErrorCode::SegmentTooShort: return "SegmentTooShort";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::SiftingDiverged: return "SiftingDiverged";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::ManifestMismatch: return "ManifestMismatch";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::FeatureMismatch: return "FeatureMismatch";
    case ErrorCode::DegenerateFold: return "DegenerateFold";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::UnpairedLengths: return "UnpairedLengths";
    case ErrorCode::EmptySession: return "EmptySession";
    case ErrorCode::ModelMissing: return "ModelMissing";
    case ErrorCode::SourceExhausted: return "SourceExhausted";
    case ErrorCode::PortUnavailable: return "PortUnavailable";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace eegattn
