#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace gatgrasp {

enum class ErrorCode {
  InvalidArgument,
  NonPositiveDepth,
  DegenerateInput,
  InvalidRotation,
  AllOutOfFrame,
  DegenerateGesture,
  NoIntersection,
  SizeExceedsImage,
  DegenerateHand,
  ZeroVector,
  DuplicateId,
  DimensionMismatch,
  InvalidEntry,
  CorruptManifest,
  MissingTensorFile,
  MagicMismatch,
  EmptyBank,
  NoChiralityMatch,
  OutOfBounds,
  ChannelMismatch,
  ZeroQueryFeature,
  DegenerateTriangle,
  EmptyCandidates,
  NoValidDepth,
  ParseError,
  NonUnitQuaternion,
  ScoreOutOfRange,
  MarginUnsatisfiable,
  EmptyMask,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::InvalidRotation: return "InvalidRotation";
    case ErrorCode::AllOutOfFrame: return "AllOutOfFrame";
    case ErrorCode::DegenerateGesture: return "DegenerateGesture";
    case ErrorCode::NoIntersection: return "NoIntersection";
    case ErrorCode::SizeExceedsImage: return "SizeExceedsImage";
    case ErrorCode::DegenerateHand: return "DegenerateHand";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidEntry: return "InvalidEntry";
    case ErrorCode::CorruptManifest: return "CorruptManifest";
    case ErrorCode::MissingTensorFile: return "MissingTensorFile";
    case ErrorCode::MagicMismatch: return "MagicMismatch";
    case ErrorCode::EmptyBank: return "EmptyBank";
    case ErrorCode::NoChiralityMatch: return "NoChiralityMatch";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::ZeroQueryFeature: return "ZeroQueryFeature";
    case ErrorCode::DegenerateTriangle: return "DegenerateTriangle";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::NoValidDepth: return "NoValidDepth";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonUnitQuaternion: return "NonUnitQuaternion";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::MarginUnsatisfiable: return "MarginUnsatisfiable";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error code. Every failure mode of
/// the library surfaces as one of these.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 protected:
  struct Verbatim {};
  Error(ErrorCode code, const std::string& message, Verbatim)
      : std::runtime_error(message), code_(code) {}

 private:
  ErrorCode code_;
};

/// Error raised inside a named pipeline stage; the stage name is kept so the
/// CLI can report stage-tagged diagnostics.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& inner)
      : Error(inner.code(), "[" + stage + "] " + inner.what(), Verbatim{}), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace gatgrasp
