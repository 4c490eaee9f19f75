#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace updens {

enum class ErrorCode
{
  EmptySample,
  DimensionMismatch,
  NotSymmetric,
  NotPositiveDefinite,
  InvalidArgument,
  NonFiniteData,
  DegenerateSample,
  EmptyCandidates,
  TooFewPoints,
  SimulatorProtocolError,
  EmptyData,
  ColumnCountMismatch,
  MalformedRow,
  GridMismatch,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code)
{
  switch (code) {
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonFiniteData: return "NonFiniteData";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::SimulatorProtocolError: return "SimulatorProtocolError";
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::ColumnCountMismatch: return "ColumnCountMismatch";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

//! Library error; `what()` starts with the error code name.
class Error : public std::runtime_error
{
public:
  Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) +
                         (detail.empty() ? "" : ": " + detail))
    , code_(code)
  {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace updens
