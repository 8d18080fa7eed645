// SPDX-License-Identifier: Apache-2.0
#include "gdkm/error.hpp"

namespace gdkm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FactorizationFailed: return "FactorizationFailed";
    case ErrorCode::ConvergenceFailed: return "ConvergenceFailed";
    case ErrorCode::NegativeEigenvalue: return "NegativeEigenvalue";
    case ErrorCode::SingularTriangular: return "SingularTriangular";
    case ErrorCode::NonPositiveDiagonal: return "NonPositiveDiagonal";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::DegenerateKernel: return "DegenerateKernel";
    case ErrorCode::SingularK: return "SingularK";
    case ErrorCode::SingularPrior: return "SingularPrior";
    case ErrorCode::SingularAdjacency: return "SingularAdjacency";
    case ErrorCode::DegenerateSigma: return "DegenerateSigma";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

ErrorFamily family_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
      return ErrorFamily::Config;
    case ErrorCode::ParseError:
    case ErrorCode::SchemaError:
    case ErrorCode::IoError:
    case ErrorCode::ChecksumMismatch:
    case ErrorCode::EmptyGraph:
      return ErrorFamily::Data;
    default:
      return ErrorFamily::Numeric;
  }
}

}  // namespace gdkm
