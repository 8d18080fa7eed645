// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gdkm {

enum class ErrorCode {
  // numerics
  FactorizationFailed,
  ConvergenceFailed,
  NegativeEigenvalue,
  SingularTriangular,
  NonPositiveDiagonal,
  DimensionMismatch,
  NotSymmetric,
  // graphs and kernels
  EmptyGraph,
  DegenerateKernel,
  // dkm
  SingularK,
  SingularPrior,
  SingularAdjacency,
  DegenerateSigma,
  // training
  NonFiniteGradient,
  Diverged,
  // data and files
  ParseError,
  SchemaError,
  IoError,
  ChecksumMismatch,
  // command line
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Broad failure family, used to pick a process exit code.
enum class ErrorFamily { Config, Data, Numeric };

ErrorFamily family_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace gdkm
