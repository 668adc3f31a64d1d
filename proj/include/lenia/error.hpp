#pragma once

#include <stdexcept>
#include <string>

namespace lenia {

enum class ErrorCode {
  InvalidArgument,
  DegenerateKernel,
  NumericalBlowup,
  EmptyPattern,
  ScaleTooSmall,
  GoalSamplingStalled,
  HistoryExhausted,
  MutationStuck,
  NondeterministicTape,
  Unsupported,
  Io,
};

const char* to_string(ErrorCode code);

/// Exception carrying a machine-readable code; every failure the library reports goes through it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lenia
