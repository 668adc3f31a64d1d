#include "lenia/types.hpp"

#include "lenia/error.hpp"

namespace lenia {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::DegenerateKernel: return "degenerate kernel";
    case ErrorCode::NumericalBlowup: return "numerical blowup";
    case ErrorCode::EmptyPattern: return "empty pattern";
    case ErrorCode::ScaleTooSmall: return "scale too small";
    case ErrorCode::GoalSamplingStalled: return "goal sampling stalled";
    case ErrorCode::HistoryExhausted: return "history exhausted";
    case ErrorCode::MutationStuck: return "mutation stuck";
    case ErrorCode::NondeterministicTape: return "nondeterministic tape";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::Io: return "i/o error";
  }
  return "unknown";
}

Rule obstacle_rule() {
  Rule rule;
  rule.r = 1.0;
  rule.b = {1.0, 0.0, 0.0};
  rule.w = {0.5, 1.0, 1.0};
  rule.a = {0.0, 0.0, 0.0};
  rule.h = 1.0;
  rule.c_src = kObstacleChannel;
  rule.c_dst = kLearnableChannel;
  return rule;
}

Goal normalize(const Position& p, GridShape shape) {
  return {p.x() / shape.rows - 0.5, p.y() / shape.cols - 0.5};
}

Position denormalize(const Goal& g, GridShape shape) {
  return {(g.x + 0.5) * shape.rows, (g.y + 0.5) * shape.cols};
}

}  // namespace lenia
