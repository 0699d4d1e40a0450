#pragma once

#include <stdexcept>
#include <string>

namespace hfvc {

// Argument errors use std::invalid_argument; the types below carry the
// flow-control distinctions callers need to catch separately.

struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The fixed contact mode admits no force balance at this control step.
/// Recoverable: execution holds the last command and may terminate the skill.
struct ModeInfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateSceneError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnderObservedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyCloudError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TransitionFailedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hfvc
