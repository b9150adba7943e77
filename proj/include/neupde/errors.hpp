#pragma once

#include <stdexcept>
#include <string>

namespace neupde {

/// Dataset whose global max equals its global min; no normalization exists.
struct DegenerateData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A NaN/Inf state was produced during integration. Carries the index of the
/// data interval in which the blow-up happened (-1 when not applicable).
struct NonFiniteState : std::runtime_error {
  int interval;
  explicit NonFiniteState(const std::string& msg, int interval_idx = -1)
      : std::runtime_error(msg), interval(interval_idx) {}
};

struct TooShort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RankTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnstableStep : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace neupde
