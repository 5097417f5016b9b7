#pragma once

#include <stdexcept>
#include <string>

namespace ddlab {

// Invalid caller input.
struct ShapeMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NonPsdInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct TooFewPoints : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct EmptyBatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct UnsupportedKind : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ConditionOutOfRange : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct UnconditionalModel : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct IndexOutOfRange : std::out_of_range {
  using std::out_of_range::out_of_range;
};
struct InvalidStepOrder : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct GridTooShort : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NonDivisibleGrid : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct LengthMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad or missing on-disk state.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadCheckpoint : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ddlab
