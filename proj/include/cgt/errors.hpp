#pragma once

#include <stdexcept>
#include <string>

namespace cgt {

// Error taxonomy. Each failure mode named by the contract it breaks, so tests
// and callers can catch the specific kind instead of string-matching.

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateMaskError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyLossError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IncompleteGradientError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VocabularyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LengthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LayoutError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CorruptionExhaustedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cgt
