#pragma once

#include <stdexcept>
#include <string>

namespace agnn {

/// Shape mismatch between operands.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed files, out-of-range ids, or otherwise unusable input data.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration (bad hyperparameter, unknown tag, zero width, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// API contract violation (non-scalar loss, empty label set, ...).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A numeric operation produced a non-finite value.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace agnn
