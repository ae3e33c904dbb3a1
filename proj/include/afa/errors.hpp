#pragma once

#include <stdexcept>
#include <string>

namespace afa {

/// Shape/extent disagreement between tensors.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Out-of-range index (token id, label, position).
struct IndexError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated by the caller.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input file content.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value or combination.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Filesystem / IO failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss; carries a diagnostic dump.
struct TrainAbortError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace afa
