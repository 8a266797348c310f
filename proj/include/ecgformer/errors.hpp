#pragma once

#include <stdexcept>
#include <string>

namespace ecgformer {

// Invalid data or misuse of an operation contract.
struct ValueError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or dimension mismatch between operands.
struct ShapeError : ValueError {
    using ValueError::ValueError;
};

// Inconsistent or out-of-range configuration.
struct ConfigError : ValueError {
    using ValueError::ValueError;
};

// File or serialization failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ecgformer
