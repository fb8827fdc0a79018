#pragma once

#include <stdexcept>
#include <string>

namespace qbsde {

// Precondition and contract violations carry a dedicated type so callers
// (and tests) can distinguish them from generic runtime failures.

struct DegenerateInterval : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ZeroSteps : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct CapTooSmall : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct UnknownGenerator : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct BadParameters : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct PicardDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LadderTooCoarse : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace qbsde
