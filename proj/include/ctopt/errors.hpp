#pragma once

#include <stdexcept>
#include <string>

namespace ctopt {

/// Degenerate acquisition geometry (coincident points, zero-length axes).
struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The VOI lies behind the source or projects entirely off the detector.
struct NoRoiError : GeometryError {
    using GeometryError::GeometryError;
};

/// Malformed or inconsistent on-disk artifact.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Background region has zero variance; CNR is undefined.
struct DegenerateBackgroundError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fewer than two candidates survive filtering; nothing to rank.
struct InsufficientCandidatesError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// No unselected candidate remains.
struct ExhaustedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ctopt
