#pragma once

#include <stdexcept>
#include <string>

namespace tailfit {

// No mass at or above the requested k_min.
struct EmptyTailError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tail exists but cannot support the requested fit (single distinct bin,
// zero variance, ...).
struct DegenerateTailError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every candidate in a k_min scan failed; message lists per-candidate causes.
struct NoFitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Requested moment targets lie outside the support's moment polytope.
struct FeasibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Iterative solver failed to converge; message carries the final residual.
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Manifest input looks like the wrong format (mostly malformed lines).
struct ManifestFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tailfit
