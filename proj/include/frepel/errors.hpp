#pragma once

#include <stdexcept>
#include <string>

namespace frepel {

// Error taxonomy. Config and argument validation throws std::invalid_argument,
// out-of-domain math throws std::domain_error, index misuse throws
// std::out_of_range. The two classes below cover failures that arise only at
// run time from the numerics themselves.

/// A linear-algebra or spectral step failed (non-PD covariance, negative
/// circulant eigenvalue beyond tolerance, non-finite intermediate).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// An estimator was asked to average over zero usable samples
/// (e.g. no path survived a slab constraint).
class EmptyEnsembleError : public std::runtime_error {
 public:
  explicit EmptyEnsembleError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem trouble while writing reports or reading manifests.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace frepel
