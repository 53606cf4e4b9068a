#pragma once

#include <stdexcept>
#include <string>

namespace covdist {

/// Base class for every error raised by this library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scalar function called outside its real domain (e.g. dilog(x) with x > 1).
class domain_error : public error {
 public:
  using error::error;
};

/// An operation was requested in a sampling regime where it does not exist
/// (consistent KL / log-Euclidean estimators require N > M).
class unsupported_regime_error : public error {
 public:
  using error::error;
};

/// Sample eigenvalues tied beyond tolerance; root bracketing undefined.
class degenerate_spectrum_error : public error {
 public:
  using error::error;
};

/// Fewer real solutions of Gamma(omega) = 1 than expected: the population
/// eigenvalue clusters overlap and the asymptotic descriptors are undefined.
class cluster_overlap_error : public error {
 public:
  using error::error;
};

/// Evaluation requested exactly at (or too close to) a pole.
class singular_evaluation_error : public error {
 public:
  using error::error;
};

/// Quadrature failed to converge, branch cuts were approached, or a
/// decomposition failed.
class numerical_error : public error {
 public:
  using error::error;
};

/// Invalid experiment or CLI configuration.
class config_error : public error {
 public:
  using error::error;
};

/// A result violated an internal invariant (asymmetry, negative variance...).
class internal_consistency_error : public error {
 public:
  using error::error;
};

}  // namespace covdist
