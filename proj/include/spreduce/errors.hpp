// Copyright (c) spreduce contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace spreduce {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative eigenvalue or Schur computation failed to converge.
struct NonConvergence : Error {
  using Error::Error;
};

/// A Sylvester/Lyapunov operator is singular or numerically singular
/// (eigenvalue pair summing to ~0).
struct SingularSylvester : Error {
  using Error::Error;
};

/// Cholesky factorization was requested for a matrix that is not
/// symmetric positive definite.
struct NotPositiveDefinite : Error {
  using Error::Error;
};

/// An input violated an orthonormality or symmetry tolerance.
struct ToleranceViolation : Error {
  using Error::Error;
};

/// Matrix dimensions are inconsistent with each other or with the operation.
struct DimensionMismatch : Error {
  using Error::Error;
};

/// An argument value is outside the accepted domain.
struct InvalidArgument : Error {
  using Error::Error;
};

/// A state index is outside [0, n).
struct IndexOutOfRange : Error {
  using Error::Error;
};

/// A state index appears more than once in a selection.
struct DuplicateIndex : Error {
  using Error::Error;
};

/// The fast-block matrix Q A Q^T is singular or too ill-conditioned to invert.
struct SingularFastBlock : Error {
  using Error::Error;
};

/// The error system assembled from a full/reduced pair is not Hurwitz.
struct UnstableErrorSystem : Error {
  using Error::Error;
};

/// The requested integration horizon does not allow the slowest mode to decay.
struct HorizonTooShort : Error {
  using Error::Error;
};

/// A loaded or constructed baseline model is not Hurwitz.
struct NotStable : Error {
  using Error::Error;
};

/// A model file could not be parsed.
struct ParseError : Error {
  using Error::Error;
};

/// Greedy elimination has no feasible candidate at the very first step.
struct NoReductionPossible : Error {
  using Error::Error;
};

/// The output matrix has linearly dependent rows, so no orthonormal
/// fixed block can be built from it.
struct RankDeficientOutput : Error {
  using Error::Error;
};

/// A greedy projection cannot be aligned with the parameterized family.
struct AlignmentInfeasible : Error {
  using Error::Error;
};

/// The random generator could not produce a stable matrix within the
/// retry budget.
struct StabilizationFailed : Error {
  using Error::Error;
};

}  // namespace spreduce
