// Copyright (c) spreduce contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <vector>

#include "spreduce/model.hpp"

namespace spreduce {

/// Selection-matrix projection pair: rows of P are the canonical basis
/// vectors of the retained indices (in the order given); rows of Q are the
/// canonical basis vectors of the complement in ascending order.
inline ProjectionPair selection_pair(const std::vector<Index>& retained, Index n) {
  if (retained.empty()) {
    throw InvalidArgument("selection_pair: retained set must be nonempty");
  }
  std::vector<bool> seen(static_cast<size_t>(n), false);
  for (Index idx : retained) {
    if (idx < 0 || idx >= n) {
      throw IndexOutOfRange("selection_pair: retained index out of range");
    }
    if (seen[static_cast<size_t>(idx)]) {
      throw DuplicateIndex("selection_pair: retained index listed twice");
    }
    seen[static_cast<size_t>(idx)] = true;
  }
  const Index r = static_cast<Index>(retained.size());
  Matrix P = Matrix::Zero(r, n);
  for (Index i = 0; i < r; ++i) P(i, retained[static_cast<size_t>(i)]) = 1.0;
  Matrix Q = Matrix::Zero(n - r, n);
  Index row = 0;
  for (Index j = 0; j < n; ++j) {
    if (!seen[static_cast<size_t>(j)]) Q(row++, j) = 1.0;
  }
  return ProjectionPair(std::move(P), std::move(Q));
}

/// Quasi-steady-state coupling matrix Pi = Q^T (Q A Q^T)^{-1} Q. Requires the
/// fast block Q A Q^T to be invertible with condition number <= 1e12. An
/// empty Q yields Pi = 0.
inline Matrix compute_pi(const Eigen::Ref<const Matrix>& A,
                         const Eigen::Ref<const Matrix>& Q) {
  const Index n = A.rows();
  if (A.cols() != n) {
    throw DimensionMismatch("compute_pi: A must be square");
  }
  if (Q.rows() > 0 && Q.cols() != n) {
    throw DimensionMismatch("compute_pi: Q must have n columns");
  }
  const Index k = Q.rows();
  if (k == 0) return Matrix::Zero(n, n);
  const Matrix fast = Q * A * Q.transpose();
  const Eigen::JacobiSVD<Matrix> svd(fast);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(k - 1);
  if (smin <= 0.0 || smax / smin > 1e12) {
    throw SingularFastBlock("compute_pi: fast block Q A Q^T is numerically singular");
  }
  const Matrix inv_fast_Q = fast.partialPivLu().solve(Matrix(Q));
  return Q.transpose() * inv_fast_Q;
}

namespace detail {

struct ReducedMatrices {
  Matrix Ahat, Bhat, Chat, Dhat;
};

/// Quasi-steady-state reduction formulas, valid for any retained-row matrix P
/// and orthonormal complement Q:
///   Ahat = P A P^T - P A Pi A P^T,  Bhat = (P - P A Pi) B,
///   Chat = C (P^T - Pi A P^T),      Dhat = -C Pi B.
inline ReducedMatrices reduce_matrices(const Matrix& A, const Matrix& B,
                                       const Matrix& C, const Matrix& P,
                                       const Matrix& Q) {
  const Matrix Pi = compute_pi(A, Q);
  const Matrix PA = P * A;
  const Matrix PAPi = PA * Pi;
  const Matrix APt = A * P.transpose();
  ReducedMatrices out;
  out.Ahat = PA * P.transpose() - PAPi * APt;
  out.Bhat = (P - PAPi) * B;
  out.Chat = C * (P.transpose() - Pi * APt);
  out.Dhat = -(C * Pi) * B;
  return out;
}

}  // namespace detail

/// Singular-perturbation reduction of a model for a given unitary partition.
inline ReducedModel reduce(const StateSpaceModel& model, const ProjectionPair& proj) {
  if (proj.n() != model.n()) {
    throw DimensionMismatch("reduce: projection does not match model dimension");
  }
  detail::ReducedMatrices mats =
      detail::reduce_matrices(model.A, model.B, model.C, proj.P, proj.Q);
  return ReducedModel(std::move(mats.Ahat), std::move(mats.Bhat),
                      std::move(mats.Chat), std::move(mats.Dhat), proj);
}

/// True iff range(C^T) is contained in range(P^T) within 1e-10 relative,
/// which guarantees a zero feedthrough in the reduced model. P must have
/// orthonormal rows.
inline bool check_range_condition(const Eigen::Ref<const Matrix>& C,
                                  const Eigen::Ref<const Matrix>& P) {
  if (C.cols() != P.cols()) {
    throw DimensionMismatch("check_range_condition: C and P must share the state dimension");
  }
  const Matrix Ct = C.transpose();
  const Matrix residual = Ct - P.transpose() * (P * Ct);
  return residual.norm() <= 1e-10 * C.norm();
}

}  // namespace spreduce
