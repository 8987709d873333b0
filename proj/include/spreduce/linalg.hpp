// Copyright (c) spreduce contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "spreduce/errors.hpp"

namespace spreduce {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using Index = Eigen::Index;

namespace linalg {

/// Eigenvalues of a real square matrix, in no particular order.
/// Complex eigenvalues appear in conjugate pairs.
inline ComplexVector eigenvalues(const Eigen::Ref<const Matrix>& M) {
  if (M.rows() != M.cols()) {
    throw DimensionMismatch("eigenvalues: matrix must be square");
  }
  if (M.rows() == 0) return ComplexVector(0);
  Eigen::EigenSolver<Matrix> solver(M, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NonConvergence("eigenvalues: QR iteration did not converge");
  }
  return solver.eigenvalues();
}

/// Largest real part over a set of eigenvalues.
inline double spectral_abscissa(const ComplexVector& eigs) {
  double m = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < eigs.size(); ++i) m = std::max(m, eigs[i].real());
  return m;
}

/// Largest modulus over a set of eigenvalues.
inline double spectral_radius(const ComplexVector& eigs) {
  double m = 0.0;
  for (Index i = 0; i < eigs.size(); ++i) m = std::max(m, std::abs(eigs[i]));
  return m;
}

/// Default stability margin used by the Hurwitz test: scales with the
/// spectral radius so that large-norm matrices are not judged by an
/// absolute cutoff.
inline double default_hurwitz_margin(const ComplexVector& eigs) {
  return 1e-9 * std::max(1.0, spectral_radius(eigs));
}

/// True iff every eigenvalue of M has real part < -margin.
inline bool is_hurwitz(const Eigen::Ref<const Matrix>& M, double margin) {
  if (M.rows() == 0) return true;
  return spectral_abscissa(eigenvalues(M)) < -margin;
}

/// Hurwitz test with the default margin 1e-9 * max(1, spectral radius).
inline bool is_hurwitz(const Eigen::Ref<const Matrix>& M) {
  if (M.rows() == 0) return true;
  const ComplexVector eigs = eigenvalues(M);
  return spectral_abscissa(eigs) < -default_hurwitz_margin(eigs);
}

/// Real Schur decomposition M = U T U^T with U orthogonal and T upper
/// quasi-triangular. Caches both factors so Sylvester solves against the
/// same matrix can reuse the factorization.
struct Schur {
  Matrix U;
  Matrix T;

  Schur() = default;

  explicit Schur(const Eigen::Ref<const Matrix>& M) {
    if (M.rows() != M.cols()) {
      throw DimensionMismatch("Schur: matrix must be square");
    }
    if (M.rows() == 0) {
      U.resize(0, 0);
      T.resize(0, 0);
      return;
    }
    Eigen::RealSchur<Matrix> schur(M);
    if (schur.info() != Eigen::Success) {
      throw NonConvergence("Schur: QR iteration did not converge");
    }
    U = schur.matrixU();
    T = schur.matrixT();
  }

  Index size() const { return T.rows(); }

  /// Eigenvalues read off the 1x1 and 2x2 diagonal blocks of T.
  ComplexVector eigenvalues() const {
    const Index n = T.rows();
    ComplexVector eigs(n);
    Index i = 0;
    while (i < n) {
      if (i + 1 < n && T(i + 1, i) != 0.0) {
        const double a = T(i, i), b = T(i, i + 1);
        const double c = T(i + 1, i), d = T(i + 1, i + 1);
        const double mean = 0.5 * (a + d);
        const double disc = 0.25 * (a - d) * (a - d) + b * c;
        if (disc < 0.0) {
          const double im = std::sqrt(-disc);
          eigs[i] = {mean, im};
          eigs[i + 1] = {mean, -im};
        } else {
          const double root = std::sqrt(disc);
          eigs[i] = {mean + root, 0.0};
          eigs[i + 1] = {mean - root, 0.0};
        }
        i += 2;
      } else {
        eigs[i] = {T(i, i), 0.0};
        i += 1;
      }
    }
    return eigs;
  }
};

namespace detail {

/// Diagonal block partition of an upper quasi-triangular matrix:
/// blocks of size 2 where the subdiagonal is nonzero, size 1 elsewhere.
inline std::vector<std::pair<Index, Index>> quasi_blocks(const Matrix& T) {
  std::vector<std::pair<Index, Index>> blocks;
  const Index n = T.rows();
  Index i = 0;
  while (i < n) {
    if (i + 1 < n && T(i + 1, i) != 0.0) {
      blocks.emplace_back(i, 2);
      i += 2;
    } else {
      blocks.emplace_back(i, 1);
      i += 1;
    }
  }
  return blocks;
}

/// Solves op1(T1) Y + Y op2(T2) = F for Y, where T1 (a x a) and T2 (b x b)
/// are upper quasi-triangular and opX is identity or transpose. Standard
/// Bartels-Stewart back-substitution over the diagonal block partitions;
/// each diagonal pairing is a linear system of size at most 4.
inline Matrix quasi_tri_sylvester(const Matrix& T1, bool trans1,
                                  const Matrix& T2, bool trans2,
                                  const Matrix& F) {
  const Index a = T1.rows();
  const Index b = T2.rows();
  Matrix Y = Matrix::Zero(a, b);
  if (a == 0 || b == 0) return Y;

  const auto rows = quasi_blocks(T1);
  const auto cols = quasi_blocks(T2);
  const Index nr = static_cast<Index>(rows.size());
  const Index nc = static_cast<Index>(cols.size());

  for (Index jj = 0; jj < nc; ++jj) {
    // op2 == N consumes columns left to right, op2 == T right to left.
    const auto [j, w] = cols[trans2 ? nc - 1 - jj : jj];
    for (Index ii = 0; ii < nr; ++ii) {
      // op1 == N consumes rows bottom up, op1 == T top down.
      const auto [i, h] = rows[trans1 ? ii : nr - 1 - ii];

      Matrix rhs = F.block(i, j, h, w);
      if (trans1) {
        if (i > 0)
          rhs.noalias() -= T1.block(0, i, i, h).transpose() * Y.block(0, j, i, w);
      } else {
        const Index below = a - (i + h);
        if (below > 0)
          rhs.noalias() -= T1.block(i, i + h, h, below) * Y.block(i + h, j, below, w);
      }
      if (trans2) {
        const Index right = b - (j + w);
        if (right > 0)
          rhs.noalias() -=
              Y.block(i, j + w, h, right) * T2.block(j, j + w, w, right).transpose();
      } else {
        if (j > 0) rhs.noalias() -= Y.block(i, 0, h, j) * T2.block(0, j, j, w);
      }

      Matrix D1 = trans1 ? Matrix(T1.block(i, i, h, h).transpose())
                         : Matrix(T1.block(i, i, h, h));
      Matrix D2 = trans2 ? Matrix(T2.block(j, j, w, w).transpose())
                         : Matrix(T2.block(j, j, w, w));

      // Vectorized small system (I_w (x) D1 + D2^T (x) I_h) vec(Z) = vec(rhs).
      const Index s = h * w;
      Matrix K = Matrix::Zero(s, s);
      for (Index q = 0; q < w; ++q)
        for (Index r = 0; r < w; ++r)
          for (Index u = 0; u < h; ++u)
            for (Index v = 0; v < h; ++v) {
              double val = 0.0;
              if (q == r) val += D1(u, v);
              if (u == v) val += D2(r, q);
              K(q * h + u, r * h + v) = val;
            }
      Eigen::Map<Vector> z_rhs(rhs.data(), s);
      Eigen::FullPivLU<Matrix> lu(K);
      if (!lu.isInvertible()) {
        throw SingularSylvester(
            "sylvester: operator has eigenvalue pair summing to ~0");
      }
      const Vector z = lu.solve(z_rhs);
      Y.block(i, j, h, w) = Eigen::Map<const Matrix>(z.data(), h, w);
    }
  }
  return Y;
}

inline void check_sylvester_residual(const Matrix& R, double lhs_scale,
                                     double rhs_scale) {
  if (R.norm() > 1e-8 * (lhs_scale + rhs_scale)) {
    throw SingularSylvester("sylvester: residual too large, operator nearly singular");
  }
}

}  // namespace detail

/// Solves op1(M1) X + X op2(M2) + S = 0 given cached Schur factorizations of
/// M1 and M2. opX(M) is M or M^T according to the transX flags.
inline Matrix solve_sylvester(const Schur& M1, bool trans1, const Schur& M2,
                              bool trans2, const Eigen::Ref<const Matrix>& S) {
  if (S.rows() != M1.size() || S.cols() != M2.size()) {
    throw DimensionMismatch("solve_sylvester: S has wrong shape");
  }
  if (S.rows() == 0 || S.cols() == 0) return Matrix::Zero(S.rows(), S.cols());
  const Matrix F = -(M1.U.transpose() * S * M2.U);
  const Matrix Y = detail::quasi_tri_sylvester(M1.T, trans1, M2.T, trans2, F);
  return M1.U * Y * M2.U.transpose();
}

/// Solves M1 X + X M2 + S = 0 for X.
inline Matrix solve_sylvester(const Eigen::Ref<const Matrix>& M1,
                              const Eigen::Ref<const Matrix>& M2,
                              const Eigen::Ref<const Matrix>& S) {
  const Schur s1(M1), s2(M2);
  Matrix X = solve_sylvester(s1, false, s2, false, S);
  const Matrix R = M1 * X + X * M2 + S;
  detail::check_sylvester_residual(
      R, (M1.norm() + M2.norm()) * X.norm(), S.norm());
  return X;
}

/// Solves the observability-form Lyapunov equation M^T X + X M + S = 0 for a
/// symmetric S, reusing a cached Schur factorization of M. The result is
/// symmetrized.
inline Matrix solve_lyapunov(const Schur& M, const Eigen::Ref<const Matrix>& S) {
  Matrix X = solve_sylvester(M, /*trans1=*/true, M, /*trans2=*/false, S);
  return 0.5 * (X + X.transpose());
}

/// Solves M^T X + X M + S = 0 for symmetric S.
inline Matrix solve_lyapunov(const Eigen::Ref<const Matrix>& M,
                             const Eigen::Ref<const Matrix>& S) {
  if (M.rows() != M.cols()) {
    throw DimensionMismatch("solve_lyapunov: M must be square");
  }
  if (S.rows() != S.cols() || S.rows() != M.rows()) {
    throw DimensionMismatch("solve_lyapunov: S must match M");
  }
  if ((S - S.transpose()).norm() > 1e-10 * std::max(1.0, S.norm())) {
    throw ToleranceViolation("solve_lyapunov: S must be symmetric");
  }
  const Schur schur(M);
  Matrix X = solve_lyapunov(schur, S);
  const Matrix R = M.transpose() * X + X * M + S;
  detail::check_sylvester_residual(R, 2.0 * M.norm() * X.norm(), S.norm());
  return X;
}

/// Lower-triangular Cholesky factor L with X = L L^T.
/// X must be symmetric within 1e-10 relative and positive definite.
inline Matrix cholesky_lower(const Eigen::Ref<const Matrix>& X) {
  if (X.rows() != X.cols()) {
    throw DimensionMismatch("cholesky_lower: matrix must be square");
  }
  if ((X - X.transpose()).norm() > 1e-10 * std::max(1.0, X.norm())) {
    throw ToleranceViolation("cholesky_lower: matrix must be symmetric");
  }
  Eigen::LLT<Matrix> llt(X);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("cholesky_lower: matrix is not positive definite");
  }
  return llt.matrixL();
}

/// Orthonormal basis for the row space of M, one basis vector per row of the
/// result. Modified Gram-Schmidt with one re-orthogonalization pass; rows
/// whose residual falls below tol are dropped. tol <= 0 selects the default
/// 1e-10 * (largest input row norm).
inline Matrix orthonormal_basis(const Eigen::Ref<const Matrix>& M,
                                double tol = -1.0) {
  const Index rows = M.rows(), d = M.cols();
  double max_norm = 0.0;
  for (Index i = 0; i < rows; ++i) max_norm = std::max(max_norm, M.row(i).norm());
  const double threshold = tol > 0.0 ? tol : 1e-10 * max_norm;

  Matrix basis(rows, d);
  Index k = 0;
  for (Index i = 0; i < rows; ++i) {
    Eigen::RowVectorXd v = M.row(i);
    for (int pass = 0; pass < 2; ++pass) {
      for (Index g = 0; g < k; ++g) {
        v -= (v * basis.row(g).transpose()) * basis.row(g);
      }
    }
    const double nrm = v.norm();
    if (nrm > threshold) {
      basis.row(k++) = v / nrm;
    }
  }
  return basis.topRows(k);
}

/// Orthonormal basis V of the orthogonal complement of the row space of G in
/// R^n, with V G^T = 0. G must have orthonormal rows within 1e-10.
inline Matrix orthonormal_complement(const Eigen::Ref<const Matrix>& G, Index n) {
  const Index k = G.rows();
  if (G.cols() != n) {
    throw DimensionMismatch("orthonormal_complement: G must have n columns");
  }
  if (k > n) {
    throw DimensionMismatch("orthonormal_complement: more rows than ambient dimension");
  }
  if (k > 0) {
    const Matrix gram = G * G.transpose();
    if ((gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-10) {
      throw ToleranceViolation("orthonormal_complement: rows of G are not orthonormal");
    }
  }
  if (k == 0) return Matrix::Identity(n, n);
  if (k == n) return Matrix(0, n);
  const Eigen::HouseholderQR<Matrix> qr(G.transpose());
  const Matrix Qfull = qr.householderQ();
  return Qfull.rightCols(n - k).transpose();
}

}  // namespace linalg
}  // namespace spreduce
