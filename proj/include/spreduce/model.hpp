// Copyright (c) spreduce contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "spreduce/linalg.hpp"

namespace spreduce {

/// Stable continuous-time LTI system dx/dt = A x + B u, y = C x.
struct StateSpaceModel {
  Matrix A;
  Matrix B;
  Matrix C;
  std::vector<std::string> labels;  // optional, one per state

  StateSpaceModel(Matrix A_in, Matrix B_in, Matrix C_in,
                  std::vector<std::string> labels_in = {})
      : A(std::move(A_in)), B(std::move(B_in)), C(std::move(C_in)),
        labels(std::move(labels_in)) {
    if (A.rows() != A.cols()) {
      throw DimensionMismatch("StateSpaceModel: A must be square");
    }
    if (A.rows() < 1) {
      throw DimensionMismatch("StateSpaceModel: state dimension must be >= 1");
    }
    if (B.rows() != A.rows() || B.cols() < 1) {
      throw DimensionMismatch("StateSpaceModel: B must be n x m with m >= 1");
    }
    if (C.cols() != A.rows() || C.rows() < 1) {
      throw DimensionMismatch("StateSpaceModel: C must be p x n with p >= 1");
    }
    if (!labels.empty() && static_cast<Index>(labels.size()) != A.rows()) {
      throw DimensionMismatch("StateSpaceModel: labels must have one entry per state");
    }
    if (!A.allFinite() || !B.allFinite() || !C.allFinite()) {
      throw InvalidArgument("StateSpaceModel: matrices must have finite entries");
    }
    const ComplexVector eigs = linalg::eigenvalues(A);
    if (linalg::spectral_abscissa(eigs) >= -linalg::default_hurwitz_margin(eigs)) {
      throw NotStable("StateSpaceModel: A is not Hurwitz, max eigenvalue real part = " +
                      std::to_string(linalg::spectral_abscissa(eigs)));
    }
  }

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }
  Index p() const { return C.rows(); }
};

/// Unitary partition of the state space into retained rows P (r x n) and
/// eliminated rows Q ((n-r) x n), with [P; Q] orthogonal.
struct ProjectionPair {
  Matrix P;
  Matrix Q;

  ProjectionPair(Matrix P_in, Matrix Q_in)
      : P(std::move(P_in)), Q(std::move(Q_in)) {
    const Index r = P.rows();
    const Index n = P.cols();
    if (r < 1 || r > n) {
      throw DimensionMismatch("ProjectionPair: need 1 <= rows(P) <= cols(P)");
    }
    if (Q.rows() != n - r || (Q.rows() > 0 && Q.cols() != n)) {
      throw DimensionMismatch("ProjectionPair: Q must be (n-r) x n");
    }
    if (Q.rows() == 0) Q.resize(0, n);
    const double pp = (P * P.transpose() - Matrix::Identity(r, r)).cwiseAbs().maxCoeff();
    if (pp > 1e-10) {
      throw ToleranceViolation("ProjectionPair: rows of P are not orthonormal");
    }
    if (Q.rows() > 0) {
      const double qq =
          (Q * Q.transpose() - Matrix::Identity(Q.rows(), Q.rows())).cwiseAbs().maxCoeff();
      if (qq > 1e-10) {
        throw ToleranceViolation("ProjectionPair: rows of Q are not orthonormal");
      }
      if ((P * Q.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
        throw ToleranceViolation("ProjectionPair: P and Q are not mutually orthogonal");
      }
    }
  }

  Index r() const { return P.rows(); }
  Index n() const { return P.cols(); }
};

/// Reduced-order model produced by quasi-steady-state elimination:
/// dz/dt = Ahat z + Bhat u, yhat = Chat z + Dhat u.
struct ReducedModel {
  Matrix Ahat;
  Matrix Bhat;
  Matrix Chat;
  Matrix Dhat;
  ProjectionPair projection;

  ReducedModel(Matrix Ahat_in, Matrix Bhat_in, Matrix Chat_in, Matrix Dhat_in,
               ProjectionPair projection_in)
      : Ahat(std::move(Ahat_in)), Bhat(std::move(Bhat_in)),
        Chat(std::move(Chat_in)), Dhat(std::move(Dhat_in)),
        projection(std::move(projection_in)) {
    const Index r = projection.r();
    if (Ahat.rows() != r || Ahat.cols() != r) {
      throw DimensionMismatch("ReducedModel: Ahat must be r x r");
    }
    if (Bhat.rows() != r || Chat.cols() != r) {
      throw DimensionMismatch("ReducedModel: Bhat/Chat do not match the reduced order");
    }
    if (Dhat.rows() != Chat.rows() || Dhat.cols() != Bhat.cols()) {
      throw DimensionMismatch("ReducedModel: Dhat must be p x m");
    }
    if (!Ahat.allFinite() || !Bhat.allFinite() || !Chat.allFinite() ||
        !Dhat.allFinite()) {
      throw InvalidArgument("ReducedModel: matrices must have finite entries");
    }
  }

  Index order() const { return Ahat.rows(); }
  Index m() const { return Bhat.cols(); }
  Index p() const { return Chat.rows(); }
};

/// Cascade of a full model and a reduced model whose output is the error
/// delta = y - yhat (feedthrough excluded):
///   Abar = blockdiag(A, Ahat), Bbar = [B; Bhat], Cbar = [C, -Chat].
struct ErrorSystem {
  Matrix Abar;
  Matrix Bbar;
  Matrix Cbar;
};

inline ErrorSystem build_error_system(const StateSpaceModel& full,
                                      const ReducedModel& reduced) {
  if (full.m() != reduced.m() || full.p() != reduced.p()) {
    throw DimensionMismatch("build_error_system: input/output dimensions differ");
  }
  const Index n = full.n();
  const Index r = reduced.order();
  ErrorSystem err;
  err.Abar = Matrix::Zero(n + r, n + r);
  err.Abar.topLeftCorner(n, n) = full.A;
  err.Abar.bottomRightCorner(r, r) = reduced.Ahat;
  err.Bbar.resize(n + r, full.m());
  err.Bbar.topRows(n) = full.B;
  err.Bbar.bottomRows(r) = reduced.Bhat;
  err.Cbar.resize(full.p(), n + r);
  err.Cbar.leftCols(n) = full.C;
  err.Cbar.rightCols(r) = -reduced.Chat;
  return err;
}

/// Squared H2 norm of the error system, trace(Bbar^T Phi Bbar) with
/// Abar^T Phi + Phi Abar + Cbar^T Cbar = 0. Only the strictly proper part
/// contributes; any reduced-model feedthrough is outside this measure.
inline double h2_error(const ErrorSystem& err) {
  const linalg::Schur schur(err.Abar);
  const ComplexVector eigs = schur.eigenvalues();
  if (linalg::spectral_abscissa(eigs) >= -linalg::default_hurwitz_margin(eigs)) {
    throw UnstableErrorSystem("h2_error: error system is not Hurwitz");
  }
  const Matrix Phi =
      linalg::solve_lyapunov(schur, err.Cbar.transpose() * err.Cbar);
  double value = (err.Bbar.transpose() * Phi * err.Bbar).trace();
  if (value < 0.0) {
    const double tol = 1e-12 * std::max(1.0, err.Bbar.squaredNorm() * Phi.norm());
    if (value < -tol) {
      throw Error("h2_error: squared norm came out negative beyond tolerance");
    }
    value = 0.0;
  }
  return value;
}

inline double h2_error(const StateSpaceModel& full, const ReducedModel& reduced) {
  return h2_error(build_error_system(full, reduced));
}

/// Shared machinery for evaluating many reduced candidates against one fixed
/// full model. Exploits the block-diagonal structure of the error system: the
/// full-model observability block and its Schur factorization are computed
/// once, so each candidate costs one small Schur plus two block solves.
class ErrorH2Workspace {
 public:
  ErrorH2Workspace(Matrix A, Matrix B, Matrix C, bool with_gramian = false)
      : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), schur_A_(A_) {
    Phi11_ = linalg::solve_lyapunov(schur_A_, C_.transpose() * C_);
    base_h2_ = (B_.transpose() * Phi11_ * B_).trace();
    if (with_gramian) {
      Matrix Psi = linalg::solve_sylvester(schur_A_, false, schur_A_, true,
                                           B_ * B_.transpose());
      Psi11_ = 0.5 * (Psi + Psi.transpose());
      has_gramian_ = true;
    }
  }

  struct Eval {
    bool stable = false;
    double h2 = 0.0;
    linalg::Schur schur_red;
    Matrix Phi12, Phi22;  // observability blocks coupling full and reduced
    Matrix Psi12, Psi22;  // controllability blocks, filled when requested
  };

  /// Evaluates one candidate (Ahat, Bhat, Chat). When the candidate is not
  /// Hurwitz, stable == false and no solves are performed.
  Eval evaluate(const Matrix& Ahat, const Matrix& Bhat, const Matrix& Chat,
                bool want_gramian_blocks = false) const {
    Eval out;
    out.schur_red = linalg::Schur(Ahat);
    const ComplexVector eigs = out.schur_red.eigenvalues();
    if (Ahat.rows() > 0 &&
        linalg::spectral_abscissa(eigs) >= -linalg::default_hurwitz_margin(eigs)) {
      return out;
    }
    out.stable = true;
    out.Phi12 = linalg::solve_sylvester(schur_A_, true, out.schur_red, false,
                                        -(C_.transpose() * Chat));
    out.Phi22 = linalg::solve_lyapunov(out.schur_red, Chat.transpose() * Chat);
    out.h2 = base_h2_ + 2.0 * (B_.transpose() * out.Phi12 * Bhat).trace() +
             (Bhat.transpose() * out.Phi22 * Bhat).trace();
    if (out.h2 < 0.0) out.h2 = 0.0;
    if (want_gramian_blocks) {
      out.Psi12 = linalg::solve_sylvester(schur_A_, false, out.schur_red, true,
                                          B_ * Bhat.transpose());
      Matrix Psi22 = linalg::solve_sylvester(out.schur_red, false, out.schur_red,
                                             true, Bhat * Bhat.transpose());
      out.Psi22 = 0.5 * (Psi22 + Psi22.transpose());
    }
    return out;
  }

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& C() const { return C_; }
  const linalg::Schur& schur_A() const { return schur_A_; }
  const Matrix& Phi11() const { return Phi11_; }
  const Matrix& Psi11() const {
    if (!has_gramian_) {
      throw Error("ErrorH2Workspace: gramian blocks were not requested");
    }
    return Psi11_;
  }
  /// Squared H2 norm of the full model itself; natural scale for comparing
  /// reduction errors.
  double base_h2() const { return base_h2_; }

 private:
  Matrix A_, B_, C_;
  linalg::Schur schur_A_;
  Matrix Phi11_, Psi11_;
  double base_h2_ = 0.0;
  bool has_gramian_ = false;
};

}  // namespace spreduce
