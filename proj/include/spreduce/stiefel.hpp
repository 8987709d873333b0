// Copyright (c) spreduce contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "spreduce/greedy.hpp"
#include "spreduce/sp.hpp"

namespace spreduce {

/// Congruence-transformed copy of a model, x_tilde = L^T x with
/// A^T X + X A = -I and X = L L^T. The transformed drift matrix has a
/// negative-definite symmetric part, so every quasi-steady-state reduction of
/// it is automatically Hurwitz.
struct TransformedModel {
  StateSpaceModel system;
  Matrix L;
};

inline TransformedModel stabilizing_transform(const StateSpaceModel& model) {
  const Index n = model.n();
  const Matrix X = linalg::solve_lyapunov(model.A, Matrix::Identity(n, n));
  const Matrix L = linalg::cholesky_lower(X);
  const auto lower = L.triangularView<Eigen::Lower>();
  const Matrix Atilde = Matrix(lower.solve(model.A.transpose()) * L).transpose();
  const Matrix Btilde = L.transpose() * model.B;
  const Matrix Ctilde = Matrix(lower.solve(model.C.transpose())).transpose();
  return TransformedModel{StateSpaceModel(Atilde, Btilde, Ctilde), L};
}

/// Orthonormal split of the transformed state space into the fixed output
/// block Pfix (rows spanning range(Ctilde^T)) and its complement V.
struct Parameterization {
  Matrix Pfix;  // p x n
  Matrix V;     // (n-p) x n

  Index n() const { return Pfix.cols(); }
  Index p() const { return Pfix.rows(); }
};

inline Parameterization build_parameterization(const TransformedModel& tm) {
  const Matrix& Ctilde = tm.system.C;
  Matrix Pfix = linalg::orthonormal_basis(Ctilde);
  if (Pfix.rows() < tm.system.p()) {
    throw RankDeficientOutput(
        "build_parameterization: output matrix has linearly dependent rows");
  }
  Matrix V = linalg::orthonormal_complement(Pfix, tm.system.n());
  return Parameterization{std::move(Pfix), std::move(V)};
}

/// Retained-row matrix P = [Pfix; W V]. Rows of P are orthonormal exactly
/// when W W^T = I (and vice versa), so the Stiefel constraint on W is the
/// orthonormality constraint on P.
inline Matrix assemble_P(const Parameterization& par, const Eigen::Ref<const Matrix>& W) {
  const Index p = par.p();
  const Index n = par.n();
  const Index k = W.rows();
  if (W.cols() != n - p) {
    throw DimensionMismatch("assemble_P: W must have n-p columns");
  }
  if (k + p > n) {
    throw DimensionMismatch("assemble_P: too many rows for the ambient dimension");
  }
  if (k > 0) {
    const double dev =
        (W * W.transpose() - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
    if (dev > 1e-4) {
      throw ToleranceViolation("assemble_P: rows of W are not orthonormal");
    }
  }
  Matrix P(p + k, n);
  P.topRows(p) = par.Pfix;
  if (k > 0) P.bottomRows(k) = W * par.V;
  return P;
}

/// Projection of an ambient gradient onto the tangent space of the
/// rows-orthonormal Stiefel manifold at W.
inline Matrix stiefel_tangent(const Eigen::Ref<const Matrix>& W,
                              const Eigen::Ref<const Matrix>& G) {
  if (W.rows() == 0) return G;
  const Matrix S = G * W.transpose();
  return G - 0.5 * (S + S.transpose()) * W;
}

/// QR-based retraction onto the rows-orthonormal Stiefel manifold, with the
/// sign convention that makes the factorization (and hence the iteration)
/// deterministic.
inline Matrix qr_retract(const Eigen::Ref<const Matrix>& Y) {
  const Index k = Y.rows();
  const Index d = Y.cols();
  if (k == 0) return Y;
  Eigen::HouseholderQR<Matrix> qr(Y.transpose());
  Matrix Qthin = qr.householderQ() * Matrix::Identity(d, k);
  const Matrix R = qr.matrixQR().topLeftCorner(k, k);
  for (Index i = 0; i < k; ++i) {
    if (R(i, i) < 0.0) Qthin.col(i) = -Qthin.col(i);
  }
  return Qthin.transpose();
}

/// Seeded random point on the rows-orthonormal Stiefel manifold.
inline Matrix random_stiefel(Index k, Index d, std::uint64_t seed) {
  if (k > d) {
    throw DimensionMismatch("random_stiefel: more rows than columns");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix Y(k, d);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < d; ++j) Y(i, j) = gauss(rng);
  }
  return qr_retract(Y);
}

/// Squared-H2-error objective over the Stiefel parameterization, with its
/// analytic Euclidean gradient. The objective extends smoothly to slightly
/// non-orthonormal W so that finite differences of it are well defined; the
/// gradient is evaluated at feasible points.
class StiefelObjective {
 public:
  StiefelObjective(const TransformedModel& tm, Index r)
      : par_(build_parameterization(tm)), r_(r),
        workspace_(tm.system.A, tm.system.B, tm.system.C, /*with_gramian=*/true) {
    if (r < par_.p() || r > par_.n()) {
      throw InvalidArgument("StiefelObjective: need p <= r <= n");
    }
  }

  Index r() const { return r_; }
  Index rows() const { return r_ - par_.p(); }
  Index cols() const { return par_.n() - par_.p(); }
  const Parameterization& parameterization() const { return par_; }

  double value(const Eigen::Ref<const Matrix>& W) const {
    const Assembly a = assemble(W);
    const ErrorH2Workspace::Eval eval =
        workspace_.evaluate(a.mats.Ahat, a.mats.Bhat, a.mats.Chat);
    if (!eval.stable) {
      throw UnstableErrorSystem("StiefelObjective: reduced dynamics not Hurwitz");
    }
    return eval.h2;
  }

  double value_and_gradient(const Eigen::Ref<const Matrix>& W, Matrix* grad) const {
    const Assembly a = assemble(W);
    const ErrorH2Workspace::Eval eval = workspace_.evaluate(
        a.mats.Ahat, a.mats.Bhat, a.mats.Chat, /*want_gramian_blocks=*/true);
    if (!eval.stable) {
      throw UnstableErrorSystem("StiefelObjective: reduced dynamics not Hurwitz");
    }

    const Matrix& A = workspace_.A();
    const Matrix& B = workspace_.B();
    const Matrix& C = workspace_.C();
    const Matrix& P = a.P;
    const Matrix& Pi = a.Pi;
    const Matrix& Ahat = a.mats.Ahat;
    const Matrix& Bhat = a.mats.Bhat;
    const Matrix& Chat = a.mats.Chat;
    const Index n = A.rows();

    const Matrix GA = 2.0 * (eval.Phi12.transpose() * eval.Psi12 +
                             eval.Phi22 * eval.Psi22);
    const Matrix GB = 2.0 * (eval.Phi12.transpose() * B + eval.Phi22 * Bhat);
    const Matrix GC = -2.0 * (C * eval.Psi12 - Chat * eval.Psi22);

    const Matrix PiA = Pi * A;
    const Matrix M = Matrix::Identity(n, n) - PiA;
    const Matrix N = Matrix::Identity(n, n) - A * Pi;
    const Matrix PA = P * A;
    const Matrix PAPi = PA * Pi;
    const Matrix AM = A * M;

    Matrix Gp = GA * P * AM.transpose();
    Gp.noalias() += Ahat.transpose() * GA * P * PiA.transpose();
    Gp.noalias() += Ahat * GA.transpose() * PAPi;
    Gp.noalias() += GA.transpose() * (PA * M);
    Gp.noalias() += GB * (N * B).transpose();
    Gp.noalias() += Ahat.transpose() * GB * (Pi * B).transpose();
    Gp.noalias() += Bhat * GB.transpose() * PAPi;
    Gp.noalias() += Chat.transpose() * GC * P * PiA.transpose();
    Gp.noalias() += Ahat * GC.transpose() * (C * Pi);
    Gp.noalias() += GC.transpose() * (C * M);

    *grad = Gp.bottomRows(rows()) * par_.V.transpose();
    return eval.h2;
  }

  /// Reduced model at the given feasible point.
  ReducedModel reduce_at(const StateSpaceModel& tsystem,
                         const Eigen::Ref<const Matrix>& W) const {
    const Matrix P = assemble_P(par_, W);
    const Matrix Q = linalg::orthonormal_complement(P, par_.n());
    return reduce(tsystem, ProjectionPair(P, Q));
  }

 private:
  struct Assembly {
    Matrix P, Q, Pi;
    detail::ReducedMatrices mats;
  };

  Assembly assemble(const Eigen::Ref<const Matrix>& W) const {
    const Index n = par_.n();
    const Index p = par_.p();
    if (W.rows() != r_ - p || W.cols() != n - p) {
      throw DimensionMismatch("StiefelObjective: W has the wrong shape");
    }
    if (W.rows() > 0) {
      const double dev =
          (W * W.transpose() - Matrix::Identity(W.rows(), W.rows())).cwiseAbs().maxCoeff();
      if (dev > 1e-3) {
        throw ToleranceViolation("StiefelObjective: W is far from orthonormal");
      }
    }
    Assembly a;
    a.P.resize(r_, n);
    a.P.topRows(p) = par_.Pfix;
    if (r_ > p) a.P.bottomRows(r_ - p) = W * par_.V;
    Eigen::HouseholderQR<Matrix> qr(a.P.transpose());
    const Matrix Qfull = qr.householderQ();
    a.Q = Qfull.rightCols(n - r_).transpose();
    a.Pi = compute_pi(workspace_.A(), a.Q);
    a.mats = detail::reduce_matrices(workspace_.A(), workspace_.B(), workspace_.C(),
                                     a.P, a.Q);
    return a;
  }

  Parameterization par_;
  Index r_;
  ErrorH2Workspace workspace_;
};

/// Objective value at one point, free-function convenience wrapper.
inline double objective(const TransformedModel& tm, const Eigen::Ref<const Matrix>& W,
                        Index r) {
  return StiefelObjective(tm, r).value(W);
}

/// Euclidean gradient at one point, free-function convenience wrapper.
inline Matrix gradient(const TransformedModel& tm, const Eigen::Ref<const Matrix>& W,
                       Index r) {
  Matrix g;
  StiefelObjective(tm, r).value_and_gradient(W, &g);
  return g;
}

/// Maps a greedy selection projection into the Stiefel parameterization: the
/// retained functional span range(L^{-1} P_g^T) is reproduced as
/// range([Pfix^T, (W V)^T]). Fails when the fixed output block does not lie
/// inside that span.
inline Matrix align_from_greedy(const ProjectionPair& greedy_projection,
                                const TransformedModel& tm,
                                const Parameterization& par) {
  const Index n = par.n();
  const Index p = par.p();
  const Index r = greedy_projection.r();
  if (greedy_projection.n() != n) {
    throw DimensionMismatch("align_from_greedy: projection dimension mismatch");
  }
  if (r < p) {
    throw AlignmentInfeasible("align_from_greedy: greedy order is below the output count");
  }
  const Matrix Y = tm.L.triangularView<Eigen::Lower>().solve(
      Matrix(greedy_projection.P.transpose()));
  const Matrix span = linalg::orthonormal_basis(Y.transpose());
  if (span.rows() != r) {
    throw AlignmentInfeasible("align_from_greedy: transformed span is rank deficient");
  }
  const Matrix resid = par.Pfix - (par.Pfix * span.transpose()) * span;
  if (resid.norm() > 1e-8 * std::sqrt(static_cast<double>(p))) {
    throw AlignmentInfeasible(
        "align_from_greedy: output block is not contained in the greedy subspace");
  }
  if (r == p) return Matrix(0, n - p);
  const Matrix Yproj = Y - par.Pfix.transpose() * (par.Pfix * Y);
  const Matrix R = linalg::orthonormal_basis(Yproj.transpose());
  if (R.rows() != r - p) {
    throw AlignmentInfeasible(
        "align_from_greedy: complement extraction lost rank");
  }
  return R * par.V.transpose();
}

struct OptimizeOptions {
  Index budget = 500;
  double gradient_tolerance = 1e-6;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  double initial_step = 1.0;
  double min_step = 1e-14;
};

struct OptimizationReport {
  double initial_objective = 0.0;
  double final_objective = 0.0;
  Index iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;
  Matrix W_final;
};

/// Riemannian gradient descent with QR retraction and Armijo backtracking.
/// Terminates when the Riemannian gradient norm falls below the tolerance,
/// the iteration budget is exhausted, or the line search stalls.
inline OptimizationReport optimize(const StiefelObjective& obj,
                                   const Eigen::Ref<const Matrix>& W_init,
                                   const OptimizeOptions& options = {}) {
  if (W_init.rows() != obj.rows() || W_init.cols() != obj.cols()) {
    throw DimensionMismatch("optimize: W_init has the wrong shape");
  }
  Matrix W = W_init;
  if (W.rows() > 0) {
    const double dev =
        (W * W.transpose() - Matrix::Identity(W.rows(), W.rows())).cwiseAbs().maxCoeff();
    if (dev > 1e-6) {
      throw ToleranceViolation("optimize: W_init is not on the Stiefel manifold");
    }
    if (dev > 1e-9) W = qr_retract(W);
  }

  const double inf = std::numeric_limits<double>::infinity();
  OptimizationReport report;
  Matrix grad;
  double J = obj.value_and_gradient(W, &grad);
  Matrix xi = stiefel_tangent(W, grad);
  double gnorm = xi.norm();
  report.initial_objective = J;
  report.objective_history.push_back(J);

  while (report.iterations < options.budget) {
    if (gnorm < options.gradient_tolerance) {
      report.converged = true;
      break;
    }
    double alpha = options.initial_step;
    bool accepted = false;
    Matrix W_next;
    double J_next = inf;
    while (alpha >= options.min_step) {
      W_next = qr_retract(W - alpha * xi);
      try {
        J_next = obj.value(W_next);
      } catch (const SingularFastBlock&) {
        J_next = inf;
      } catch (const UnstableErrorSystem&) {
        J_next = inf;
      }
      if (J_next <= J - options.armijo_c * alpha * gnorm * gnorm) {
        accepted = true;
        break;
      }
      alpha *= options.backtrack_factor;
    }
    if (!accepted) break;
    W = W_next;
    ++report.iterations;
    J = obj.value_and_gradient(W, &grad);
    xi = stiefel_tangent(W, grad);
    gnorm = xi.norm();
    report.objective_history.push_back(J);
  }
  if (gnorm < options.gradient_tolerance) report.converged = true;

  report.final_objective = J;
  report.W_final = W;
  return report;
}

struct StiefelReduction {
  OptimizationReport report;
  ReducedModel reduced;  // reduction of the transformed system
  bool warm_started = false;
};

/// End-to-end optimized reduction at order r: warm-starts from the greedy
/// trace prefix when one reaches r and aligns, otherwise from a seeded random
/// point.
inline StiefelReduction stiefel_reduce(const TransformedModel& tm, Index r,
                                       const GreedyTrace* greedy,
                                       std::uint64_t seed,
                                       const OptimizeOptions& options = {}) {
  StiefelObjective obj(tm, r);
  const Index n = tm.system.n();
  Matrix W0;
  bool warm = false;
  if (greedy != nullptr && n - r >= 0 &&
      static_cast<Index>(greedy->steps.size()) >= n - r) {
    try {
      const ProjectionPair gproj = selection_pair(greedy->retained_after(n - r), n);
      W0 = align_from_greedy(gproj, tm, obj.parameterization());
      warm = true;
    } catch (const AlignmentInfeasible&) {
      warm = false;
    }
  }
  if (!warm) W0 = random_stiefel(obj.rows(), obj.cols(), seed);

  OptimizationReport report = optimize(obj, W0, options);
  ReducedModel reduced = obj.reduce_at(tm.system, report.W_final);
  return StiefelReduction{std::move(report), std::move(reduced), warm};
}

}  // namespace spreduce
