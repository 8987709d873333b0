// Copyright (c) spreduce contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <spreduce/greedy.hpp>
#include <spreduce/model.hpp>
#include <spreduce/sp.hpp>
#include <spreduce/stiefel.hpp>

#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using spreduce::GreedyTrace;
using spreduce::Index;
using spreduce::Matrix;
using spreduce::OptimizeOptions;
using spreduce::Parameterization;
using spreduce::ProjectionPair;
using spreduce::ReducedModel;
using spreduce::StateSpaceModel;
using spreduce::StiefelObjective;
using spreduce::TransformedModel;

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

ReducedModel as_reduced(const StateSpaceModel& model) {
  const Index n = model.n();
  ProjectionPair proj(Matrix::Identity(n, n), Matrix(0, n));
  return ReducedModel(model.A, model.B, model.C, Matrix::Zero(model.p(), model.m()),
                      std::move(proj));
}

/// Stable matrix with symmetric part exactly -1/2 I, so its observability
/// Lyapunov solution with right-hand side -I is the identity and the
/// stabilizing transform is (numerically) the identity map.
Matrix half_shifted_skew(Index n, std::mt19937_64& rng) {
  const Matrix G = testutil::random_matrix(n, n, rng);
  const Matrix S = 0.5 * (G - G.transpose());
  return S - 0.5 * Matrix::Identity(n, n);
}

TEST(StabilizingTransform, ScalarExample) {
  // A = -2: the Lyapunov solution of A^T X + X A = -I is X = 1/4, so
  // L = 1/2, Atilde = -2, Btilde = 1/2, Ctilde = 2.
  const StateSpaceModel model(scalar(-2), scalar(1), scalar(1));
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  EXPECT_NEAR(tm.L(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(tm.system.A(0, 0), -2.0, 1e-12);
  EXPECT_NEAR(tm.system.B(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(tm.system.C(0, 0), 2.0, 1e-12);
}

TEST(StabilizingTransform, ReproducesTheCongruenceFactorization) {
  std::mt19937_64 rng(41);
  const StateSpaceModel model = testutil::random_model(6, 2, 2, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  const Matrix X = tm.L * tm.L.transpose();
  const Matrix lyap_resid =
      model.A.transpose() * X + X * model.A + Matrix::Identity(6, 6);
  EXPECT_LE(lyap_resid.norm(), 1e-8 * std::max(1.0, X.norm()));
  // Atilde == L^T A L^{-T}, checked by multiplying back.
  const Matrix back = tm.system.A * tm.L.transpose();
  EXPECT_LE((back - tm.L.transpose() * model.A).norm(),
            1e-8 * std::max(1.0, model.A.norm()));
  EXPECT_LE((tm.system.B - tm.L.transpose() * model.B).norm(), 1e-10);
  EXPECT_LE((tm.system.C * tm.L.transpose() - model.C).norm(), 1e-8);
}

TEST(StabilizingTransform, SymmetricPartBecomesNegativeDefinite) {
  // The companion form [[0, 1], [-2, -3]] is Hurwitz but its symmetric part
  // is indefinite; the transform must fix that.
  Matrix A(2, 2);
  A << 0, 1, -2, -3;
  Matrix B(2, 1);
  B << 0, 1;
  Matrix C(1, 2);
  C << 1, 0;
  const StateSpaceModel model(A, B, C);
  const Matrix sym_before = 0.5 * (A + A.transpose());
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(sym_before).eigenvalues().maxCoeff(),
            0.0);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  const Matrix sym_after = 0.5 * (tm.system.A + tm.system.A.transpose());
  EXPECT_LT(Eigen::SelfAdjointEigenSolver<Matrix>(sym_after).eigenvalues().maxCoeff(),
            0.0);
}

TEST(StabilizingTransform, PreservesTheTransferFunction) {
  std::mt19937_64 rng(42);
  const StateSpaceModel model = testutil::random_model(5, 2, 2, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  const double mismatch = spreduce::h2_error(model, as_reduced(tm.system));
  const double base = oracles::kron_h2(model.A, model.B, model.C);
  EXPECT_LE(mismatch, 1e-8 * std::max(1.0, base));
}

TEST(StabilizingTransform, EveryFeasibleReductionIsStable) {
  std::mt19937_64 rng(43);
  const StateSpaceModel model = testutil::random_model(6, 2, 1, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  const Parameterization par = spreduce::build_parameterization(tm);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix W = spreduce::random_stiefel(2, par.n() - par.p(),
                                              static_cast<std::uint64_t>(trial));
    const Matrix P = spreduce::assemble_P(par, W);
    const Matrix Q = spreduce::linalg::orthonormal_complement(P, 6);
    const ReducedModel red = spreduce::reduce(tm.system, ProjectionPair(P, Q));
    const Matrix sym = 0.5 * (red.Ahat + red.Ahat.transpose());
    EXPECT_LT(Eigen::SelfAdjointEigenSolver<Matrix>(sym).eigenvalues().maxCoeff(), 0.0);
    EXPECT_TRUE(spreduce::linalg::is_hurwitz(red.Ahat));
  }
}

TEST(BuildParameterization, SingleOutputRow) {
  Matrix A = Matrix::Zero(3, 3);
  A.diagonal() << -1, -2, -3;
  Matrix C(1, 3);
  C << 0, 3, 0;
  const TransformedModel tm{StateSpaceModel(A, Matrix::Ones(3, 1), C),
                            Matrix::Identity(3, 3)};
  const Parameterization par = spreduce::build_parameterization(tm);
  ASSERT_EQ(par.p(), 1);
  ASSERT_EQ(par.n(), 3);
  Matrix expected(1, 3);
  expected << 0, 1, 0;
  EXPECT_LE((par.Pfix.cwiseAbs() - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((par.V * par.Pfix.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((par.V * par.V.transpose() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(BuildParameterization, SpansTheOutputRowsAndCompletes) {
  std::mt19937_64 rng(44);
  const StateSpaceModel model = testutil::random_model(6, 2, 2, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  const Parameterization par = spreduce::build_parameterization(tm);
  ASSERT_EQ(par.p(), 2);
  // Pfix spans range(Ctilde^T).
  const Matrix Ct = tm.system.C.transpose();
  const Matrix resid = Ct - par.Pfix.transpose() * (par.Pfix * Ct);
  EXPECT_LE(resid.norm(), 1e-10 * std::max(1.0, Ct.norm()));
  // [Pfix; V] is a full orthogonal basis.
  Matrix full(6, 6);
  full.topRows(2) = par.Pfix;
  full.bottomRows(4) = par.V;
  EXPECT_LE((full * full.transpose() - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(),
            1e-10);
}

TEST(BuildParameterization, RejectsDependentOutputRows) {
  Matrix A = Matrix::Zero(2, 2);
  A.diagonal() << -1, -2;
  Matrix C(2, 2);
  C << 1, 0, 2, 0;
  const TransformedModel tm{StateSpaceModel(A, Matrix::Ones(2, 1), C),
                            Matrix::Identity(2, 2)};
  EXPECT_THROW(spreduce::build_parameterization(tm), spreduce::RankDeficientOutput);
}

TEST(AssembleP, FixedBlockOnlyAtMinimalOrder) {
  std::mt19937_64 rng(45);
  const StateSpaceModel model = testutil::random_model(5, 1, 1, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  const Parameterization par = spreduce::build_parameterization(tm);
  const Matrix P = spreduce::assemble_P(par, Matrix(0, 4));
  EXPECT_EQ(P, par.Pfix);
}

TEST(AssembleP, PaddedIdentityPicksRowsOfV) {
  std::mt19937_64 rng(46);
  const StateSpaceModel model = testutil::random_model(5, 1, 1, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  const Parameterization par = spreduce::build_parameterization(tm);
  Matrix W = Matrix::Zero(2, 4);
  W(0, 0) = 1;
  W(1, 1) = 1;
  const Matrix P = spreduce::assemble_P(par, W);
  EXPECT_EQ(Matrix(P.topRows(1)), par.Pfix);
  EXPECT_EQ(Matrix(P.bottomRows(2)), Matrix(par.V.topRows(2)));
}

TEST(AssembleP, StiefelWGivesOrthonormalP) {
  std::mt19937_64 rng(47);
  const StateSpaceModel model = testutil::random_model(7, 2, 2, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  const Parameterization par = spreduce::build_parameterization(tm);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix W = spreduce::random_stiefel(3, 5, seed);
    const Matrix P = spreduce::assemble_P(par, W);
    EXPECT_LE((P * P.transpose() - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-9);
  }
  // And the converse: a non-orthonormal W is rejected.
  const Matrix W = 1.1 * spreduce::random_stiefel(3, 5, 9);
  EXPECT_THROW(spreduce::assemble_P(par, W), spreduce::ToleranceViolation);
  EXPECT_THROW(spreduce::assemble_P(par, Matrix::Identity(3, 4)),
               spreduce::DimensionMismatch);
  // k = n - p is the legal full-order boundary; one row more must be rejected.
  const Matrix Pfull = spreduce::assemble_P(par, Matrix::Identity(5, 5));
  EXPECT_LE((Pfull * Pfull.transpose() - Matrix::Identity(7, 7)).cwiseAbs().maxCoeff(),
            1e-9);
  EXPECT_THROW(spreduce::assemble_P(par, Matrix::Identity(6, 5)),
               spreduce::DimensionMismatch);
}

TEST(StiefelTangent, ProjectionPropertiesHold) {
  std::mt19937_64 rng(48);
  const Matrix W = spreduce::random_stiefel(3, 6, 11);
  const Matrix G = testutil::random_matrix(3, 6, rng);
  const Matrix xi = spreduce::stiefel_tangent(W, G);
  // Tangency: xi W^T is skew-symmetric.
  const Matrix S = xi * W.transpose();
  EXPECT_LE((S + S.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  // Idempotence of the projection.
  EXPECT_LE((spreduce::stiefel_tangent(W, xi) - xi).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(QrRetract, FixesOrthonormalPoints) {
  const Matrix W = spreduce::random_stiefel(3, 6, 12);
  const Matrix back = spreduce::qr_retract(W);
  EXPECT_LE((back - W).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(QrRetract, ReturnsOrthonormalRows) {
  std::mt19937_64 rng(49);
  const Matrix Y = testutil::random_matrix(3, 7, rng);
  const Matrix W = spreduce::qr_retract(Y);
  EXPECT_LE((W * W.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  // Row span is preserved.
  EXPECT_LE((Y - Y * W.transpose() * W).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(RandomStiefel, DeterministicPerSeed) {
  const Matrix a = spreduce::random_stiefel(2, 5, 77);
  const Matrix b = spreduce::random_stiefel(2, 5, 77);
  const Matrix c = spreduce::random_stiefel(2, 5, 78);
  EXPECT_EQ(a, b);
  EXPECT_GT((a - c).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE((a * a.transpose() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(spreduce::random_stiefel(6, 5, 0), spreduce::DimensionMismatch);
}

TEST(StiefelObjective, FullOrderValueIsZero) {
  std::mt19937_64 rng(50);
  const StateSpaceModel model = testutil::random_model(5, 2, 1, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  StiefelObjective obj(tm, 5);
  const double base = oracles::kron_h2(model.A, model.B, model.C);
  EXPECT_LE(obj.value(Matrix::Identity(4, 4)), 1e-10 * std::max(1.0, base));
}

TEST(StiefelObjective, RejectsBadOrders) {
  std::mt19937_64 rng(51);
  const StateSpaceModel model = testutil::random_model(5, 2, 2, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  EXPECT_THROW(StiefelObjective(tm, 1), spreduce::InvalidArgument);
  EXPECT_THROW(StiefelObjective(tm, 6), spreduce::InvalidArgument);
}

TEST(StiefelObjective, InvariantUnderRowRemixOfW) {
  std::mt19937_64 rng(52);
  const StateSpaceModel model = testutil::random_model(7, 2, 1, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  StiefelObjective obj(tm, 4);
  const Matrix W = spreduce::random_stiefel(obj.rows(), obj.cols(), 5);
  const Matrix G = testutil::random_orthogonal(3, rng);
  const double a = obj.value(W);
  const double b = obj.value(Matrix(G * W));
  EXPECT_NEAR(b, a, 1e-9 * std::max(1.0, a));
}

TEST(StiefelObjective, MatchesKroneckerOracleAndKeepsFeedthroughZero) {
  std::mt19937_64 rng(53);
  const StateSpaceModel model = testutil::random_model(6, 2, 2, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  StiefelObjective obj(tm, 4);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix W = spreduce::random_stiefel(obj.rows(), obj.cols(), seed);
    const double J = obj.value(W);
    const ReducedModel red = obj.reduce_at(tm.system, W);
    EXPECT_LE(red.Dhat.cwiseAbs().maxCoeff(), 1e-10);
    const double oracle =
        oracles::kron_h2_error(tm.system, red.Ahat, red.Bhat, red.Chat);
    EXPECT_NEAR(J, oracle, 1e-9 * std::max(1.0, oracle));
    // The reduction of the transformed system measures the same error
    // against the original model, because the transform preserves the
    // transfer function.
    const double against_original = spreduce::h2_error(model, red);
    EXPECT_NEAR(against_original, J, 1e-6 * std::max(1.0, J));
  }
}

TEST(StiefelObjective, SurfacesUnstableReductionsWhenNotATrueTransform) {
  // A hand-built "transform" that is not actually congruence-stabilized can
  // produce an unstable reduced matrix; the objective must refuse it.
  Matrix A(2, 2), B(2, 1), C(1, 2);
  A << -10, 30, -3, 1;
  B << 1, 1;
  C << 1, 0;
  const TransformedModel fake{StateSpaceModel(A, B, C), Matrix::Identity(2, 2)};
  StiefelObjective obj(fake, 1);
  EXPECT_THROW(obj.value(Matrix(0, 1)), spreduce::UnstableErrorSystem);
}

TEST(StiefelObjective, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(54);
  const double h = 1e-6;
  int strong_checks = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 5 + (trial % 3);
    const StateSpaceModel model = testutil::random_model(n, 2, 1, rng);
    const TransformedModel tm = spreduce::stabilizing_transform(model);
    const Index r = 2 + (trial % 2);
    StiefelObjective obj(tm, r);
    const Matrix W =
        spreduce::random_stiefel(obj.rows(), obj.cols(), static_cast<std::uint64_t>(trial));
    Matrix grad;
    const double J = obj.value_and_gradient(W, &grad);
    Matrix dir = testutil::random_matrix(obj.rows(), obj.cols(), rng);
    Matrix xi = spreduce::stiefel_tangent(W, dir);
    xi /= std::max(xi.norm(), 1e-300);
    const double analytic = (grad.transpose() * xi).trace();
    const double plus = obj.value(spreduce::qr_retract(W + h * xi));
    const double minus = obj.value(spreduce::qr_retract(W - h * xi));
    const double fd = (plus - minus) / (2.0 * h);
    const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-8 * (1.0 + J)});
    EXPECT_NEAR(analytic / scale, fd / scale, 1e-4)
        << "trial " << trial << " J=" << J;
    if (std::abs(analytic) > 1e-6 * (1.0 + J)) ++strong_checks;
  }
  // The sweep must include directions with genuinely nonzero derivatives.
  EXPECT_GE(strong_checks, 5);
}

TEST(StiefelObjective, NegativeTangentIsADescentDirection) {
  std::mt19937_64 rng(55);
  const StateSpaceModel model = testutil::random_model(7, 2, 1, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  StiefelObjective obj(tm, 3);
  const Matrix W = spreduce::random_stiefel(obj.rows(), obj.cols(), 3);
  Matrix grad;
  const double J = obj.value_and_gradient(W, &grad);
  Matrix xi = spreduce::stiefel_tangent(W, grad);
  ASSERT_GT(xi.norm(), 1e-10);
  bool decreased = false;
  for (double t = 1e-2; t >= 1e-8; t *= 0.25) {
    const double J_t = obj.value(spreduce::qr_retract(W - t * xi));
    if (J_t < J) {
      decreased = true;
      break;
    }
  }
  EXPECT_TRUE(decreased);
}

TEST(AlignFromGreedy, IdentityTransformReproducesTheSelection) {
  std::mt19937_64 rng(56);
  const Index n = 6;
  const Matrix A = half_shifted_skew(n, rng);
  Matrix C = Matrix::Zero(1, n);
  C(0, 0) = 1;
  const StateSpaceModel model(A, testutil::random_matrix(n, 2, rng), C);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  EXPECT_LE((tm.L - Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-6);
  const Parameterization par = spreduce::build_parameterization(tm);
  const ProjectionPair gproj = spreduce::selection_pair({0, 2, 4}, n);
  const Matrix W = spreduce::align_from_greedy(gproj, tm, par);
  ASSERT_EQ(W.rows(), 2);
  const Matrix P = spreduce::assemble_P(par, W);
  EXPECT_LE(testutil::subspace_gap(P, gproj.P), 1e-8);
}

TEST(AlignFromGreedy, MinimalOrderGivesEmptyW) {
  std::mt19937_64 rng(57);
  const StateSpaceModel model = testutil::random_unit_output_model(5, 2, 2, rng);
  const GreedyTrace trace = spreduce::greedy_reduce(model, 2);
  if (trace.final_order() != 2) GTEST_SKIP() << "greedy stopped early on this draw";
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  const Parameterization par = spreduce::build_parameterization(tm);
  const Matrix W = spreduce::align_from_greedy(*trace.final_projection, tm, par);
  EXPECT_EQ(W.rows(), 0);
  EXPECT_EQ(W.cols(), 3);
}

TEST(AlignFromGreedy, LandsOnTheGreedySubspaceMappedThroughTheTransform) {
  // The aligned point retains the greedy coordinate subspace pulled back
  // through the stabilizing factor: range(P^T) = L^{-1} range(P_g^T).
  // Equivalently, the retained functionals P L^T of the transformed problem
  // span exactly the greedy functionals. Note the eliminated equations do
  // not correspond (the pullback is not orthogonal), so the objective at the
  // aligned point is a valid feasible value, not the greedy error itself.
  std::mt19937_64 rng(58);
  int verified = 0;
  for (int trial = 0; trial < 4; ++trial) {
    const StateSpaceModel model = testutil::random_unit_output_model(8, 2, 1, rng);
    GreedyTrace trace;
    try {
      trace = spreduce::greedy_reduce(model, 4);
    } catch (const spreduce::NoReductionPossible&) {
      continue;
    }
    if (trace.final_order() != 4) continue;
    const TransformedModel tm = spreduce::stabilizing_transform(model);
    const Parameterization par = spreduce::build_parameterization(tm);
    const ProjectionPair& gproj = *trace.final_projection;
    const Matrix W = spreduce::align_from_greedy(gproj, tm, par);
    EXPECT_LE((W * W.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-9);
    const Matrix P = spreduce::assemble_P(par, W);
    const Matrix pulled_back = spreduce::qr_retract(
        Matrix(tm.L.triangularView<Eigen::Lower>().solve(gproj.P.transpose())
                   .transpose()));
    EXPECT_LE(testutil::subspace_gap(P, pulled_back), 1e-8) << "trial " << trial;
    const Matrix functionals = spreduce::qr_retract(Matrix(P * tm.L.transpose()));
    EXPECT_LE(testutil::subspace_gap(functionals, gproj.P), 1e-8)
        << "trial " << trial;
    // The point is feasible for the objective and keeps zero feedthrough.
    StiefelObjective obj(tm, 4);
    const double J = obj.value(W);
    EXPECT_TRUE(std::isfinite(J));
    EXPECT_GE(J, 0.0);
    ++verified;
  }
  EXPECT_GE(verified, 2);
}

TEST(AlignFromGreedy, RejectsSubspacesMissingTheOutput) {
  std::mt19937_64 rng(59);
  const Index n = 5;
  const StateSpaceModel model = testutil::random_unit_output_model(n, 2, 1, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  const Parameterization par = spreduce::build_parameterization(tm);
  // Build a retained subspace whose transformed image lies entirely inside
  // range(V^T), i.e. orthogonal to the output block: pulling P_g^T = L V^T
  // back through L^{-1} lands exactly on range(V^T), so the containment
  // check must fail.
  const Matrix Vrows = par.V.topRows(2);
  const Matrix Pg = spreduce::qr_retract(Matrix(Vrows * tm.L.transpose()));
  const Matrix Qg = spreduce::linalg::orthonormal_complement(Pg, n);
  EXPECT_THROW(
      spreduce::align_from_greedy(ProjectionPair(Pg, Qg), tm, par),
      spreduce::AlignmentInfeasible);
}

TEST(AlignFromGreedy, RejectsOrdersBelowTheOutputCount) {
  std::mt19937_64 rng(60);
  const StateSpaceModel model = testutil::random_unit_output_model(5, 2, 2, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  const Parameterization par = spreduce::build_parameterization(tm);
  const ProjectionPair tiny = spreduce::selection_pair({3}, 5);
  EXPECT_THROW(spreduce::align_from_greedy(tiny, tm, par),
               spreduce::AlignmentInfeasible);
}

TEST(Optimize, HistoryIsMonotoneAndBudgetIsRespected) {
  std::mt19937_64 rng(61);
  const StateSpaceModel model = testutil::random_model(7, 2, 1, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  StiefelObjective obj(tm, 3);
  const Matrix W0 = spreduce::random_stiefel(obj.rows(), obj.cols(), 1);
  OptimizeOptions options;
  options.budget = 40;
  const auto report = spreduce::optimize(obj, W0, options);
  EXPECT_LE(report.iterations, 40);
  EXPECT_EQ(report.objective_history.size(),
            static_cast<size_t>(report.iterations) + 1);
  EXPECT_EQ(report.objective_history.front(), report.initial_objective);
  EXPECT_EQ(report.objective_history.back(), report.final_objective);
  for (size_t k = 1; k < report.objective_history.size(); ++k) {
    EXPECT_LE(report.objective_history[k], report.objective_history[k - 1]);
  }
  EXPECT_LE(report.final_objective, report.initial_objective);
}

TEST(Optimize, RestartingFromTheTerminalPointDoesNotMove) {
  // Run until the optimizer stops for a reason other than the iteration
  // budget (convergence or a stalled line search). Restarting from that
  // point must terminate immediately without moving.
  std::mt19937_64 rng(62);
  const StateSpaceModel model = testutil::random_model(6, 2, 1, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  StiefelObjective obj(tm, 3);
  Matrix W = spreduce::random_stiefel(obj.rows(), obj.cols(), 2);
  OptimizeOptions options;
  options.budget = 2000;
  spreduce::OptimizationReport first;
  int rounds = 0;
  for (; rounds < 10; ++rounds) {
    first = spreduce::optimize(obj, W, options);
    W = first.W_final;
    if (first.converged || first.iterations < options.budget) break;
  }
  ASSERT_LT(rounds, 10) << "descent did not reach a terminal point";
  const auto second = spreduce::optimize(obj, first.W_final, options);
  EXPECT_EQ(second.iterations, 0);
  EXPECT_NEAR(second.final_objective, first.final_objective,
              1e-12 * std::max(1.0, first.final_objective));
  EXPECT_EQ(second.converged, first.converged);
}

TEST(Optimize, RejectsOffManifoldStarts) {
  std::mt19937_64 rng(63);
  const StateSpaceModel model = testutil::random_model(5, 1, 1, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  StiefelObjective obj(tm, 3);
  const Matrix W0 = 1.5 * spreduce::random_stiefel(obj.rows(), obj.cols(), 4);
  EXPECT_THROW(spreduce::optimize(obj, W0), spreduce::ToleranceViolation);
  EXPECT_THROW(spreduce::optimize(obj, Matrix::Identity(1, 1)),
               spreduce::DimensionMismatch);
}

TEST(Optimize, RecoversAPlantedZeroErrorSubspace) {
  // Observable and junk dynamics are block-decoupled in coordinates where
  // the stabilizing transform is the identity, then mixed by an orthogonal
  // change of basis. The subspace carrying the observable block achieves an
  // exactly zero objective; starting nearby, descent must find it.
  std::mt19937_64 rng(64);
  const Index n = 6;
  const Index r = 3;
  Matrix A0 = Matrix::Zero(n, n);
  {
    const Matrix obs = half_shifted_skew(r, rng);
    const Matrix junk = half_shifted_skew(n - r, rng);
    A0.topLeftCorner(r, r) = obs;
    A0.bottomRightCorner(n - r, n - r) = junk;
  }
  Matrix B0 = testutil::random_matrix(n, 2, rng);
  Matrix C0 = Matrix::Zero(1, n);
  C0.leftCols(r) = testutil::random_matrix(1, r, rng);
  const Matrix O = testutil::random_orthogonal(n, rng);
  const StateSpaceModel model(O.transpose() * A0 * O, O.transpose() * B0,
                              C0 * O);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  const Parameterization par = spreduce::build_parameterization(tm);
  // The planted subspace in mixed coordinates.
  Matrix Pstar = Matrix::Zero(r, n);
  Pstar.leftCols(r) = Matrix::Identity(r, r);
  Pstar = Pstar * O;
  const Matrix Qstar = spreduce::linalg::orthonormal_complement(Pstar, n);
  const Matrix Wstar =
      spreduce::align_from_greedy(ProjectionPair(Pstar, Qstar), tm, par);
  StiefelObjective obj(tm, r);
  EXPECT_LE(obj.value(Wstar), 1e-10);

  const Matrix noise = testutil::random_matrix(Wstar.rows(), Wstar.cols(), rng);
  const Matrix W0 = spreduce::qr_retract(Wstar + 0.05 * noise);
  const auto report = spreduce::optimize(obj, W0);
  EXPECT_LT(report.final_objective, report.initial_objective);
  EXPECT_LE(report.final_objective, 1e-6);
}

TEST(StiefelReduce, WarmStartsFromADeepEnoughTrace) {
  std::mt19937_64 rng(65);
  int verified = 0;
  for (int trial = 0; trial < 4; ++trial) {
    const StateSpaceModel model = testutil::random_unit_output_model(7, 2, 1, rng);
    GreedyTrace trace;
    try {
      trace = spreduce::greedy_reduce(model, 3);
    } catch (const spreduce::NoReductionPossible&) {
      continue;
    }
    if (trace.final_order() != 3) continue;
    const TransformedModel tm = spreduce::stabilizing_transform(model);
    const auto sr = spreduce::stiefel_reduce(tm, 3, &trace, 0);
    EXPECT_TRUE(sr.warm_started);
    // The starting value is the objective at the aligned greedy subspace,
    // recomputed here independently of the optimizer.
    const spreduce::Parameterization par = spreduce::build_parameterization(tm);
    const Matrix W0 = spreduce::align_from_greedy(*trace.final_projection, tm, par);
    StiefelObjective obj(tm, 3);
    const double at_alignment = obj.value(W0);
    EXPECT_NEAR(sr.report.initial_objective, at_alignment,
                1e-10 * std::max(1.0, at_alignment));
    EXPECT_LE(sr.report.final_objective, sr.report.initial_objective);
    // Descent from the aligned subspace ends at or below the greedy error.
    const double greedy_h2 = trace.steps.back().h2_error_after;
    EXPECT_LE(sr.report.final_objective,
              greedy_h2 + 1e-9 * std::max(1.0, greedy_h2));
    // The returned realization matches the reported objective against the
    // original model.
    const double check = spreduce::h2_error(model, sr.reduced);
    EXPECT_NEAR(check, sr.report.final_objective,
                1e-6 * std::max(1.0, sr.report.final_objective));
    EXPECT_LE(sr.reduced.Dhat.cwiseAbs().maxCoeff(), 1e-10);
    ++verified;
  }
  EXPECT_GE(verified, 2);
}

TEST(StiefelReduce, ColdStartIsSeededAndDeterministic) {
  std::mt19937_64 rng(66);
  const StateSpaceModel model = testutil::random_unit_output_model(6, 2, 1, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  const auto a = spreduce::stiefel_reduce(tm, 3, nullptr, 42);
  const auto b = spreduce::stiefel_reduce(tm, 3, nullptr, 42);
  EXPECT_FALSE(a.warm_started);
  EXPECT_EQ(a.report.final_objective, b.report.final_objective);
  EXPECT_EQ(a.report.iterations, b.report.iterations);
  EXPECT_EQ(a.report.W_final, b.report.W_final);
}

TEST(StiefelReduce, ShallowTraceFallsBackToCold) {
  std::mt19937_64 rng(67);
  const StateSpaceModel model = testutil::random_unit_output_model(6, 2, 1, rng);
  GreedyTrace trace;
  try {
    trace = spreduce::greedy_reduce(model, 4);
  } catch (const spreduce::NoReductionPossible&) {
    GTEST_SKIP() << "greedy found no stable move on this draw";
  }
  if (trace.final_order() != 4) GTEST_SKIP() << "greedy stopped early on this draw";
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  // Requesting a deeper order than the trace provides must fall back.
  const auto sr = spreduce::stiefel_reduce(tm, 3, &trace, 11);
  EXPECT_FALSE(sr.warm_started);
}

TEST(FreeFunctionWrappers, AgreeWithTheObjectiveClass) {
  std::mt19937_64 rng(68);
  const StateSpaceModel model = testutil::random_model(6, 2, 1, rng);
  const TransformedModel tm = spreduce::stabilizing_transform(model);
  StiefelObjective obj(tm, 3);
  const Matrix W = spreduce::random_stiefel(obj.rows(), obj.cols(), 6);
  EXPECT_EQ(spreduce::objective(tm, W, 3), obj.value(W));
  Matrix g1;
  obj.value_and_gradient(W, &g1);
  const Matrix g2 = spreduce::gradient(tm, W, 3);
  EXPECT_EQ(g1, g2);
}

}  // namespace
