// Copyright (c) spreduce contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "spreduce/model.hpp"

namespace spreduce {
namespace detail {

/// Zero-order-hold discretization over one step: Ad = exp(A dt) and
/// Bd = (integral of exp(A s) ds over [0, dt]) B, obtained from one
/// exponential of the augmented block matrix.
inline void discretize_zoh(const Matrix& A, const Matrix& B, double dt,
                           Matrix* Ad, Matrix* Bd) {
  const Index n = A.rows();
  const Index m = B.cols();
  Matrix block = Matrix::Zero(n + m, n + m);
  block.topLeftCorner(n, n) = A * dt;
  block.topRightCorner(n, m) = B * dt;
  const Matrix E = block.exp();
  *Ad = E.topLeftCorner(n, n);
  *Bd = E.topRightCorner(n, m);
}

inline void check_error_pair_stable(const StateSpaceModel& full,
                                    const ReducedModel& reduced) {
  if (!linalg::is_hurwitz(reduced.Ahat)) {
    throw UnstableErrorSystem("time-domain error: reduced model is not Hurwitz");
  }
}

}  // namespace detail

/// Sum over input channels of the integrated squared impulse-response error,
/// computed by exact matrix-exponential stepping of the error system on a
/// uniform grid and composite Simpson quadrature. The horizon must let the
/// slowest mode decay below 1e-6 of its initial magnitude. A nonzero reduced
/// feedthrough contributes ||Dhat||_F^2 / dt, the energy of the
/// zero-order-hold approximation of its impulse.
inline double impulse_response_error(const StateSpaceModel& full,
                                     const ReducedModel& reduced, double horizon,
                                     double dt) {
  if (!(horizon > 0.0) || !(dt > 0.0) || dt > horizon) {
    throw InvalidArgument("impulse_response_error: need 0 < dt <= horizon");
  }
  detail::check_error_pair_stable(full, reduced);
  const ErrorSystem err = build_error_system(full, reduced);
  const double max_re = linalg::spectral_abscissa(linalg::eigenvalues(err.Abar));
  if (std::exp(max_re * horizon) > 1e-6) {
    throw HorizonTooShort(
        "impulse_response_error: slowest mode has not decayed below 1e-6 at the horizon");
  }

  Index steps = static_cast<Index>(std::ceil(horizon / dt));
  if (steps % 2 != 0) ++steps;
  const double h = horizon / static_cast<double>(steps);
  const Matrix Ad = (err.Abar * h).exp();

  Matrix X = err.Bbar;
  double integral = 0.0;
  for (Index k = 0; k <= steps; ++k) {
    const double g = (err.Cbar * X).squaredNorm();
    double weight = (k == 0 || k == steps) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    integral += weight * g;
    if (k < steps) X = Ad * X;
  }
  integral *= h / 3.0;

  if (reduced.Dhat.cwiseAbs().maxCoeff() > 1e-10) {
    integral += reduced.Dhat.squaredNorm() / h;
  }
  return integral;
}

/// Monte Carlo estimate of the steady-state error power under unit-intensity
/// white noise on every input, using zero-order-hold sampling with per-sample
/// variance 1/dt. The average runs over the second half of the trajectory.
/// Deterministic for a fixed seed.
inline double white_noise_error(const StateSpaceModel& full,
                                const ReducedModel& reduced, std::uint64_t seed,
                                double duration, double dt) {
  if (!(duration > 0.0) || !(dt > 0.0) || 2.0 * dt > duration) {
    throw InvalidArgument("white_noise_error: need 0 < 2 dt <= duration");
  }
  detail::check_error_pair_stable(full, reduced);
  const ErrorSystem err = build_error_system(full, reduced);
  Matrix Ad, Bd;
  detail::discretize_zoh(err.Abar, err.Bbar, dt, &Ad, &Bd);

  const Index m = err.Bbar.cols();
  const Index steps = static_cast<Index>(std::floor(duration / dt));
  const Index warmup = steps / 2;
  const double sigma = std::sqrt(1.0 / dt);
  const bool with_feedthrough = reduced.Dhat.cwiseAbs().maxCoeff() > 1e-10;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector x = Vector::Zero(err.Abar.rows());
  Vector u(m);
  double acc = 0.0;
  Index count = 0;
  for (Index k = 0; k < steps; ++k) {
    for (Index i = 0; i < m; ++i) u(i) = sigma * gauss(rng);
    Vector delta = err.Cbar * x;
    if (with_feedthrough) delta.noalias() -= reduced.Dhat * u;
    if (k >= warmup) {
      acc += delta.squaredNorm();
      ++count;
    }
    x = Ad * x + Bd * u;
  }
  return acc / static_cast<double>(count);
}

}  // namespace spreduce
