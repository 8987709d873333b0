// Copyright (c) spreduce contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "spreduce/model.hpp"

namespace spreduce {

/// Configuration for the synthetic heterogeneous-network generator: a slow
/// (mechanical-like) diagonal block, a fast (electrical/line-like) block
/// separated by timescale_ratio, and sparse random coupling between them.
struct GeneratorConfig {
  Index n_slow = 4;
  Index n_fast = 6;
  Index n_inputs = 2;
  Index n_outputs = 1;
  double timescale_ratio = 100.0;
  double coupling_density = 0.1;
  std::uint64_t seed = 0;
};

inline GeneratorConfig small_config(std::uint64_t seed = 0) {
  GeneratorConfig cfg;
  cfg.n_slow = 4;
  cfg.n_fast = 6;
  cfg.n_inputs = 2;
  cfg.n_outputs = 1;
  cfg.timescale_ratio = 50.0;
  cfg.coupling_density = 0.2;
  cfg.seed = seed;
  return cfg;
}

/// Desk-scale stand-in for a heterogeneous 56-state power-system-flavoured
/// network: 20 slow and 36 fast states, 12 inputs, 2 outputs.
inline GeneratorConfig paper_like_config(std::uint64_t seed = 0) {
  GeneratorConfig cfg;
  cfg.n_slow = 20;
  cfg.n_fast = 36;
  cfg.n_inputs = 12;
  cfg.n_outputs = 2;
  cfg.timescale_ratio = 100.0;
  cfg.coupling_density = 0.1;
  cfg.seed = seed;
  return cfg;
}

/// Generates a stable heterogeneous model. The drift matrix is a damped
/// diagonal (slow block with decay rates near 1, fast block near
/// timescale_ratio) plus sparse random coupling whose magnitude is limited by
/// the weaker of the two coupled rates and normalized by 1/sqrt(n * density),
/// plus a weak nearest-neighbour ring that keeps the network connected.
/// Stability is enforced by re-checking with progressively increased diagonal
/// damping (factor 1.3, at most 20 retries). Deterministic per config.
inline StateSpaceModel generate(const GeneratorConfig& cfg) {
  if (cfg.n_slow < 1 || cfg.n_fast < 0) {
    throw InvalidArgument("generate: need n_slow >= 1 and n_fast >= 0");
  }
  if (cfg.n_inputs < 1 || cfg.n_outputs < 1) {
    throw InvalidArgument("generate: need at least one input and one output");
  }
  if (cfg.n_outputs > cfg.n_slow) {
    throw InvalidArgument("generate: outputs observe slow states only (n_outputs <= n_slow)");
  }
  if (!(cfg.timescale_ratio > 1.0)) {
    throw InvalidArgument("generate: timescale_ratio must exceed 1");
  }
  if (cfg.coupling_density < 0.0 || cfg.coupling_density > 1.0) {
    throw InvalidArgument("generate: coupling_density must lie in [0,1]");
  }
  const Index n = cfg.n_slow + cfg.n_fast;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Vector decay(n);
  for (Index i = 0; i < cfg.n_slow; ++i) decay(i) = 0.5 + unit(rng);
  for (Index i = cfg.n_slow; i < n; ++i) {
    decay(i) = (0.5 + unit(rng)) * cfg.timescale_ratio;
  }

  Matrix A = Matrix::Zero(n, n);
  const double norm = (cfg.coupling_density > 0.0)
                          ? 1.0 / std::sqrt(static_cast<double>(n) * cfg.coupling_density)
                          : 0.0;
  const double strength = 0.3;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      // Draw both variates unconditionally so the stream layout (and hence
      // the matrix) is a deterministic function of the config alone.
      const double toss = unit(rng);
      const double g = gauss(rng);
      if (cfg.coupling_density > 0.0 && toss < cfg.coupling_density) {
        A(i, j) = strength * std::min(decay(i), decay(j)) * norm * g;
      }
    }
  }
  for (Index i = 0; i + 1 < n; ++i) {
    const double ring = 0.05 * std::min(decay(i), decay(i + 1));
    A(i, i + 1) += ring;
    A(i + 1, i) -= ring;
  }

  Matrix B(n, cfg.n_inputs);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < cfg.n_inputs; ++j) B(i, j) = gauss(rng);
  }
  Matrix C = Matrix::Zero(cfg.n_outputs, n);
  for (Index i = 0; i < cfg.n_outputs; ++i) C(i, i) = 1.0;

  std::vector<std::string> labels;
  labels.reserve(n);
  for (Index i = 0; i < cfg.n_slow; ++i) {
    labels.push_back("slow_" + std::to_string(i + 1));
  }
  for (Index i = 0; i < cfg.n_fast; ++i) {
    labels.push_back("fast_" + std::to_string(i + 1));
  }

  double bump = 1.0;
  for (int attempt = 0; attempt <= 20; ++attempt) {
    Matrix Ad = A;
    Ad.diagonal() = -bump * decay;
    if (linalg::is_hurwitz(Ad)) {
      return StateSpaceModel(Ad, B, C, labels);
    }
    bump *= 1.3;
  }
  throw StabilizationFailed(
      "generate: could not stabilize the sampled network within 20 damping retries");
}

}  // namespace spreduce
