// Copyright (c) spreduce contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "spreduce/parallel.hpp"
#include "spreduce/sp.hpp"

namespace spreduce {

/// Indices of states whose output-matrix column is entirely below 1e-12 in
/// magnitude. Eliminating only such states keeps the reduced feedthrough at
/// zero when C is a selection matrix.
inline std::vector<Index> candidate_set(const Eigen::Ref<const Matrix>& C) {
  std::vector<Index> out;
  for (Index j = 0; j < C.cols(); ++j) {
    if (C.col(j).cwiseAbs().maxCoeff() < 1e-12) out.push_back(j);
  }
  return out;
}

enum class GreedyTermination {
  kReachedTargetOrder,
  kCandidatesExhausted,
  kAllRemainingUnstable,
};

inline const char* to_string(GreedyTermination t) {
  switch (t) {
    case GreedyTermination::kReachedTargetOrder: return "reached_target_order";
    case GreedyTermination::kCandidatesExhausted: return "candidates_exhausted";
    case GreedyTermination::kAllRemainingUnstable: return "all_remaining_unstable";
  }
  return "unknown";
}

struct GreedyStep {
  Index eliminated_index = -1;
  double h2_error_after = 0.0;
  Index candidates_evaluated = 0;
  Index candidates_unstable = 0;
};

struct GreedyTrace {
  Index n = 0;
  std::vector<GreedyStep> steps;
  GreedyTermination termination = GreedyTermination::kReachedTargetOrder;
  std::optional<ProjectionPair> final_projection;

  std::vector<Index> eliminated_indices() const {
    std::vector<Index> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.eliminated_index);
    return out;
  }

  /// Retained index set (ascending) after the first num_eliminated steps.
  std::vector<Index> retained_after(Index num_eliminated) const {
    if (num_eliminated < 0 || num_eliminated > static_cast<Index>(steps.size())) {
      throw InvalidArgument("GreedyTrace: step count out of range");
    }
    std::vector<bool> gone(static_cast<size_t>(n), false);
    for (Index k = 0; k < num_eliminated; ++k) {
      gone[static_cast<size_t>(steps[static_cast<size_t>(k)].eliminated_index)] = true;
    }
    std::vector<Index> retained;
    for (Index j = 0; j < n; ++j) {
      if (!gone[static_cast<size_t>(j)]) retained.push_back(j);
    }
    return retained;
  }

  Index final_order() const { return n - static_cast<Index>(steps.size()); }
};

struct GreedyOptions {
  int threads = 0;  // 0: hardware concurrency, always capped by SPREDUCE_THREADS
};

namespace detail {

/// Strictly-better comparison with a deterministic tie zone: differences
/// within 1e-12 relative, or within 1e-13 of the full model's own squared H2
/// norm, count as ties and the earlier (lower-index) candidate is kept.
inline bool greedy_improves(double candidate, double incumbent, double h2_scale) {
  const double tie =
      1e-12 * std::max(std::abs(candidate), std::abs(incumbent)) + 1e-13 * h2_scale;
  return candidate < incumbent - tie;
}

}  // namespace detail

/// Greedy state elimination: starting from the full model, repeatedly removes
/// the candidate state whose quasi-steady-state elimination yields the
/// smallest squared H2 error, skipping candidates that destabilize the
/// reduced dynamics or make the fast block numerically singular. Stops at
/// r_target states, or earlier when candidates run out or none is stable.
inline GreedyTrace greedy_reduce(const StateSpaceModel& model, Index r_target,
                                 const GreedyOptions& options = {}) {
  const Index n = model.n();
  if (r_target < 1 || r_target >= n) {
    throw InvalidArgument("greedy_reduce: need 1 <= r_target < n");
  }
  const ErrorH2Workspace workspace(model.A, model.B, model.C);
  const double h2_scale = std::max(workspace.base_h2(), 0.0);
  const int threads = detail::resolve_threads(options.threads);

  std::vector<Index> candidates = candidate_set(model.C);
  std::vector<Index> eliminated;

  GreedyTrace trace;
  trace.n = n;
  trace.termination = GreedyTermination::kCandidatesExhausted;

  struct Slot {
    bool stable = false;
    double h2 = 0.0;
  };

  while (static_cast<Index>(eliminated.size()) < n - r_target) {
    if (candidates.empty()) {
      trace.termination = GreedyTermination::kCandidatesExhausted;
      break;
    }
    const Index count = static_cast<Index>(candidates.size());
    std::vector<Slot> slots(static_cast<size_t>(count));
    detail::parallel_for(count, threads, [&](Index i) {
      std::vector<bool> gone(static_cast<size_t>(n), false);
      for (Index e : eliminated) gone[static_cast<size_t>(e)] = true;
      gone[static_cast<size_t>(candidates[static_cast<size_t>(i)])] = true;
      std::vector<Index> retained;
      for (Index j = 0; j < n; ++j) {
        if (!gone[static_cast<size_t>(j)]) retained.push_back(j);
      }
      const ProjectionPair proj = selection_pair(retained, n);
      try {
        const detail::ReducedMatrices mats =
            detail::reduce_matrices(model.A, model.B, model.C, proj.P, proj.Q);
        const ErrorH2Workspace::Eval eval =
            workspace.evaluate(mats.Ahat, mats.Bhat, mats.Chat);
        slots[static_cast<size_t>(i)] = {eval.stable, eval.h2};
      } catch (const SingularFastBlock&) {
        slots[static_cast<size_t>(i)] = {false, 0.0};
      }
    });

    Index best = -1;
    Index unstable = 0;
    for (Index i = 0; i < count; ++i) {
      const Slot& s = slots[static_cast<size_t>(i)];
      if (!s.stable) {
        ++unstable;
        continue;
      }
      if (best < 0 ||
          detail::greedy_improves(s.h2, slots[static_cast<size_t>(best)].h2, h2_scale)) {
        best = i;
      }
    }
    if (best < 0) {
      if (trace.steps.empty()) {
        throw NoReductionPossible(
            "greedy_reduce: no candidate elimination is stable at the first step");
      }
      trace.termination = GreedyTermination::kAllRemainingUnstable;
      break;
    }

    const Index chosen = candidates[static_cast<size_t>(best)];
    eliminated.push_back(chosen);
    std::sort(eliminated.begin(), eliminated.end());
    candidates.erase(candidates.begin() + best);

    std::vector<bool> gone(static_cast<size_t>(n), false);
    for (Index e : eliminated) gone[static_cast<size_t>(e)] = true;
    std::vector<Index> retained;
    for (Index j = 0; j < n; ++j) {
      if (!gone[static_cast<size_t>(j)]) retained.push_back(j);
    }
    const ReducedModel reduced = reduce(model, selection_pair(retained, n));
    GreedyStep step;
    step.eliminated_index = chosen;
    step.h2_error_after = h2_error(model, reduced);
    step.candidates_evaluated = count;
    step.candidates_unstable = unstable;
    trace.steps.push_back(step);

    if (static_cast<Index>(eliminated.size()) == n - r_target) {
      trace.termination = GreedyTermination::kReachedTargetOrder;
    }
  }

  trace.final_projection =
      selection_pair(trace.retained_after(static_cast<Index>(trace.steps.size())), n);
  return trace;
}

}  // namespace spreduce
