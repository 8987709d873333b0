// Copyright (c) spreduce contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "spreduce/linalg.hpp"

namespace spreduce {
namespace detail {

/// Thread cap from the SPREDUCE_THREADS environment variable; unlimited when
/// unset or unparsable.
inline int env_thread_cap() {
  const char* value = std::getenv("SPREDUCE_THREADS");
  if (value == nullptr) return 1 << 20;
  char* end = nullptr;
  const long parsed = std::strtol(value, &end, 10);
  if (end == value || parsed < 1) return 1 << 20;
  return static_cast<int>(parsed);
}

/// Effective worker count: the request (or hardware concurrency when the
/// request is 0) capped by SPREDUCE_THREADS.
inline int resolve_threads(int requested) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  int base = requested > 0 ? requested : hw;
  base = std::min(base, env_thread_cap());
  return std::max(base, 1);
}

/// Runs fn(i) for i in [0, count). Work is split into contiguous chunks, one
/// per worker; fn must only write to per-index slots. Exceptions are
/// propagated after all workers join.
template <typename F>
void parallel_for(Index count, int threads, F&& fn) {
  threads = std::min<Index>(threads, count);
  if (threads <= 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> failures(static_cast<size_t>(threads));
  const Index chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const Index begin = static_cast<Index>(t) * chunk;
    const Index end = std::min(begin + chunk, count);
    workers.emplace_back([&, t, begin, end] {
      try {
        for (Index i = begin; i < end; ++i) fn(i);
      } catch (...) {
        failures[static_cast<size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
}

}  // namespace detail
}  // namespace spreduce
