// Copyright 2026 The attnbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <functional>

namespace attnbf {

// Worker count: hardware concurrency, capped by BEAMFORM_NUM_THREADS when set.
std::size_t num_workers();

// Runs body(i) for i in [0, n) on up to num_workers() threads. Each index runs
// exactly once; callers write results into pre-sized slots so output order is
// independent of scheduling. The first exception thrown by any body is
// rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace attnbf
