/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstddef>
#include <functional>

namespace lrenkf {

/// Worker count: ENKF_LR_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs body(i) for i in [0, count), split into contiguous chunks over
/// worker_count() threads. Each index must touch disjoint data.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace lrenkf
