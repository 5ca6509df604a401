/*
 * mvi : CNN-based myelin volume index mapping on synthetic phantoms
 *
 * Copyright 2026 the mvi authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "mvi/pipeline/pipeline.hpp"

namespace mvi::cli {

/// Generate the phantom dataset under <workspace>/dataset.
int cmd_phantom(const pipeline::RunConfig& cfg, bool force);

/// Full protocol (preprocess, folds, train, infer, stats, report).
int cmd_run(const pipeline::RunConfig& cfg, const pipeline::RunOptions& opt);

/// Recompute statistics and reports from existing GenMVI volumes.
int cmd_report(const pipeline::RunConfig& cfg);

/// Built-in oracle suites (gradients, signed-rank enumeration, erosion
/// brute force, tiling arithmetic, the lr table, checkpoint corruption).
/// Prints one line per suite and a summary signature; nonzero exit on any
/// failure.
int cmd_verify();

} // namespace mvi::cli
