/*
 *  Copyright 2026 The NRCED Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <span>

namespace nrced {

/// Pearson correlation coefficient between two equal-length vectors.
///
/// Centered and variance-normalized, so the result lies in [-1, 1] and is
/// invariant under positive affine maps of either argument. When either
/// vector is constant the coefficient is undefined; we return 0 and set
/// *degenerate (the case a correlation loss never visits once training has
/// nudged the output off a constant).
double pearson_corr(std::span<const double> a, std::span<const double> b,
                    bool* degenerate = nullptr);

double mean_of(std::span<const double> v);

}  // namespace nrced
