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

#include "nrced/stats.hpp"

#include <cmath>
#include <cstddef>

#include "nrced/common.hpp"

namespace nrced {

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double pearson_corr(std::span<const double> a, std::span<const double> b,
                    bool* degenerate) {
  if (a.size() != b.size() || a.size() < 2)
    fail_data("pearson_corr: need two equal-length vectors of size >= 2");
  if (degenerate) *degenerate = false;

  const size_t n = a.size();
  double ma = mean_of(a), mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  double denom = std::sqrt(saa) * std::sqrt(sbb);
  if (denom <= 0.0 || !std::isfinite(denom)) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  double rho = sab / denom;
  // Floating-point roundoff can push |rho| a hair past 1.
  if (rho > 1.0) rho = 1.0;
  if (rho < -1.0) rho = -1.0;
  return rho;
}

}  // namespace nrced
