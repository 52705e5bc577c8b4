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

#include <Eigen/Dense>
#include <cstdint>

namespace nrced {

enum class BeatLabel : uint8_t { Sinus = 0, Atypical = 1, Unlabeled = 2 };

/// One segmented heartbeat: channels x time, anchored at its R peak in the
/// source recording's sample coordinates.
struct Beat {
  Eigen::MatrixXd channels;    // M x T
  int64_t r_peak_index = 0;    // position in the source recording
  int beat_index = 0;          // ordinal within the patient
  int sample_rate_hz = 500;

  int num_channels() const { return static_cast<int>(channels.rows()); }
  int num_samples() const { return static_cast<int>(channels.cols()); }
};

}  // namespace nrced
