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

#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "nrced/dsp.hpp"
#include "nrced/experiment.hpp"
#include "nrced/model.hpp"
#include "nrced/synth.hpp"
#include "nrced/tf.hpp"

namespace nrced {

/// Everything a run needs, loaded from one JSON file. Unknown keys are
/// rejected everywhere. A single master seed drives every component that
/// does not pin its own seed explicitly, so `--seed` reproduces or varies a
/// whole pipeline at once.
struct RunConfig {
  uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
  STFTConfig stft = make_stft_config();
  ModelConfig model;
  ExperimentSpec experiment;
  PreprocessConfig preprocess;
  std::vector<SynthPatientConfig> synth;
  double ridge_lambda = 1e-7;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path,
                        std::optional<uint64_t> seed_override = std::nullopt);
};

nlohmann::json preprocess_config_to_json(const PreprocessConfig& cfg);
PreprocessConfig preprocess_config_from_json(const nlohmann::json& j);

}  // namespace nrced
