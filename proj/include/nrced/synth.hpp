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
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nrced/common.hpp"
#include "nrced/dsp.hpp"

namespace nrced {

/// Generator settings for one synthetic patient. Everything is a pure
/// function of (config, seed): the same config twice gives byte-identical
/// recordings.
///
/// Beats are built from a small set of latent cardiac sources (ventricular,
/// atrial, repolarization, plus auxiliary mixtures). Both lead sets derive
/// from the same latent traces: each lead is a fixed linear combination
/// pushed through a saturating tanh, with the EGM side mixing sharpened
/// (differentiated) traces so its morphologies come out spikier and more
/// local. The shared latent process is what makes the EGM <-> ECG map exist
/// and be learnable in both directions.
struct SynthPatientConfig {
  std::string patient_id = "p01";
  int beats = 1000;
  double heart_rate_bpm = 75.0;
  double heart_rate_jitter = 0.05;  // relative std of the R-R interval
  int latent_dim = 4;               // at most 5
  double atypical_fraction = 0.0;
  double noise_level = 0.01;        // additive white noise std, lead units
  uint64_t seed = 1;
  int sample_rate_hz = 1000;

  // Per-beat morphology variation.
  double amp_jitter = 0.12;
  double time_jitter_s = 0.006;
  double width_jitter = 0.06;

  // Cohorts that should share a generator family point mixing_seed at a
  // common value; each patient's lead mixing is then the shared map with a
  // mixing_jitter-sized personal perturbation. mixing_seed 0 falls back to
  // the patient seed (fully individual anatomy).
  uint64_t mixing_seed = 0;
  double mixing_jitter = 0.0;

  void validate() const;
  nlohmann::json to_json() const;
  static SynthPatientConfig from_json(const nlohmann::json& j);
};

/// Latent source traces for a single beat, latent_dim x raw length, with the
/// R wave at sample `r_offset`. Source 0 is the ventricular (QRS) source;
/// sinus beats keep its support inside 0.08-0.11 s while atypical beats
/// widen it past 0.11 s, flip the Q/S/T deflections and suppress the P wave.
struct LatentBeat {
  Eigen::MatrixXd traces;
  int r_offset = 0;
};

LatentBeat synth_beat(const SynthPatientConfig& cfg, int beat_index,
                      BeatLabel label);

/// Fixed per-patient lead mixing: linear maps for both lead sets, per-lead
/// gains feeding the tanh saturation. Deterministic from the config seed.
struct MixingMap {
  Eigen::MatrixXd ecg_mix;   // 12 x latent_dim
  Eigen::MatrixXd egm_mix;   // 5 x latent_dim
  Eigen::VectorXd ecg_gain;  // 12
  Eigen::VectorXd egm_gain;  // 5
};

MixingMap make_mixing_map(const SynthPatientConfig& cfg);

/// Maps full-length latent traces (latent_dim x L) to the two lead sets.
/// ECG leads mix the raw traces; EGM leads mix sharpened traces. White noise
/// drawn from `noise_rng` is added to every lead, scaled by noise_level.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> derive_leads(
    const Eigen::MatrixXd& latent, const MixingMap& map, double noise_level,
    Rng& noise_rng);

/// One fully assembled patient: recording plus ground-truth beat labels with
/// exact R-peak positions.
struct SynthPatient {
  Recording recording;
  LabelTable labels;
};

SynthPatient synth_patient(const SynthPatientConfig& cfg);

/// Writes `<id>.csv`, `<id>.json` and `labels_<id>.csv` per patient into
/// out_dir, in the recording ingestion format.
void generate_dataset(const std::vector<SynthPatientConfig>& cohort,
                      const std::filesystem::path& out_dir);

}  // namespace nrced
