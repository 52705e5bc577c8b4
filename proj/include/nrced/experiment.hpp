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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nrced/dsp.hpp"
#include "nrced/io.hpp"
#include "nrced/model.hpp"
#include "nrced/tf.hpp"

namespace nrced {

struct BeatEntry {
  TFTensor egm;
  TFTensor ecg;
  uint64_t r_peak_index = 0;
  BeatLabel label = BeatLabel::Unlabeled;
};

/// Paired, tensorized beats of one patient, ordered by R-peak position.
struct BeatDataset {
  std::string patient_id;
  std::vector<BeatEntry> beats;
  size_t dropped = 0;  // beats lost at segmentation

  size_t size() const { return beats.size(); }
  int egm_channels() const { return beats.empty() ? 0 : beats.front().egm.channels; }
  int ecg_channels() const { return beats.empty() ? 0 : beats.front().ecg.channels; }
};

BeatDataset tensorize(const BeatPairSet& set, const STFTConfig& cfg);

/// Beat-tensor files `<id>.egm.nrcd` / `<id>.ecg.nrcd` under a directory.
void save_dataset(const fs::path& dir, const BeatDataset& ds);
BeatDataset load_dataset(const fs::path& dir, const std::string& patient_id,
                         const STFTConfig& cfg);

enum class ExperimentMode { PatientSpecific, SingleLead, LeaveOneOut, Reverse };

const char* experiment_mode_name(ExperimentMode m);
ExperimentMode experiment_mode_from_name(const std::string& name);

struct ExperimentSpec {
  ExperimentMode mode = ExperimentMode::PatientSpecific;
  std::vector<std::string> patients;
  std::string holdout_patient;  // leave-one-out: empty = run every fold
  int single_lead_channel = 0;  // EGM lead for SingleLead mode
  int epochs = 50;
  double split_ratio = 0.5;
  int early_stop_patience = 5;
  double early_stop_min_delta = 1e-4;
  uint64_t seed = 0;

  bool reverse() const { return mode == ExperimentMode::Reverse; }
  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentSpec from_json(const nlohmann::json& j);
};

/// Deterministic shuffle-then-cut split. Train receives ceil(N * ratio)
/// beats, test the rest; both halves keep their temporal ordering.
std::pair<BeatDataset, BeatDataset> split_dataset(const BeatDataset& ds,
                                                  double ratio, uint64_t seed);

struct TrainLog {
  std::vector<double> epoch_loss;  // mean train loss per epoch
  bool early_stopped = false;
};

struct TrainResult {
  ModelConfig resolved_config;  // channel counts filled in from the data
  ModelParams params;
  TrainLog log;
};

/// Optimizes the correlation objective with Adam over shuffled minibatches.
/// Input/output roles and lead masking follow the spec. Aborts with a
/// diagnostic if the loss turns non-finite.
TrainResult train(const ExperimentSpec& spec, const ModelConfig& model_cfg,
                  const BeatDataset& train_set, const STFTConfig& stft_cfg);

struct EvalResult {
  double mean_rho = 0.0;
  double min_rho = 0.0;
  double max_rho = 0.0;
  std::vector<double> per_lead_rho;  // per output lead (12 forward, 5 reverse)
  std::vector<double> per_beat_rho;
};

/// Per-beat time-domain correlation between two matrices of flattened
/// output tensors (one column per beat): invert both to time domain, then
/// correlate the concatenation of all leads per beat. per_lead_rho holds the
/// per-lead means.
EvalResult score_time_domain(const Eigen::MatrixXd& outputs,
                             const Eigen::MatrixXd& targets,
                             const STFTConfig& stft_cfg);

/// Feeds the test set through the model in eval mode, inverts the outputs to
/// time domain and reports Pearson correlation against the true beats
/// (concatenated across leads per beat, plus per-lead means).
EvalResult evaluate_time_domain(const Network& net, ModelParams& params,
                                const ExperimentSpec& spec,
                                const BeatDataset& test_set,
                                const STFTConfig& stft_cfg);

struct PatientMetrics {
  double mean_rho = 0.0;
  double min_rho = 0.0;
  double max_rho = 0.0;
  std::vector<double> per_lead_rho;
};

struct MetricsReport {
  nlohmann::json spec;
  std::map<std::string, PatientMetrics> per_patient;
  std::map<std::string, std::vector<double>> training_log;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

/// Runs the protocol selected by spec.mode over the given per-patient
/// datasets and collects one metrics entry per evaluated patient.
MetricsReport run_experiment(const ExperimentSpec& spec,
                             const ModelConfig& model_cfg,
                             const std::map<std::string, BeatDataset>& data,
                             const STFTConfig& stft_cfg);

// Matrix assembly shared with the analysis tools: one column per beat.
Eigen::MatrixXd input_matrix(const BeatDataset& ds, const ExperimentSpec& spec);
Eigen::MatrixXd target_matrix(const BeatDataset& ds, const ExperimentSpec& spec);

}  // namespace nrced
