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

#include "nrced/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nrced/stats.hpp"

namespace nrced {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

BeatDataset tensorize(const BeatPairSet& set, const STFTConfig& cfg) {
  BeatDataset ds;
  ds.patient_id = set.patient_id;
  ds.dropped = set.dropped;
  ds.beats.resize(set.pairs.size());
  parallel_for(static_cast<int64_t>(set.pairs.size()), [&](int64_t i) {
    const BeatPair& pair = set.pairs[i];
    BeatEntry& e = ds.beats[i];
    e.egm = tf_forward(pair.egm, cfg);
    e.ecg = tf_forward(pair.ecg, cfg);
    e.r_peak_index = static_cast<uint64_t>(pair.ecg.r_peak_index);
    e.label = set.labels[i];
  });
  return ds;
}

void save_dataset(const fs::path& dir, const BeatDataset& ds) {
  BeatTensorFile egm_file, ecg_file;
  for (const BeatEntry& e : ds.beats) {
    BeatTensorMeta meta{e.r_peak_index, e.label};
    egm_file.append(e.egm, meta);
    ecg_file.append(e.ecg, meta);
  }
  write_beat_tensors(dir / (ds.patient_id + ".egm.nrcd"), egm_file);
  write_beat_tensors(dir / (ds.patient_id + ".ecg.nrcd"), ecg_file);
}

BeatDataset load_dataset(const fs::path& dir, const std::string& patient_id,
                         const STFTConfig& cfg) {
  BeatTensorFile egm_file = read_beat_tensors(dir / (patient_id + ".egm.nrcd"));
  BeatTensorFile ecg_file = read_beat_tensors(dir / (patient_id + ".ecg.nrcd"));
  if (egm_file.beat_count() != ecg_file.beat_count())
    fail_data("dataset '" + patient_id + "': EGM/ECG beat counts differ");
  BeatDataset ds;
  ds.patient_id = patient_id;
  ds.beats.resize(egm_file.beat_count());
  for (size_t i = 0; i < ds.beats.size(); ++i) {
    BeatEntry& e = ds.beats[i];
    e.egm = egm_file.tensor(i, cfg.source_len);
    e.ecg = ecg_file.tensor(i, cfg.source_len);
    if (egm_file.meta[i].r_peak_index != ecg_file.meta[i].r_peak_index)
      fail_data("dataset '" + patient_id + "': misaligned beat metadata");
    e.r_peak_index = egm_file.meta[i].r_peak_index;
    e.label = egm_file.meta[i].label;
  }
  return ds;
}

const char* experiment_mode_name(ExperimentMode m) {
  switch (m) {
    case ExperimentMode::PatientSpecific: return "patient_specific";
    case ExperimentMode::SingleLead: return "single_lead";
    case ExperimentMode::LeaveOneOut: return "leave_one_out";
    case ExperimentMode::Reverse: return "reverse";
  }
  return "patient_specific";
}

ExperimentMode experiment_mode_from_name(const std::string& name) {
  if (name == "patient_specific") return ExperimentMode::PatientSpecific;
  if (name == "single_lead") return ExperimentMode::SingleLead;
  if (name == "leave_one_out") return ExperimentMode::LeaveOneOut;
  if (name == "reverse") return ExperimentMode::Reverse;
  fail_data("unknown experiment mode '" + name + "'");
}

void ExperimentSpec::validate() const {
  if (patients.empty()) fail_data("experiment spec: no patients listed");
  if (mode == ExperimentMode::LeaveOneOut && patients.size() < 2)
    fail_data("experiment spec: leave-one-out needs at least two patients");
  if (!holdout_patient.empty() &&
      std::find(patients.begin(), patients.end(), holdout_patient) == patients.end())
    fail_data("experiment spec: holdout patient not in patient list");
  if (epochs < 0) fail_data("experiment spec: epochs must be >= 0");
  if (split_ratio <= 0.0 || split_ratio >= 1.0)
    fail_data("experiment spec: split ratio must lie in (0, 1)");
  if (single_lead_channel < 0)
    fail_data("experiment spec: single-lead channel must be >= 0");
  if (early_stop_patience < 1)
    fail_data("experiment spec: early-stop patience must be >= 1");
}

json ExperimentSpec::to_json() const {
  json j;
  j["mode"] = experiment_mode_name(mode);
  j["patients"] = patients;
  j["holdout_patient"] = holdout_patient;
  j["single_lead_channel"] = single_lead_channel;
  j["epochs"] = epochs;
  j["split_ratio"] = split_ratio;
  j["early_stop_patience"] = early_stop_patience;
  j["early_stop_min_delta"] = early_stop_min_delta;
  j["seed"] = seed;
  return j;
}

ExperimentSpec ExperimentSpec::from_json(const json& j) {
  ExperimentSpec s;
  static const char* keys[] = {"mode", "patients", "holdout_patient",
                               "single_lead_channel", "epochs", "split_ratio",
                               "early_stop_patience", "early_stop_min_delta",
                               "seed"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) fail_data("experiment spec: unknown key '" + it.key() + "'");
  }
  if (j.contains("mode"))
    s.mode = experiment_mode_from_name(j["mode"].get<std::string>());
  if (j.contains("patients")) s.patients = j["patients"].get<std::vector<std::string>>();
  if (j.contains("holdout_patient"))
    s.holdout_patient = j["holdout_patient"].get<std::string>();
  if (j.contains("single_lead_channel"))
    s.single_lead_channel = j["single_lead_channel"].get<int>();
  if (j.contains("epochs")) s.epochs = j["epochs"].get<int>();
  if (j.contains("split_ratio")) s.split_ratio = j["split_ratio"].get<double>();
  if (j.contains("early_stop_patience"))
    s.early_stop_patience = j["early_stop_patience"].get<int>();
  if (j.contains("early_stop_min_delta"))
    s.early_stop_min_delta = j["early_stop_min_delta"].get<double>();
  if (j.contains("seed")) s.seed = j["seed"].get<uint64_t>();
  // Use-time validation happens in train()/run_experiment(); a config file
  // may carry an experiment section without listing patients yet.
  return s;
}

std::pair<BeatDataset, BeatDataset> split_dataset(const BeatDataset& ds,
                                                  double ratio, uint64_t seed) {
  const size_t n = ds.size();
  if (n < 2) fail_data("split_dataset: need at least two beats");
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<size_t> pick(0, i);
    std::swap(idx[i], idx[pick(rng)]);
  }
  const size_t train_n = static_cast<size_t>(
      std::ceil(static_cast<double>(n) * ratio - 1e-12));
  std::vector<size_t> train_idx(idx.begin(), idx.begin() + train_n);
  std::vector<size_t> test_idx(idx.begin() + train_n, idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  auto take = [&](const std::vector<size_t>& which) {
    BeatDataset part;
    part.patient_id = ds.patient_id;
    part.dropped = ds.dropped;
    part.beats.reserve(which.size());
    for (size_t i : which) part.beats.push_back(ds.beats[i]);
    return part;
  };
  return {take(train_idx), take(test_idx)};
}

namespace {

// Channel planes used as model input: all of them, except in single-lead
// mode where one EGM lead keeps only its real and imaginary planes.
std::vector<int> input_plane_selection(const BeatDataset& ds,
                                       const ExperimentSpec& spec) {
  const int in_channels = spec.reverse() ? ds.ecg_channels() : ds.egm_channels();
  std::vector<int> planes;
  if (spec.mode == ExperimentMode::SingleLead) {
    const int m = ds.egm_channels() / 2;
    if (spec.single_lead_channel >= m)
      fail_data("single-lead channel " + std::to_string(spec.single_lead_channel) +
                " out of range for " + std::to_string(m) + " EGM leads");
    planes = {spec.single_lead_channel, spec.single_lead_channel + m};
  } else {
    planes.resize(in_channels);
    std::iota(planes.begin(), planes.end(), 0);
  }
  return planes;
}

MatrixXd planes_matrix(const BeatDataset& ds, bool use_ecg,
                       const std::vector<int>& planes, int plane_size) {
  MatrixXd out(static_cast<int64_t>(planes.size()) * plane_size, ds.size());
  for (size_t i = 0; i < ds.size(); ++i) {
    const TFTensor& t = use_ecg ? ds.beats[i].ecg : ds.beats[i].egm;
    double* col = out.col(i).data();
    for (size_t p = 0; p < planes.size(); ++p) {
      const double* src = t.data.data() + static_cast<size_t>(planes[p]) * plane_size;
      std::copy(src, src + plane_size, col + p * plane_size);
    }
  }
  return out;
}

}  // namespace

MatrixXd input_matrix(const BeatDataset& ds, const ExperimentSpec& spec) {
  if (ds.beats.empty()) fail_data("input_matrix: empty dataset");
  const TFTensor& first = ds.beats.front().egm;
  const int plane_size = first.num_freqs * first.num_frames;
  return planes_matrix(ds, spec.reverse(), input_plane_selection(ds, spec),
                       plane_size);
}

MatrixXd target_matrix(const BeatDataset& ds, const ExperimentSpec& spec) {
  if (ds.beats.empty()) fail_data("target_matrix: empty dataset");
  const TFTensor& first = ds.beats.front().egm;
  const int plane_size = first.num_freqs * first.num_frames;
  const int out_channels = spec.reverse() ? ds.egm_channels() : ds.ecg_channels();
  std::vector<int> planes(out_channels);
  std::iota(planes.begin(), planes.end(), 0);
  return planes_matrix(ds, !spec.reverse(), planes, plane_size);
}

TrainResult train(const ExperimentSpec& spec, const ModelConfig& model_cfg,
                  const BeatDataset& train_set, const STFTConfig& stft_cfg) {
  spec.validate();
  if (train_set.beats.empty()) fail_data("train: empty training set");

  MatrixXd x = input_matrix(train_set, spec);
  MatrixXd y = target_matrix(train_set, spec);

  ModelConfig cfg = model_cfg;
  cfg.height = stft_cfg.num_freqs;
  cfg.width = stft_cfg.num_frames;
  cfg.in_channels = static_cast<int>(x.rows()) / (cfg.height * cfg.width);
  cfg.out_channels = static_cast<int>(y.rows()) / (cfg.height * cfg.width);
  cfg.validate();

  Network net(cfg);
  ModelParams params = net.init_params(derive_seed(spec.seed, 13 + cfg.seed));
  AdamState adam;
  AdamHyper hyper;
  hyper.lr = cfg.learning_rate;

  Rng shuffle_rng(derive_seed(spec.seed, 11));
  Rng dropout_rng(derive_seed(spec.seed, 12));

  const int64_t n = x.cols();
  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  TrainLog& log = result.log;
  double best_loss = std::numeric_limits<double>::infinity();
  int stale_epochs = 0;

  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    for (int64_t i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<int64_t> pick(0, i);
      std::swap(order[i], order[pick(shuffle_rng)]);
    }
    double loss_sum = 0.0;
    int64_t seen = 0;
    for (int64_t start = 0; start < n; start += cfg.batch_size) {
      const int64_t bsz = std::min<int64_t>(cfg.batch_size, n - start);
      if (bsz < 2) break;  // batch statistics need at least two samples
      MatrixXd xb(x.rows(), bsz), yb(y.rows(), bsz);
      for (int64_t k = 0; k < bsz; ++k) {
        xb.col(k) = x.col(order[start + k]);
        yb.col(k) = y.col(order[start + k]);
      }
      ForwardTrace trace = net.forward(params, xb, Mode::Train, &dropout_rng);
      double loss = batch_loss(trace.output, yb);
      if (!std::isfinite(loss))
        fail_data("train: loss diverged (epoch " + std::to_string(epoch) +
                  ", batch at beat " + std::to_string(start) + ")");
      Gradients grads = net.backward(params, trace, yb);
      adam_step(params, grads, adam, hyper);
      params.step += 1;
      loss_sum += loss * static_cast<double>(bsz);
      seen += bsz;
    }
    const double epoch_loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
    log.epoch_loss.push_back(epoch_loss);
    log_debug("train: epoch " + std::to_string(epoch) + " loss " +
              std::to_string(epoch_loss));

    if (best_loss - epoch_loss > spec.early_stop_min_delta) {
      best_loss = epoch_loss;
      stale_epochs = 0;
    } else {
      ++stale_epochs;
      if (stale_epochs >= spec.early_stop_patience) {
        log.early_stopped = true;
        break;
      }
    }
  }

  result.resolved_config = cfg;
  result.params = std::move(params);
  return result;
}

EvalResult score_time_domain(const MatrixXd& outputs, const MatrixXd& targets,
                             const STFTConfig& stft_cfg) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
    fail_data("score_time_domain: shape mismatch");
  const int plane = stft_cfg.num_freqs * stft_cfg.num_frames;
  if (outputs.rows() % plane != 0)
    fail_data("score_time_domain: rows are not whole tensor planes");
  const int out_channels = static_cast<int>(outputs.rows()) / plane;
  const int leads = out_channels / 2;
  const int64_t n = outputs.cols();
  if (n == 0) fail_data("score_time_domain: empty batch");

  EvalResult res;
  res.per_beat_rho.resize(n);
  std::vector<std::vector<double>> lead_acc(leads, std::vector<double>(n));
  parallel_for(n, [&](int64_t i) {
    TFTensor out_t = unflatten(
        std::span<const double>(outputs.col(i).data(), outputs.rows()),
        out_channels, stft_cfg);
    TFTensor tgt_t = unflatten(
        std::span<const double>(targets.col(i).data(), targets.rows()),
        out_channels, stft_cfg);
    Beat recon = tf_inverse(out_t, stft_cfg);
    Beat truth = tf_inverse(tgt_t, stft_cfg);
    // One coefficient per beat over all leads concatenated.
    std::vector<double> a, b;
    a.reserve(static_cast<size_t>(leads) * stft_cfg.source_len);
    b.reserve(static_cast<size_t>(leads) * stft_cfg.source_len);
    std::vector<double> la(stft_cfg.source_len), lb(stft_cfg.source_len);
    for (int c = 0; c < leads; ++c) {
      for (int t = 0; t < stft_cfg.source_len; ++t) {
        la[t] = recon.channels(c, t);
        lb[t] = truth.channels(c, t);
        a.push_back(la[t]);
        b.push_back(lb[t]);
      }
      lead_acc[c][i] = pearson_corr(la, lb);
    }
    res.per_beat_rho[i] = pearson_corr(a, b);
  });

  res.mean_rho = mean_of(res.per_beat_rho);
  res.min_rho = *std::min_element(res.per_beat_rho.begin(), res.per_beat_rho.end());
  res.max_rho = *std::max_element(res.per_beat_rho.begin(), res.per_beat_rho.end());
  res.per_lead_rho.resize(leads);
  for (int c = 0; c < leads; ++c) res.per_lead_rho[c] = mean_of(lead_acc[c]);
  return res;
}

EvalResult evaluate_time_domain(const Network& net, ModelParams& params,
                                const ExperimentSpec& spec,
                                const BeatDataset& test_set,
                                const STFTConfig& stft_cfg) {
  if (test_set.beats.empty()) fail_data("evaluate: empty test set");
  MatrixXd x = input_matrix(test_set, spec);
  MatrixXd y = target_matrix(test_set, spec);

  const int64_t n = x.cols();
  const int64_t chunk = net.config().batch_size;
  MatrixXd outputs(y.rows(), n);
  for (int64_t start = 0; start < n; start += chunk) {
    const int64_t bsz = std::min<int64_t>(chunk, n - start);
    ForwardTrace trace = net.forward(params, x.middleCols(start, bsz), Mode::Eval);
    outputs.middleCols(start, bsz) = trace.output;
  }
  return score_time_domain(outputs, y, stft_cfg);
}

json MetricsReport::to_json() const {
  json j;
  j["spec"] = spec;
  json pp = json::object();
  for (const auto& [pid, m] : per_patient) {
    pp[pid] = {{"mean_rho", m.mean_rho},
               {"min_rho", m.min_rho},
               {"max_rho", m.max_rho},
               {"per_lead_rho", m.per_lead_rho}};
  }
  j["per_patient"] = pp;
  json tl = json::object();
  for (const auto& [pid, losses] : training_log) tl[pid] = losses;
  j["training_log"] = tl;
  return j;
}

MetricsReport MetricsReport::from_json(const json& j) {
  MetricsReport r;
  r.spec = j.at("spec");
  for (auto it = j.at("per_patient").begin(); it != j.at("per_patient").end(); ++it) {
    PatientMetrics m;
    m.mean_rho = it.value().at("mean_rho").get<double>();
    m.min_rho = it.value().at("min_rho").get<double>();
    m.max_rho = it.value().at("max_rho").get<double>();
    m.per_lead_rho = it.value().at("per_lead_rho").get<std::vector<double>>();
    r.per_patient[it.key()] = std::move(m);
  }
  for (auto it = j.at("training_log").begin(); it != j.at("training_log").end(); ++it)
    r.training_log[it.key()] = it.value().get<std::vector<double>>();
  return r;
}

MetricsReport run_experiment(const ExperimentSpec& spec,
                             const ModelConfig& model_cfg,
                             const std::map<std::string, BeatDataset>& data,
                             const STFTConfig& stft_cfg) {
  spec.validate();
  for (const std::string& pid : spec.patients)
    if (!data.count(pid)) fail_data("run_experiment: no dataset for patient '" + pid + "'");

  MetricsReport report;
  report.spec = spec.to_json();

  auto record = [&](const std::string& pid, const TrainResult& tr,
                    const EvalResult& ev) {
    PatientMetrics m;
    m.mean_rho = ev.mean_rho;
    m.min_rho = ev.min_rho;
    m.max_rho = ev.max_rho;
    m.per_lead_rho = ev.per_lead_rho;
    report.per_patient[pid] = std::move(m);
    report.training_log[pid] = tr.log.epoch_loss;
  };

  if (spec.mode == ExperimentMode::LeaveOneOut) {
    std::vector<std::string> folds = spec.holdout_patient.empty()
                                         ? spec.patients
                                         : std::vector<std::string>{spec.holdout_patient};
    for (const std::string& holdout : folds) {
      BeatDataset pool;
      pool.patient_id = "pool_minus_" + holdout;
      for (const std::string& pid : spec.patients) {
        if (pid == holdout) continue;
        const BeatDataset& ds = data.at(pid);
        pool.beats.insert(pool.beats.end(), ds.beats.begin(), ds.beats.end());
      }
      TrainResult tr = train(spec, model_cfg, pool, stft_cfg);
      Network net(tr.resolved_config);
      EvalResult ev =
          evaluate_time_domain(net, tr.params, spec, data.at(holdout), stft_cfg);
      record(holdout, tr, ev);
      log_info("leave-one-out fold '" + holdout + "': mean rho " +
               std::to_string(ev.mean_rho));
    }
    return report;
  }

  for (const std::string& pid : spec.patients) {
    auto [train_half, test_half] =
        split_dataset(data.at(pid), spec.split_ratio, spec.seed);
    TrainResult tr = train(spec, model_cfg, train_half, stft_cfg);
    Network net(tr.resolved_config);
    EvalResult ev = evaluate_time_domain(net, tr.params, spec, test_half, stft_cfg);
    record(pid, tr, ev);
    log_info("experiment '" + std::string(experiment_mode_name(spec.mode)) +
             "' patient '" + pid + "': mean rho " + std::to_string(ev.mean_rho));
  }
  return report;
}

}  // namespace nrced
