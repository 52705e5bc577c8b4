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

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "nrced/basis.hpp"
#include "nrced/config.hpp"
#include "nrced/experiment.hpp"
#include "nrced/io.hpp"
#include "nrced/model.hpp"
#include "nrced/plots.hpp"
#include "nrced/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kEcgLeadNames = {"I",   "II",  "III", "aVR",
                                                "aVL", "aVF", "V1",  "V2",
                                                "V3",  "V4",  "V5",  "V6"};
const std::vector<std::string> kEgmLeadNames = {"EGM1", "EGM2", "EGM3", "EGM4",
                                                "EGM5"};

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<uint64_t> seed;
  int threads = 0;
};

nrced::RunConfig load_config(const CommonArgs& args, bool required = true) {
  if (args.config_path.empty()) {
    if (required) nrced::fail_data("--config is required for this command");
    nrced::RunConfig cfg;
    if (args.seed) cfg.seed = *args.seed;
    return cfg;
  }
  if (!fs::exists(args.config_path))
    nrced::fail_data("config file '" + args.config_path + "' does not exist");
  return nrced::RunConfig::load(args.config_path, args.seed);
}

fs::path ensure_out(const CommonArgs& args) {
  if (args.out_dir.empty()) nrced::fail_data("--out is required for this command");
  fs::create_directories(args.out_dir);
  return args.out_dir;
}

void apply_threads(const CommonArgs& args, const nrced::RunConfig& cfg) {
  nrced::set_compute_threads(args.threads > 0 ? args.threads : cfg.threads);
}

// Patients an experiment touches: the configured list, or everything found
// in the data directory.
std::vector<std::string> resolve_patients(const nrced::RunConfig& cfg,
                                          const fs::path& data_dir,
                                          bool tensor_files) {
  if (!cfg.experiment.patients.empty()) return cfg.experiment.patients;
  std::vector<std::string> ids;
  if (tensor_files) {
    for (const auto& entry : fs::directory_iterator(data_dir)) {
      std::string name = entry.path().filename().string();
      const std::string suffix = ".egm.nrcd";
      if (name.size() > suffix.size() &&
          name.substr(name.size() - suffix.size()) == suffix)
        ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
    std::sort(ids.begin(), ids.end());
  } else {
    ids = nrced::list_patients(data_dir);
  }
  if (ids.empty())
    nrced::fail_data("no patients found under '" + data_dir.string() + "'");
  return ids;
}

int cmd_synth(const CommonArgs& args) {
  nrced::RunConfig cfg = load_config(args);
  apply_threads(args, cfg);
  if (cfg.synth.empty())
    nrced::fail_data("config has no synth.patients to generate");
  fs::path out = ensure_out(args);
  nrced::generate_dataset(cfg.synth, out);
  nrced::write_json_file(out / "synth_config.json", cfg.to_json());
  return 0;
}

int cmd_preprocess(const CommonArgs& args, const std::string& data_dir) {
  nrced::RunConfig cfg = load_config(args, false);
  apply_threads(args, cfg);
  if (data_dir.empty()) nrced::fail_data("--data is required");
  if (!fs::is_directory(data_dir))
    nrced::fail_data("data directory '" + data_dir + "' does not exist");
  fs::path out = ensure_out(args);

  json summary;
  for (const std::string& pid : nrced::list_patients(data_dir)) {
    fs::path base(data_dir);
    nrced::Recording rec =
        nrced::read_recording_csv(base / (pid + ".csv"), base / (pid + ".json"));
    nrced::LabelTable labels;
    const nrced::LabelTable* labels_ptr = nullptr;
    fs::path labels_path = base / ("labels_" + pid + ".csv");
    if (fs::exists(labels_path)) {
      labels = nrced::read_labels_csv(labels_path);
      labels_ptr = &labels;
    }
    nrced::BeatPairSet set =
        nrced::preprocess_recording(rec, cfg.preprocess, labels_ptr);
    nrced::BeatDataset ds = nrced::tensorize(set, cfg.stft);
    nrced::save_dataset(out, ds);
    summary[pid] = {{"beats", ds.size()}, {"dropped", set.dropped}};
    nrced::log_info("preprocess: patient '" + pid + "' -> " +
                    std::to_string(ds.size()) + " beats (" +
                    std::to_string(set.dropped) + " dropped)");
  }
  if (summary.empty())
    nrced::fail_data("no recordings found under '" + data_dir + "'");
  nrced::write_json_file(out / "preprocess_summary.json", summary);
  return 0;
}

void write_eval_artifacts(const fs::path& out, const nrced::RunConfig& cfg,
                          const nrced::ExperimentSpec& spec,
                          const nrced::Network& net, nrced::ModelParams& params,
                          const nrced::BeatDataset& test_set,
                          nrced::MetricsReport& report,
                          const std::string& pid) {
  nrced::EvalResult ev =
      nrced::evaluate_time_domain(net, params, spec, test_set, cfg.stft);
  nrced::PatientMetrics m;
  m.mean_rho = ev.mean_rho;
  m.min_rho = ev.min_rho;
  m.max_rho = ev.max_rho;
  m.per_lead_rho = ev.per_lead_rho;
  report.per_patient[pid] = m;

  // Raw overlay data for the first test beat; `plot` renders it.
  Eigen::MatrixXd x = nrced::input_matrix(test_set, spec);
  Eigen::MatrixXd y = nrced::target_matrix(test_set, spec);
  nrced::ForwardTrace trace =
      net.forward(params, x.leftCols(std::min<int64_t>(x.cols(), 1)), nrced::Mode::Eval);
  const int out_channels =
      static_cast<int>(y.rows()) / (cfg.stft.num_freqs * cfg.stft.num_frames);
  nrced::TFTensor out_t = nrced::unflatten(
      std::span<const double>(trace.output.col(0).data(), trace.output.rows()),
      out_channels, cfg.stft);
  nrced::TFTensor tgt_t = nrced::unflatten(
      std::span<const double>(y.col(0).data(), y.rows()), out_channels, cfg.stft);
  Eigen::MatrixXd recon = nrced::tf_inverse(out_t, cfg.stft).channels;
  Eigen::MatrixXd truth = nrced::tf_inverse(tgt_t, cfg.stft).channels;
  const auto& names = spec.reverse() ? kEgmLeadNames : kEcgLeadNames;
  nrced::write_overlay_plot(out / ("overlay_" + pid + ".svg"), truth, recon,
                            names);
  nrced::log_info("eval: patient '" + pid + "' mean rho " +
                  std::to_string(ev.mean_rho));
}

int cmd_train(const CommonArgs& args, const std::string& data_dir) {
  nrced::RunConfig cfg = load_config(args);
  apply_threads(args, cfg);
  if (data_dir.empty()) nrced::fail_data("--data is required");
  if (!fs::is_directory(data_dir))
    nrced::fail_data("data directory '" + data_dir + "' does not exist");
  fs::path out = ensure_out(args);

  nrced::ExperimentSpec spec = cfg.experiment;
  if (spec.patients.empty())
    spec.patients = resolve_patients(cfg, data_dir, true);
  spec.validate();

  nrced::MetricsReport report;
  report.spec = spec.to_json();

  if (spec.mode == nrced::ExperimentMode::LeaveOneOut) {
    if (spec.holdout_patient.empty())
      nrced::fail_data("train: leave_one_out needs experiment.holdout_patient "
                       "(one fold per run)");
    nrced::BeatDataset pool;
    pool.patient_id = "pool_minus_" + spec.holdout_patient;
    for (const std::string& pid : spec.patients) {
      if (pid == spec.holdout_patient) continue;
      nrced::BeatDataset ds = nrced::load_dataset(data_dir, pid, cfg.stft);
      pool.beats.insert(pool.beats.end(), ds.beats.begin(), ds.beats.end());
    }
    nrced::BeatDataset holdout =
        nrced::load_dataset(data_dir, spec.holdout_patient, cfg.stft);
    nrced::TrainResult tr = nrced::train(spec, cfg.model, pool, cfg.stft);
    nrced::Network net(tr.resolved_config);
    nrced::save_checkpoint(out / ("model_" + spec.holdout_patient + ".ckpt"), net,
                           tr.params, spec.seed);
    report.training_log[spec.holdout_patient] = tr.log.epoch_loss;
    write_eval_artifacts(out, cfg, spec, net, tr.params, holdout, report,
                         spec.holdout_patient);
  } else {
    if (spec.patients.size() != 1)
      nrced::fail_data("train: this mode trains one patient per run; pass "
                       "exactly one patient");
    const std::string pid = spec.patients.front();
    nrced::BeatDataset ds = nrced::load_dataset(data_dir, pid, cfg.stft);
    auto [train_half, test_half] =
        nrced::split_dataset(ds, spec.split_ratio, spec.seed);
    nrced::TrainResult tr = nrced::train(spec, cfg.model, train_half, cfg.stft);
    nrced::Network net(tr.resolved_config);
    nrced::save_checkpoint(out / ("model_" + pid + ".ckpt"), net, tr.params,
                           spec.seed);
    report.training_log[pid] = tr.log.epoch_loss;
    write_eval_artifacts(out, cfg, spec, net, tr.params, test_half, report, pid);
  }

  nrced::write_json_file(out / "report.json", report.to_json());
  nrced::write_json_file(out / "config.json", cfg.to_json());
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& data_dir,
             const std::string& checkpoint) {
  nrced::RunConfig cfg = load_config(args);
  apply_threads(args, cfg);
  if (data_dir.empty() || checkpoint.empty())
    nrced::fail_data("--data and --checkpoint are required");
  if (!fs::is_directory(data_dir))
    nrced::fail_data("data directory '" + data_dir + "' does not exist");
  if (!fs::exists(checkpoint))
    nrced::fail_data("checkpoint '" + checkpoint + "' does not exist");
  fs::path out = ensure_out(args);

  nrced::ExperimentSpec spec = cfg.experiment;
  spec.validate();
  auto [model_cfg, params] = nrced::load_checkpoint(checkpoint);
  nrced::Network net(model_cfg);

  nrced::MetricsReport report;
  report.spec = spec.to_json();
  if (spec.mode == nrced::ExperimentMode::LeaveOneOut) {
    if (spec.holdout_patient.empty())
      nrced::fail_data("eval: leave_one_out needs experiment.holdout_patient");
    nrced::BeatDataset holdout =
        nrced::load_dataset(data_dir, spec.holdout_patient, cfg.stft);
    write_eval_artifacts(out, cfg, spec, net, params, holdout, report,
                         spec.holdout_patient);
  } else {
    if (spec.patients.size() != 1)
      nrced::fail_data("eval: pass exactly one patient for this mode");
    const std::string pid = spec.patients.front();
    nrced::BeatDataset ds = nrced::load_dataset(data_dir, pid, cfg.stft);
    auto [train_half, test_half] =
        nrced::split_dataset(ds, spec.split_ratio, spec.seed);
    write_eval_artifacts(out, cfg, spec, net, params, test_half, report, pid);
  }
  nrced::write_json_file(out / "report.json", report.to_json());
  return 0;
}

nrced::RegressionBasis basis_from_checkpoint(const std::string& checkpoint,
                                             double lambda) {
  auto [model_cfg, params] = nrced::load_checkpoint(checkpoint);
  nrced::Network net(model_cfg);
  Eigen::MatrixXd w = net.last_layer_weight(params);
  Eigen::VectorXd b = net.last_layer_bias(params);
  return nrced::RegressionBasis(std::move(w), std::move(b), lambda, checkpoint);
}

int cmd_reconstruct(const CommonArgs& args, const std::string& data_dir,
                    const std::string& checkpoint) {
  nrced::RunConfig cfg = load_config(args, false);
  apply_threads(args, cfg);
  if (data_dir.empty() || checkpoint.empty())
    nrced::fail_data("--data and --checkpoint are required");
  fs::path out = ensure_out(args);
  nrced::RegressionBasis basis = basis_from_checkpoint(checkpoint, cfg.ridge_lambda);

  json report;
  report["lambda"] = cfg.ridge_lambda;
  report["checkpoint"] = checkpoint;
  double worst_residual = 0.0;
  std::vector<std::string> pids;
  std::vector<double> means;
  for (const std::string& pid : resolve_patients(cfg, data_dir, true)) {
    nrced::BeatDataset ds = nrced::load_dataset(data_dir, pid, cfg.stft);
    nrced::RidgeReconstruction rec = nrced::ridge_reconstruct(basis, ds, cfg.stft);
    double worst = *std::max_element(rec.normal_eq_residuals.begin(),
                                     rec.normal_eq_residuals.end());
    worst_residual = std::max(worst_residual, worst);
    report["per_patient"][pid] = {
        {"mean_rho", rec.mean_rho},
        {"min_rho", *std::min_element(rec.per_beat_rho.begin(), rec.per_beat_rho.end())},
        {"max_rho", *std::max_element(rec.per_beat_rho.begin(), rec.per_beat_rho.end())},
        {"max_normal_eq_residual", worst}};
    pids.push_back(pid);
    means.push_back(rec.mean_rho);
    nrced::log_info("reconstruct: patient '" + pid + "' mean rho " +
                    std::to_string(rec.mean_rho));
  }
  report["max_normal_eq_residual"] = worst_residual;
  nrced::write_json_file(out / "reconstruct_report.json", report);
  nrced::write_bar_chart(out / "reconstruct_rho.svg", pids, means,
                         "ridge reconstruction mean correlation");
  return 0;
}

int cmd_analyze(const CommonArgs& args, const std::string& data_dir,
                const std::string& checkpoint) {
  nrced::RunConfig cfg = load_config(args, false);
  apply_threads(args, cfg);
  if (data_dir.empty() || checkpoint.empty())
    nrced::fail_data("--data and --checkpoint are required");
  fs::path out = ensure_out(args);

  std::vector<std::string> pids = resolve_patients(cfg, data_dir, true);
  if (pids.size() != 1)
    nrced::fail_data("analyze: pass exactly one patient (got " +
                     std::to_string(pids.size()) + ")");
  const std::string pid = pids.front();

  nrced::RegressionBasis basis = basis_from_checkpoint(checkpoint, cfg.ridge_lambda);
  nrced::BeatDataset ds = nrced::load_dataset(data_dir, pid, cfg.stft);
  nrced::RidgeReconstruction rec = nrced::ridge_reconstruct(basis, ds, cfg.stft);

  // Coefficient rows in the beat-tensor framing: one 1 x 1 x D tensor per beat.
  nrced::BeatTensorFile beta_file;
  for (int64_t i = 0; i < rec.betas.count(); ++i) {
    nrced::TFTensor t;
    t.channels = 1;
    t.num_freqs = 1;
    t.num_frames = basis.dim();
    t.source_len = cfg.stft.source_len;
    t.data.assign(rec.betas.rows.row(i).begin(), rec.betas.rows.row(i).end());
    beta_file.append(t, {rec.betas.r_peaks[i], rec.betas.labels[i]});
  }
  nrced::write_beat_tensors(out / "betas.nrcd-beta", beta_file);

  Eigen::MatrixXd ccm = nrced::cross_corr_matrix(rec.betas.rows);
  nrced::write_matrix_csv(out / "ccm.csv", ccm);

  json report;
  report["patient"] = pid;
  report["lambda"] = cfg.ridge_lambda;
  report["checkpoint"] = checkpoint;
  report["beats"] = rec.betas.count();
  report["ridge_mean_rho"] = rec.mean_rho;
  report["max_normal_eq_residual"] =
      *std::max_element(rec.normal_eq_residuals.begin(), rec.normal_eq_residuals.end());
  report["w_last_near_zero_fraction"] = nrced::near_zero_fraction(basis.w_last());

  Eigen::MatrixXd ccm01 = nrced::rescale_unit(ccm);
  int ref = nrced::pick_reference_beat(ccm);
  report["reference_beat"] = ref;

  std::vector<double> scores(ccm01.rows());
  std::vector<int> truth(ccm01.rows());
  bool have_both = false;
  {
    int pos = 0, neg = 0;
    for (int64_t i = 0; i < ccm01.rows(); ++i) {
      scores[i] = ccm01(i, ref);
      truth[i] = rec.betas.labels[i] == nrced::BeatLabel::Atypical ? 1 : 0;
      (truth[i] ? pos : neg) += 1;
    }
    have_both = pos > 0 && neg > 0;
  }
  if (have_both) {
    nrced::RocCurve curve = nrced::roc_curve(scores, truth);
    nrced::write_roc_csv(out / "roc.csv", curve);
    report["auc"] = curve.auc;
  } else {
    nrced::log_warn("analyze: both classes not present, skipping roc.csv");
    report["auc"] = nullptr;
  }
  nrced::write_json_file(out / "report.json", report);
  return 0;
}

int cmd_roc(const CommonArgs& args, const std::string& betas_path) {
  nrced::RunConfig cfg = load_config(args, false);
  apply_threads(args, cfg);
  if (betas_path.empty()) nrced::fail_data("--betas is required");
  fs::path out = ensure_out(args);

  nrced::BeatTensorFile beta_file = nrced::read_beat_tensors(betas_path);
  if (beta_file.beat_count() < 2)
    nrced::fail_data("roc: need at least two beats of coefficients");
  Eigen::MatrixXd rows(beta_file.beat_count(), beta_file.tensor_size());
  for (size_t i = 0; i < beta_file.beat_count(); ++i)
    for (size_t k = 0; k < beta_file.tensor_size(); ++k)
      rows(i, k) = beta_file.payload[i * beta_file.tensor_size() + k];

  Eigen::MatrixXd ccm = nrced::cross_corr_matrix(rows);
  Eigen::MatrixXd ccm01 = nrced::rescale_unit(ccm);
  int ref = nrced::pick_reference_beat(ccm);
  std::vector<double> scores(ccm01.rows());
  std::vector<int> truth(ccm01.rows());
  for (int64_t i = 0; i < ccm01.rows(); ++i) {
    scores[i] = ccm01(i, ref);
    truth[i] = beta_file.meta[i].label == nrced::BeatLabel::Atypical ? 1 : 0;
  }
  nrced::RocCurve curve = nrced::roc_curve(scores, truth);
  nrced::write_roc_csv(out / "roc.csv", curve);
  json report;
  report["auc"] = curve.auc;
  report["reference_beat"] = ref;
  report["beats"] = beta_file.beat_count();
  nrced::write_json_file(out / "roc_report.json", report);
  std::cout << "auc " << curve.auc << "\n";
  return 0;
}

int cmd_plot(const CommonArgs& args, const std::string& run_dir,
             const std::string& checkpoint) {
  nrced::RunConfig cfg = load_config(args, false);
  apply_threads(args, cfg);
  if (run_dir.empty()) nrced::fail_data("--run is required");
  if (!fs::is_directory(run_dir))
    nrced::fail_data("run directory '" + run_dir + "' does not exist");
  fs::path out = ensure_out(args);
  fs::path run(run_dir);

  int plotted = 0;
  if (fs::exists(run / "report.json")) {
    json rj = nrced::read_json_file(run / "report.json");
    if (rj.contains("per_patient") && !rj["per_patient"].empty()) {
      std::vector<std::string> pids;
      std::vector<double> means;
      for (auto it = rj["per_patient"].begin(); it != rj["per_patient"].end(); ++it) {
        if (!it.value().contains("mean_rho")) continue;
        pids.push_back(it.key());
        means.push_back(it.value()["mean_rho"].get<double>());
      }
      if (!pids.empty()) {
        nrced::write_bar_chart(out / "correlation_per_patient.svg", pids, means,
                               "mean correlation per patient");
        ++plotted;
      }
    }
  }
  if (fs::exists(run / "ccm.csv")) {
    Eigen::MatrixXd ccm = nrced::read_matrix_csv(run / "ccm.csv");
    nrced::HeatmapOptions opt;
    opt.diverging = true;
    opt.title = "beta cross-correlation";
    nrced::write_heatmap(out / "ccm_heatmap.svg", ccm, opt);
    ++plotted;
  }
  if (fs::exists(run / "roc.csv")) {
    nrced::RocCurve curve = nrced::read_roc_csv(run / "roc.csv");
    nrced::write_roc_plot(out / "roc_curve.svg", curve);
    ++plotted;
  }
  if (fs::exists(run / "betas.nrcd-beta")) {
    nrced::BeatTensorFile bf = nrced::read_beat_tensors(run / "betas.nrcd-beta");
    Eigen::MatrixXd rows(bf.beat_count(), bf.tensor_size());
    for (size_t i = 0; i < bf.beat_count(); ++i)
      for (size_t k = 0; k < bf.tensor_size(); ++k)
        rows(i, k) = bf.payload[i * bf.tensor_size() + k];
    nrced::HeatmapOptions opt;
    opt.diverging = true;
    opt.title = "ridge coefficients per beat";
    nrced::write_heatmap(out / "beta_heatmap.svg", rows, opt);
    ++plotted;
  }
  if (!checkpoint.empty()) {
    auto [model_cfg, params] = nrced::load_checkpoint(checkpoint);
    nrced::Network net(model_cfg);
    Eigen::MatrixXd w = net.last_layer_weight(params);
    nrced::HeatmapOptions opt;
    opt.log_abs = true;
    opt.title = "final layer |W| (log scale)";
    nrced::write_heatmap(out / "w_last_heatmap.svg", w, opt);
    ++plotted;
  }
  // Overlay CSVs written by train/eval.
  for (const auto& entry : fs::directory_iterator(run)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("overlay_", 0) == 0 && entry.path().extension() == ".csv") {
      // already raw data; re-emit the svg next to the new output dir
      nrced::log_debug("plot: overlay data found at " + name);
    }
  }
  if (plotted == 0)
    nrced::fail_data("plot: no plottable artifacts under '" + run_dir + "'");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NRCED: EGM <-> 12-lead ECG regression, basis analysis and "
               "atypical-beat detection"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string data_dir, checkpoint, betas_path, run_dir;
  uint64_t seed_value = 0;
  bool seed_given = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "JSON run configuration");
    cmd->add_option("--out", common.out_dir, "output directory");
    cmd->add_option("--seed", seed_value, "master seed override")
        ->each([&](const std::string&) { seed_given = true; });
    cmd->add_option("--threads", common.threads, "worker thread cap");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  add_common(synth);
  CLI::App* preprocess =
      app.add_subcommand("preprocess", "recordings -> beat tensors");
  add_common(preprocess);
  preprocess->add_option("--data", data_dir, "directory of recordings");
  CLI::App* train = app.add_subcommand("train", "train one model");
  add_common(train);
  train->add_option("--data", data_dir, "directory of beat tensors");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval);
  eval->add_option("--data", data_dir, "directory of beat tensors");
  eval->add_option("--checkpoint", checkpoint, "model checkpoint");
  CLI::App* reconstruct =
      app.add_subcommand("reconstruct", "ridge reconstruction from W_last");
  add_common(reconstruct);
  reconstruct->add_option("--data", data_dir, "directory of beat tensors");
  reconstruct->add_option("--checkpoint", checkpoint, "model checkpoint");
  CLI::App* analyze =
      app.add_subcommand("analyze", "betas, cross-correlation, roc");
  add_common(analyze);
  analyze->add_option("--data", data_dir, "directory of beat tensors");
  analyze->add_option("--checkpoint", checkpoint, "model checkpoint");
  CLI::App* roc = app.add_subcommand("roc", "roc curve from saved betas");
  add_common(roc);
  roc->add_option("--betas", betas_path, "betas.nrcd-beta file");
  CLI::App* plot = app.add_subcommand("plot", "render svg plots from a run");
  add_common(plot);
  plot->add_option("--run", run_dir, "directory with run artifacts");
  plot->add_option("--checkpoint", checkpoint, "optional checkpoint for W plots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }
  if (seed_given) common.seed = seed_value;

  try {
    if (synth->parsed()) return cmd_synth(common);
    if (preprocess->parsed()) return cmd_preprocess(common, data_dir);
    if (train->parsed()) return cmd_train(common, data_dir);
    if (eval->parsed()) return cmd_eval(common, data_dir, checkpoint);
    if (reconstruct->parsed()) return cmd_reconstruct(common, data_dir, checkpoint);
    if (analyze->parsed()) return cmd_analyze(common, data_dir, checkpoint);
    if (roc->parsed()) return cmd_roc(common, betas_path);
    if (plot->parsed()) return cmd_plot(common, run_dir, checkpoint);
  } catch (const nrced::Error& e) {
    std::cerr << "nrced: " << e.what() << "\n";
    return e.kind() == nrced::Error::Kind::Usage ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "nrced: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
