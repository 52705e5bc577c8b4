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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "nrced/experiment.hpp"

using namespace nrced;
using Eigen::MatrixXd;
namespace fs = std::filesystem;

namespace {

MatrixXd randn(int r, int c, uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = g(rng);
  return m;
}

BeatDataset random_dataset(int n, int egm_leads, int ecg_leads, uint64_t seed,
                           const STFTConfig& cfg) {
  BeatDataset ds;
  ds.patient_id = "rnd";
  ds.beats.resize(n);
  for (int i = 0; i < n; ++i) {
    ds.beats[i].egm = tf_forward(randn(egm_leads, 250, seed + 2 * i), cfg);
    ds.beats[i].ecg = tf_forward(randn(ecg_leads, 250, seed + 2 * i + 1), cfg);
    ds.beats[i].r_peak_index = 500 + 900 * static_cast<uint64_t>(i);
    ds.beats[i].label = i % 7 == 0 ? BeatLabel::Atypical : BeatLabel::Sinus;
  }
  return ds;
}

ModelConfig small_model() {
  ModelConfig cfg;
  cfg.conv_channel_widths = {4, 6};
  cfg.enc_fc_widths = {16};
  cfg.dec_fc_widths = {16};
  cfg.bottleneck_dim = 8;
  cfg.dropout_rate = 0.05;
  cfg.batch_size = 8;
  return cfg;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("nrced_exp_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("split sizes, determinism and exhaustiveness") {
  STFTConfig cfg = make_stft_config();
  BeatDataset ds100 = random_dataset(100, 2, 3, 1, cfg);
  auto [tr, te] = split_dataset(ds100, 0.5, 9);
  CHECK(tr.size() == 50);
  CHECK(te.size() == 50);

  BeatDataset ds3 = random_dataset(3, 2, 3, 2, cfg);
  auto [tr3, te3] = split_dataset(ds3, 0.5, 9);
  CHECK(tr3.size() == 2);
  CHECK(te3.size() == 1);
  std::multiset<uint64_t> all;
  for (const BeatEntry& e : tr3.beats) all.insert(e.r_peak_index);
  for (const BeatEntry& e : te3.beats) all.insert(e.r_peak_index);
  std::multiset<uint64_t> want;
  for (const BeatEntry& e : ds3.beats) want.insert(e.r_peak_index);
  CHECK(all == want);

  auto [tra, tea] = split_dataset(ds100, 0.5, 31);
  auto [trb, teb] = split_dataset(ds100, 0.5, 31);
  REQUIRE(tra.size() == trb.size());
  for (size_t i = 0; i < tra.size(); ++i)
    CHECK(tra.beats[i].r_peak_index == trb.beats[i].r_peak_index);

  // Disjointness: no r_peak appears in both halves (all peaks distinct here).
  std::set<uint64_t> train_peaks;
  for (const BeatEntry& e : tra.beats) train_peaks.insert(e.r_peak_index);
  for (const BeatEntry& e : tea.beats) CHECK(!train_peaks.count(e.r_peak_index));

  // Both halves preserve temporal order.
  for (size_t i = 1; i < tra.beats.size(); ++i)
    CHECK(tra.beats[i].r_peak_index > tra.beats[i - 1].r_peak_index);
}

TEST_CASE("dataset files round-trip through the beat-tensor format") {
  TempDir tmp;
  STFTConfig cfg = make_stft_config();
  BeatDataset ds = random_dataset(9, 5, 12, 3, cfg);
  ds.patient_id = "io";
  save_dataset(tmp.path, ds);
  BeatDataset back = load_dataset(tmp.path, "io", cfg);
  REQUIRE(back.size() == ds.size());
  CHECK(back.egm_channels() == 10);
  CHECK(back.ecg_channels() == 24);
  for (size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.beats[i].r_peak_index == ds.beats[i].r_peak_index);
    CHECK(back.beats[i].label == ds.beats[i].label);
    // Storage is float32: values match at float precision.
    for (size_t k = 0; k < ds.beats[i].ecg.data.size(); ++k)
      CHECK(back.beats[i].ecg.data[k] ==
            static_cast<double>(static_cast<float>(ds.beats[i].ecg.data[k])));
  }
  // Saving the loaded dataset reproduces identical bytes.
  TempDir tmp2;
  back.patient_id = "io";
  save_dataset(tmp2.path, back);
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };
  CHECK(bytes(tmp.path / "io.ecg.nrcd") == bytes(tmp2.path / "io.ecg.nrcd"));
}

TEST_CASE("input masking: single-lead keeps one real/imag plane pair") {
  STFTConfig cfg = make_stft_config();
  BeatDataset ds = random_dataset(4, 5, 12, 5, cfg);
  ExperimentSpec spec;
  spec.patients = {"rnd"};
  spec.mode = ExperimentMode::SingleLead;
  spec.single_lead_channel = 2;
  MatrixXd x = input_matrix(ds, spec);
  CHECK(x.rows() == 2 * 16 * 16);
  // Plane 0 of the masked input equals plane 2 of the full tensor; plane 1
  // equals plane 7 (its imaginary partner).
  const int plane = 16 * 16;
  for (int i = 0; i < plane; i += 37) {
    CHECK(x(i, 0) == ds.beats[0].egm.data[2 * plane + i]);
    CHECK(x(plane + i, 0) == ds.beats[0].egm.data[7 * plane + i]);
  }

  spec.single_lead_channel = 5;
  CHECK_THROWS_AS((void)input_matrix(ds, spec), Error);
}

TEST_CASE("reverse mode swaps the input and output roles") {
  STFTConfig cfg = make_stft_config();
  BeatDataset ds = random_dataset(12, 5, 12, 6, cfg);
  ExperimentSpec spec;
  spec.patients = {"rnd"};
  spec.mode = ExperimentMode::Reverse;
  spec.epochs = 1;
  spec.seed = 4;
  ModelConfig mc = small_model();
  mc.bottleneck_dim = 8;
  TrainResult tr = train(spec, mc, ds, cfg);
  CHECK(tr.resolved_config.in_channels == 24);
  CHECK(tr.resolved_config.out_channels == 10);
  Network net(tr.resolved_config);
  MatrixXd x = input_matrix(ds, spec);
  ForwardTrace t = net.forward(tr.params, x.leftCols(2), Mode::Eval);
  CHECK(t.output.rows() == 10 * 16 * 16);
}

TEST_CASE("zero-epoch training returns the untouched initialization") {
  STFTConfig cfg = make_stft_config();
  BeatDataset ds = random_dataset(10, 2, 3, 7, cfg);
  ExperimentSpec spec;
  spec.patients = {"rnd"};
  spec.epochs = 0;
  spec.seed = 11;
  ModelConfig mc = small_model();
  TrainResult tr = train(spec, mc, ds, cfg);
  CHECK(tr.log.epoch_loss.empty());
  Network net(tr.resolved_config);
  ModelParams init = net.init_params(derive_seed(spec.seed, 13 + mc.seed));
  CHECK(net.params_to_payload(tr.params) == net.params_to_payload(init));
}

TEST_CASE("training twice with one seed gives identical logs and params") {
  STFTConfig cfg = make_stft_config();
  BeatDataset ds = random_dataset(24, 2, 3, 8, cfg);
  ExperimentSpec spec;
  spec.patients = {"rnd"};
  spec.epochs = 3;
  spec.seed = 21;
  ModelConfig mc = small_model();
  TrainResult a = train(spec, mc, ds, cfg);
  TrainResult b = train(spec, mc, ds, cfg);
  CHECK(a.log.epoch_loss == b.log.epoch_loss);
  Network net(a.resolved_config);
  CHECK(net.params_to_payload(a.params) == net.params_to_payload(b.params));
  // Endpoint improvement.
  CHECK(a.log.epoch_loss.back() <= a.log.epoch_loss.front());
}

TEST_CASE("non-finite data aborts training with a diagnostic") {
  STFTConfig cfg = make_stft_config();
  BeatDataset ds = random_dataset(8, 2, 3, 9, cfg);
  ds.beats[3].egm.data[100] = std::nan("");
  ExperimentSpec spec;
  spec.patients = {"rnd"};
  spec.epochs = 2;
  spec.seed = 2;
  ModelConfig mc = small_model();
  CHECK_THROWS_WITH_AS((void)train(spec, mc, ds, cfg),
                       doctest::Contains("diverged"), Error);
}

TEST_CASE("scoring targets against themselves gives correlation one") {
  STFTConfig cfg = make_stft_config();
  BeatDataset ds = random_dataset(6, 2, 3, 10, cfg);
  ExperimentSpec spec;
  spec.patients = {"rnd"};
  MatrixXd y = target_matrix(ds, spec);
  EvalResult res = score_time_domain(y, y, cfg);
  CHECK(res.mean_rho == doctest::Approx(1.0));
  CHECK(res.min_rho == doctest::Approx(1.0));
  for (double lead : res.per_lead_rho) CHECK(lead == doctest::Approx(1.0));
}

TEST_CASE("evaluation leaves parameters bit-identical") {
  STFTConfig cfg = make_stft_config();
  BeatDataset ds = random_dataset(16, 2, 3, 11, cfg);
  ExperimentSpec spec;
  spec.patients = {"rnd"};
  spec.epochs = 2;
  spec.seed = 5;
  ModelConfig mc = small_model();
  TrainResult tr = train(spec, mc, ds, cfg);
  Network net(tr.resolved_config);
  std::vector<float> before = net.params_to_payload(tr.params);
  (void)evaluate_time_domain(net, tr.params, spec, ds, cfg);
  CHECK(net.params_to_payload(tr.params) == before);
}

TEST_CASE("metrics reports serialize losslessly") {
  MetricsReport r;
  ExperimentSpec spec;
  spec.patients = {"a", "b"};
  spec.seed = 3;
  r.spec = spec.to_json();
  r.per_patient["a"] = {0.912345678901234, -0.25, 0.999,
                        {0.9, 0.8, 0.7000000001}};
  r.per_patient["b"] = {0.5, 0.1, 0.9, {1.0 / 3.0}};
  r.training_log["a"] = {-0.1, -0.5, -0.75};
  nlohmann::json j = r.to_json();
  MetricsReport back = MetricsReport::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.per_patient["a"].per_lead_rho[2] == 0.7000000001);
  // Through text as well.
  MetricsReport textual =
      MetricsReport::from_json(nlohmann::json::parse(j.dump()));
  CHECK(textual.to_json() == j);
}

TEST_CASE("spec json rejects unknown keys") {
  nlohmann::json j = {{"mode", "reverse"}, {"bogus", 1}};
  CHECK_THROWS_AS((void)ExperimentSpec::from_json(j), Error);
}
