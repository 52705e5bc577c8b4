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

// Slower optimization-quality checks, kept apart from the fast unit suite.

#include <doctest.h>

#include <random>

#include "nrced/experiment.hpp"

using namespace nrced;
using Eigen::MatrixXd;

namespace {

// Beats drawn from a low-dimensional latent space, with targets a fixed
// linear mixing of the input channels. The relationship is exactly
// representable, so a trained model should essentially nail it.
BeatDataset linear_map_dataset(int n, uint64_t seed, const STFTConfig& cfg) {
  const int rank = 3;
  const int in_leads = 2, out_leads = 2;
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);

  std::vector<MatrixXd> basis(rank, MatrixXd(in_leads, 250));
  for (MatrixXd& b : basis)
    for (int c = 0; c < in_leads; ++c)
      for (int t = 0; t < 250; ++t) b(c, t) = g(rng);
  MatrixXd mix(out_leads, in_leads);
  for (int i = 0; i < out_leads; ++i)
    for (int j = 0; j < in_leads; ++j) mix(i, j) = g(rng);

  BeatDataset ds;
  ds.patient_id = "linmap";
  ds.beats.resize(n);
  for (int i = 0; i < n; ++i) {
    MatrixXd beat = MatrixXd::Zero(in_leads, 250);
    for (const MatrixXd& b : basis) beat += g(rng) * b;
    MatrixXd target = mix * beat;
    ds.beats[i].egm = tf_forward(beat, cfg);
    ds.beats[i].ecg = tf_forward(target, cfg);
    ds.beats[i].r_peak_index = 500 + 900 * static_cast<uint64_t>(i);
    ds.beats[i].label = BeatLabel::Sinus;
  }
  return ds;
}

}  // namespace

TEST_CASE("an exactly learnable linear map trains to correlation 0.99") {
  STFTConfig cfg = make_stft_config();
  BeatDataset ds = linear_map_dataset(240, 17, cfg);

  ExperimentSpec spec;
  spec.patients = {"linmap"};
  spec.epochs = 120;
  spec.early_stop_patience = 120;  // run the full budget
  spec.seed = 23;

  ModelConfig mc;
  mc.conv_channel_widths = {8, 12};
  mc.enc_fc_widths = {64};
  mc.dec_fc_widths = {64};
  mc.bottleneck_dim = 32;
  mc.dropout_rate = 0.0;
  mc.learning_rate = 3e-3;
  mc.batch_size = 16;

  TrainResult tr = train(spec, mc, ds, cfg);
  Network net(tr.resolved_config);
  EvalResult res = evaluate_time_domain(net, tr.params, spec, ds, cfg);
  CHECK(res.mean_rho >= 0.99);
  CHECK(tr.log.epoch_loss.back() <= tr.log.epoch_loss.front());
}
