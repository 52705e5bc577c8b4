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

#include <cmath>
#include <numbers>
#include <random>

#include "nrced/dsp.hpp"
#include "nrced/synth.hpp"
#include "oracles.hpp"

using namespace nrced;

namespace {

std::vector<double> sinusoid(double f_hz, double fs, double seconds,
                             double amp = 1.0) {
  const int n = static_cast<int>(seconds * fs);
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i)
    x[i] = amp * std::sin(2.0 * std::numbers::pi * f_hz * i / fs);
  return x;
}

// Signal of Gaussian bumps at the given sample positions.
std::vector<double> bump_train(int length, const std::vector<int64_t>& centers,
                               double sigma_samples,
                               const std::vector<double>& amps = {}) {
  std::vector<double> x(length, 0.0);
  for (size_t b = 0; b < centers.size(); ++b) {
    double amp = b < amps.size() ? amps[b] : 1.0;
    for (int64_t i = std::max<int64_t>(0, centers[b] - 6 * sigma_samples);
         i < std::min<int64_t>(length, centers[b] + 6 * sigma_samples); ++i) {
      double d = static_cast<double>(i - centers[b]);
      x[i] += amp * std::exp(-d * d / (2.0 * sigma_samples * sigma_samples));
    }
  }
  return x;
}

}  // namespace

TEST_CASE("passband tone passes nearly unattenuated") {
  auto x = sinusoid(25.0, 1000.0, 4.0);
  auto y = bandpass_filter_zero_phase(x, 1000);
  // Amplitude measured by the frequency-response oracle away from the edges.
  double in_amp = oracles::tone_amplitude(x, 25.0, 1000.0, 500, 3500);
  double out_amp = oracles::tone_amplitude(y, 25.0, 1000.0, 500, 3500);
  CHECK(out_amp / in_amp >= 0.9);
  CHECK(out_amp / in_amp <= 1.0 + 1e-6);
}

TEST_CASE("constant input is rejected by the 3 Hz corner") {
  std::vector<double> x(2000, 5.0);
  auto y = bandpass_filter_zero_phase(x, 1000);
  double worst = 0.0;
  for (size_t i = 200; i + 200 < y.size(); ++i)
    worst = std::max(worst, std::abs(y[i]));
  CHECK(worst < 5e-3);
}

TEST_CASE("band edges attenuate to about half power squared") {
  // Forward-backward filtering squares the magnitude response, so the
  // single-pass 1/sqrt(2) corners land near 0.5.
  for (double f : {3.0, 50.0}) {
    auto x = sinusoid(f, 1000.0, 8.0);
    auto y = bandpass_filter_zero_phase(x, 1000);
    double ratio = oracles::tone_amplitude(y, f, 1000.0, 2000, 6000) /
                   oracles::tone_amplitude(x, f, 1000.0, 2000, 6000);
    CHECK(ratio > 0.35);
    CHECK(ratio < 0.65);
  }
}

TEST_CASE("zero-phase property: cross-correlation peaks at lag 0") {
  auto x = sinusoid(10.0, 1000.0, 2.0);
  auto y = bandpass_filter_zero_phase(x, 1000);
  CHECK(oracles::xcorr_argmax_lag(x, y, 40) == 0);
  // Same holds for other passband tones.
  for (double f : {6.0, 20.0, 35.0}) {
    auto a = sinusoid(f, 1000.0, 2.0);
    auto b = bandpass_filter_zero_phase(a, 1000);
    CHECK(oracles::xcorr_argmax_lag(a, b, 40) == 0);
  }
}

TEST_CASE("filter rejects bad input") {
  std::vector<double> tiny(20, 1.0);
  CHECK_THROWS_AS((void)bandpass_filter_zero_phase(tiny, 1000), Error);
  std::vector<double> with_nan(500, 0.0);
  with_nan[123] = std::nan("");
  CHECK_THROWS_AS((void)bandpass_filter_zero_phase(with_nan, 1000), Error);
  std::vector<double> ok(500, 0.0);
  CHECK_THROWS_AS((void)bandpass_filter_zero_phase(ok, 100), Error);
}

TEST_CASE("r-peak detection recovers planted bumps") {
  std::vector<int64_t> planted;
  for (int b = 0; b < 10; ++b) planted.push_back(500 + 1000 * b);
  auto x = bump_train(11000, planted, 10.0);  // sigma = 10 ms at 1000 Hz
  auto peaks = detect_r_peaks(x, 1000);
  REQUIRE(peaks.size() == 10);
  for (int b = 0; b < 10; ++b) CHECK(std::abs(peaks[b] - planted[b]) <= 2);
}

TEST_CASE("flatline yields no peaks") {
  std::vector<double> x(5000, 0.0);
  CHECK(detect_r_peaks(x, 1000).empty());
}

TEST_CASE("refractory distance keeps the taller of two close bumps") {
  auto x = bump_train(3000, {1000, 1150}, 10.0, {0.8, 1.0});
  PeakConfig cfg;
  cfg.refractory_ms = 400.0;
  auto peaks = detect_r_peaks(x, 1000, cfg);
  REQUIRE(peaks.size() == 1);
  CHECK(std::abs(peaks[0] - 1150) <= 2);
}

TEST_CASE("peak list is strictly increasing with gaps >= refractory") {
  Rng rng(99);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<int64_t> planted;
  for (int b = 0; b < 12; ++b) planted.push_back(400 + 700 * b + (b % 3) * 45);
  auto x = bump_train(10000, planted, 9.0);
  for (auto& v : x) v += g(rng);
  PeakConfig cfg;
  auto peaks = detect_r_peaks(x, 1000, cfg);
  const int64_t min_dist = 400;
  for (size_t i = 1; i < peaks.size(); ++i) {
    CHECK(peaks[i] > peaks[i - 1]);
    CHECK(peaks[i] - peaks[i - 1] >= min_dist);
  }
  // Each reported index is a local maximum.
  for (int64_t p : peaks) {
    CHECK(x[p] >= x[p - 1]);
    CHECK(x[p] >= x[p + 1]);
  }
}

namespace {

Recording ramp_recording(int64_t length) {
  Recording rec;
  rec.patient_id = "ramp";
  rec.sample_rate_hz = 1000;
  rec.ecg.resize(kEcgLeads, length);
  rec.egm.resize(kEgmLeads, length);
  for (int c = 0; c < kEcgLeads; ++c)
    for (int64_t i = 0; i < length; ++i) rec.ecg(c, i) = c * 1e4 + i;
  for (int c = 0; c < kEgmLeads; ++c)
    for (int64_t i = 0; i < length; ++i) rec.egm(c, i) = -(c * 1e4 + i);
  return rec;
}

}  // namespace

TEST_CASE("segmentation cuts the identical half-open window on both sides") {
  Recording rec = ramp_recording(5000);
  size_t dropped = 0;
  auto pairs = segment_beats(rec, {100, 1000, 4800}, 250, &dropped);
  CHECK(dropped == 2);  // 100 lacks left context, 4800 right context
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].ecg.r_peak_index == 1000);
  CHECK(pairs[0].ecg.num_samples() == 500);
  // Window [750, 1250): ramp values identify the exact source samples.
  CHECK(pairs[0].ecg.channels(0, 0) == 750.0);
  CHECK(pairs[0].ecg.channels(0, 499) == 1249.0);
  CHECK(pairs[0].egm.channels(0, 0) == -750.0);
  CHECK(pairs[0].egm.channels(0, 499) == -1249.0);
}

TEST_CASE("segmentation emits aligned pairs for interior peaks") {
  Recording rec = ramp_recording(20000);
  std::vector<int64_t> peaks;
  for (int b = 0; b < 10; ++b) peaks.push_back(1000 + 1500 * b);
  size_t dropped = 0;
  auto pairs = segment_beats(rec, peaks, 250, &dropped);
  CHECK(dropped == 0);
  REQUIRE(pairs.size() == 10);
  for (size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].egm.r_peak_index == pairs[i].ecg.r_peak_index);
    CHECK(pairs[i].ecg.r_peak_index == peaks[i]);
    // Identical sample interval on both lead sets.
    CHECK(pairs[i].ecg.channels(0, 0) == static_cast<double>(peaks[i] - 250));
    CHECK(pairs[i].egm.channels(0, 0) == -static_cast<double>(peaks[i] - 250));
  }
}

TEST_CASE("downsampling keeps every second sample") {
  Beat beat;
  beat.channels.resize(1, 4);
  beat.channels << 1.0, 2.0, 3.0, 4.0;
  beat.sample_rate_hz = 1000;
  Beat half = downsample_by_two(beat);
  CHECK(half.num_samples() == 2);
  CHECK(half.channels(0, 0) == 1.0);
  CHECK(half.channels(0, 1) == 3.0);
  CHECK(half.sample_rate_hz == 500);

  Beat b500;
  b500.channels = Eigen::MatrixXd::Random(3, 500);
  CHECK(downsample_by_two(b500).num_samples() == 250);

  Beat odd;
  odd.channels = Eigen::MatrixXd::Random(1, 499);
  CHECK_THROWS_AS((void)downsample_by_two(odd), Error);
}

TEST_CASE("decimating a sub-Nyquist tone preserves it exactly") {
  Beat beat;
  beat.channels.resize(1, 500);
  for (int i = 0; i < 500; ++i)
    beat.channels(0, i) = std::sin(2.0 * std::numbers::pi * 48.0 * i / 1000.0);
  beat.sample_rate_hz = 1000;
  Beat half = downsample_by_two(beat);
  for (int i = 0; i < 250; ++i) {
    double want = std::sin(2.0 * std::numbers::pi * 48.0 * i / 500.0);
    CHECK(half.channels(0, i) == doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("center_normalize: constants to zero, two-sample case exact") {
  Beat flat;
  flat.channels = Eigen::MatrixXd::Constant(1, 4, 1.0);
  Beat z = center_normalize(flat);
  for (int i = 0; i < 4; ++i) CHECK(z.channels(0, i) == 0.0);

  Beat two;
  two.channels.resize(1, 2);
  two.channels << 0.0, 2.0;
  Beat n = center_normalize(two);
  CHECK(n.channels(0, 0) == doctest::Approx(-1.0 / std::sqrt(2.0)));
  CHECK(n.channels(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("center_normalize: random channels, idempotence") {
  Beat beat;
  beat.channels = Eigen::MatrixXd::Random(4, 250);
  Beat n1 = center_normalize(beat);
  for (int c = 0; c < 4; ++c) {
    CHECK(std::abs(n1.channels.row(c).mean()) < 1e-9);
    CHECK(n1.channels.row(c).norm() == doctest::Approx(1.0).epsilon(1e-9));
  }
  Beat n2 = center_normalize(n1);
  CHECK((n2.channels - n1.channels).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("preprocess_recording: synthetic patient end to end") {
  SynthPatientConfig cfg;
  cfg.patient_id = "pp60";
  cfg.beats = 60;
  cfg.seed = 21;
  cfg.noise_level = 0.01;
  SynthPatient patient = synth_patient(cfg);

  BeatPairSet set = preprocess_recording(patient.recording, {}, &patient.labels);
  CHECK(set.pairs.size() == 60);
  for (const BeatPair& p : set.pairs) {
    CHECK(p.ecg.num_samples() == 250);
    CHECK(p.egm.num_samples() == 250);
    CHECK(p.ecg.sample_rate_hz == 500);
  }
  // Ordered by R peak.
  for (size_t i = 1; i < set.pairs.size(); ++i)
    CHECK(set.pairs[i].ecg.r_peak_index > set.pairs[i - 1].ecg.r_peak_index);

  // Deterministic: run twice, compare bit for bit.
  BeatPairSet again = preprocess_recording(patient.recording, {}, &patient.labels);
  REQUIRE(again.pairs.size() == set.pairs.size());
  for (size_t i = 0; i < set.pairs.size(); ++i) {
    CHECK(again.pairs[i].ecg.channels == set.pairs[i].ecg.channels);
    CHECK(again.pairs[i].egm.channels == set.pairs[i].egm.channels);
    CHECK(again.labels[i] == set.labels[i]);
  }
}

TEST_CASE("preprocess_recording drops an edge beat") {
  // Beats at a physiologic 780 ms spacing (the refractory windows of
  // adjacent beats then cover every gap position); the first beat sits too
  // close to the start and must vanish.
  const int64_t L = 5080;
  std::vector<int64_t> centers = {100, 880, 1660, 2440, 3220, 4000, 4780};
  Recording rec;
  rec.patient_id = "edge";
  rec.sample_rate_hz = 1000;
  rec.ecg.resize(kEcgLeads, L);
  rec.egm.resize(kEgmLeads, L);
  auto bumps = bump_train(L, centers, 10.0);
  Rng rng(12);
  std::normal_distribution<double> g(0.0, 0.01);
  for (int c = 0; c < kEcgLeads; ++c)
    for (int64_t i = 0; i < L; ++i) rec.ecg(c, i) = bumps[i] + g(rng);
  for (int c = 0; c < kEgmLeads; ++c)
    for (int64_t i = 0; i < L; ++i) rec.egm(c, i) = bumps[i] * 0.5 + g(rng);

  BeatPairSet set = preprocess_recording(rec);
  CHECK(set.dropped >= 1);
  for (const BeatPair& p : set.pairs) CHECK(p.ecg.r_peak_index != 100);
  REQUIRE(set.pairs.size() == centers.size() - 1);
  for (size_t b = 0; b < set.pairs.size(); ++b)
    CHECK(std::abs(set.pairs[b].ecg.r_peak_index - centers[b + 1]) <= 2);
}

TEST_CASE("preprocess_recording fails cleanly with no usable beats") {
  Recording rec;
  rec.patient_id = "silent";
  rec.sample_rate_hz = 1000;
  rec.ecg = Eigen::MatrixXd::Zero(kEcgLeads, 2000);
  rec.egm = Eigen::MatrixXd::Zero(kEgmLeads, 2000);
  CHECK_THROWS_AS((void)preprocess_recording(rec), Error);
}
