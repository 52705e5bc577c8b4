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
#include <random>

#include "nrced/dsp.hpp"
#include "nrced/io.hpp"
#include "nrced/synth.hpp"

using namespace nrced;
namespace fs = std::filesystem;

namespace {

// Width of the ventricular complex: span where |trace| exceeds 5% of its
// peak, in seconds.
double qrs_width_seconds(const LatentBeat& beat, int fs) {
  const Eigen::MatrixXd& tr = beat.traces;
  double peak = 0.0;
  for (int t = 0; t < tr.cols(); ++t) peak = std::max(peak, std::abs(tr(0, t)));
  const double floor = 0.05 * peak;
  int first = -1, last = -1;
  for (int t = 0; t < tr.cols(); ++t) {
    if (std::abs(tr(0, t)) > floor) {
      if (first < 0) first = t;
      last = t;
    }
  }
  return static_cast<double>(last - first + 1) / fs;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("nrced_synth_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("sinus QRS widths stay within the standard band, atypical beyond it") {
  SynthPatientConfig cfg;
  cfg.seed = 9;
  for (int b = 0; b < 40; ++b) {
    LatentBeat sinus = synth_beat(cfg, b, BeatLabel::Sinus);
    double w = qrs_width_seconds(sinus, cfg.sample_rate_hz);
    CHECK(w >= 0.08);
    CHECK(w <= 0.11);
    LatentBeat atyp = synth_beat(cfg, b, BeatLabel::Atypical);
    CHECK(qrs_width_seconds(atyp, cfg.sample_rate_hz) > 0.11);
  }
}

TEST_CASE("beats are pure functions of (seed, index, label)") {
  SynthPatientConfig cfg;
  cfg.seed = 31;
  LatentBeat a = synth_beat(cfg, 5, BeatLabel::Sinus);
  LatentBeat b = synth_beat(cfg, 5, BeatLabel::Sinus);
  CHECK(a.traces == b.traces);
  LatentBeat c = synth_beat(cfg, 6, BeatLabel::Sinus);
  CHECK(a.traces != c.traces);
  LatentBeat d = synth_beat(cfg, 5, BeatLabel::Atypical);
  CHECK(a.traces != d.traces);
}

TEST_CASE("derive_leads is deterministic and noise scales linearly") {
  SynthPatientConfig cfg;
  cfg.seed = 3;
  MixingMap map = make_mixing_map(cfg);
  LatentBeat beat = synth_beat(cfg, 0, BeatLabel::Sinus);

  Rng r1(42), r2(42), r3(42);
  auto [ecg0, egm0] = derive_leads(beat.traces, map, 0.0, r1);
  auto [ecg0b, egm0b] = derive_leads(beat.traces, map, 0.0, r2);
  CHECK(ecg0 == ecg0b);
  CHECK(egm0 == egm0b);

  // Same rng seed, doubled level: the realized noise doubles exactly, so
  // every lead's SNR halves.
  Rng ra(7), rb(7);
  auto [ecg1, egm1] = derive_leads(beat.traces, map, 0.01, ra);
  auto [ecg2, egm2] = derive_leads(beat.traces, map, 0.02, rb);
  for (int lead = 0; lead < ecg0.rows(); ++lead) {
    double n1 = (ecg1.row(lead) - ecg0.row(lead)).norm();
    double n2 = (ecg2.row(lead) - ecg0.row(lead)).norm();
    CHECK(n2 / n1 == doctest::Approx(2.0).epsilon(1e-9));
  }
}

TEST_CASE("lead sets preserve the morphology information") {
  SynthPatientConfig cfg;
  cfg.seed = 12;
  MixingMap map = make_mixing_map(cfg);
  LatentBeat sinus = synth_beat(cfg, 1, BeatLabel::Sinus);
  LatentBeat atyp = synth_beat(cfg, 1, BeatLabel::Atypical);
  Rng r0(1), r1(1);
  auto [ecg_s, egm_s] = derive_leads(sinus.traces, map, 0.0, r0);
  auto [ecg_a, egm_a] = derive_leads(atyp.traces, map, 0.0, r1);
  // A distinct latent state shows up in both lead sets.
  CHECK((ecg_s - ecg_a).norm() / ecg_s.norm() > 0.05);
  CHECK((egm_s - egm_a).norm() / egm_s.norm() > 0.05);
  // Lead II carries an upright R wave at the anchor.
  CHECK(ecg_s(1, sinus.r_offset) > 0.2);
}

TEST_CASE("generate_dataset writes the full ingestion set per patient") {
  TempDir tmp;
  std::vector<SynthPatientConfig> cohort;
  for (int p = 0; p < 3; ++p) {
    SynthPatientConfig cfg;
    cfg.patient_id = "c" + std::to_string(p);
    cfg.beats = 200;
    cfg.seed = 100 + p;
    cfg.atypical_fraction = p == 2 ? 0.1 : 0.0;
    cohort.push_back(cfg);
  }
  generate_dataset(cohort, tmp.path);

  size_t csvs = 0, manifests = 0, label_files = 0, rows = 0;
  for (const auto& e : fs::directory_iterator(tmp.path)) {
    std::string name = e.path().filename().string();
    if (name.rfind("labels_", 0) == 0) {
      ++label_files;
      rows += read_labels_csv(e.path()).size();
    } else if (e.path().extension() == ".csv") {
      ++csvs;
    } else if (e.path().extension() == ".json") {
      ++manifests;
    }
  }
  CHECK(csvs == 3);
  CHECK(manifests == 3);
  CHECK(label_files == 3);
  CHECK(rows == 600);

  // Zero atypical fraction: all sinus.
  LabelTable l0 = read_labels_csv(tmp.path / "labels_c0.csv");
  for (const LabelRow& r : l0) CHECK(r.label == BeatLabel::Sinus);
}

TEST_CASE("realized atypical fraction is exact to rounding") {
  SynthPatientConfig cfg;
  cfg.patient_id = "frac";
  cfg.beats = 600;
  cfg.atypical_fraction = 0.1;
  cfg.seed = 55;
  SynthPatient p = synth_patient(cfg);
  int atypical = 0;
  for (const LabelRow& r : p.labels) atypical += r.label == BeatLabel::Atypical;
  CHECK(std::abs(atypical / 600.0 - 0.1) <= 0.02);
  CHECK(atypical == 60);
}

TEST_CASE("same config generates bit-identical recordings") {
  SynthPatientConfig cfg;
  cfg.patient_id = "det";
  cfg.beats = 50;
  cfg.seed = 77;
  cfg.atypical_fraction = 0.2;
  SynthPatient a = synth_patient(cfg);
  SynthPatient b = synth_patient(cfg);
  CHECK(a.recording.ecg == b.recording.ecg);
  CHECK(a.recording.egm == b.recording.egm);
  REQUIRE(a.labels.size() == b.labels.size());
  for (size_t i = 0; i < a.labels.size(); ++i) {
    CHECK(a.labels[i].r_peak_index == b.labels[i].r_peak_index);
    CHECK(a.labels[i].label == b.labels[i].label);
  }
}

TEST_CASE("ground-truth R peaks survive the preprocessing pipeline") {
  SynthPatientConfig cfg;
  cfg.patient_id = "truth";
  cfg.beats = 120;
  cfg.seed = 4;
  cfg.atypical_fraction = 0.1;  // detection must survive atypical beats too
  SynthPatient patient = synth_patient(cfg);

  std::vector<double> lead2(patient.recording.num_samples());
  for (int64_t i = 0; i < patient.recording.num_samples(); ++i)
    lead2[i] = patient.recording.ecg(1, i);
  // Detection runs on the filtered lead, as in the pipeline.
  std::vector<double> filtered =
      bandpass_filter_zero_phase(lead2, cfg.sample_rate_hz);
  std::vector<int64_t> peaks = detect_r_peaks(filtered, cfg.sample_rate_hz);

  size_t recovered = 0;
  for (const LabelRow& truth : patient.labels) {
    for (int64_t p : peaks) {
      if (std::abs(p - truth.r_peak_index) <= 5) {
        ++recovered;
        break;
      }
    }
  }
  CHECK(static_cast<double>(recovered) / patient.labels.size() >= 0.99);
}
