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

#include "nrced/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "nrced/io.hpp"

namespace nrced {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

constexpr double kBeatSpanSeconds = 0.35;  // latent trace extent around R

struct Wave {
  double amp;
  double center_s;
  double sigma_s;
};

void add_wave(MatrixXd& traces, int row, const Wave& w, int fs, int r_offset) {
  const double denom = 2.0 * w.sigma_s * w.sigma_s;
  // Only touch samples within 5 sigma of the bump center.
  int lo = std::max<int>(0, r_offset + static_cast<int>((w.center_s - 5 * w.sigma_s) * fs));
  int hi = std::min<int>(static_cast<int>(traces.cols()) - 1,
                         r_offset + static_cast<int>((w.center_s + 5 * w.sigma_s) * fs) + 1);
  for (int t = lo; t <= hi; ++t) {
    double dt = static_cast<double>(t - r_offset) / fs - w.center_s;
    traces(row, t) += w.amp * std::exp(-dt * dt / denom);
  }
}

double jittered(Rng& rng, double base, double rel) {
  std::uniform_real_distribution<double> u(-rel, rel);
  return base * (1.0 + u(rng));
}

double shifted(Rng& rng, double base, double abs_jitter) {
  std::uniform_real_distribution<double> u(-abs_jitter, abs_jitter);
  return base + u(rng);
}

}  // namespace

void SynthPatientConfig::validate() const {
  if (patient_id.empty()) fail_data("synth config: patient_id must be set");
  if (beats < 1) fail_data("synth config: need at least one beat");
  if (heart_rate_bpm < 30.0 || heart_rate_bpm > 180.0)
    fail_data("synth config: heart rate out of range");
  if (latent_dim < 3 || latent_dim > 5)
    fail_data("synth config: latent_dim must lie in [3, 5]");
  if (atypical_fraction < 0.0 || atypical_fraction >= 1.0)
    fail_data("synth config: atypical fraction must lie in [0, 1)");
  if (noise_level < 0.0) fail_data("synth config: noise level must be >= 0");
  if (sample_rate_hz < 500) fail_data("synth config: sample rate too low");
}

json SynthPatientConfig::to_json() const {
  json j;
  j["patient_id"] = patient_id;
  j["beats"] = beats;
  j["heart_rate_bpm"] = heart_rate_bpm;
  j["heart_rate_jitter"] = heart_rate_jitter;
  j["latent_dim"] = latent_dim;
  j["atypical_fraction"] = atypical_fraction;
  j["noise_level"] = noise_level;
  j["seed"] = seed;
  j["sample_rate_hz"] = sample_rate_hz;
  j["amp_jitter"] = amp_jitter;
  j["time_jitter_s"] = time_jitter_s;
  j["width_jitter"] = width_jitter;
  j["mixing_seed"] = mixing_seed;
  j["mixing_jitter"] = mixing_jitter;
  return j;
}

SynthPatientConfig SynthPatientConfig::from_json(const json& j) {
  SynthPatientConfig c;
  static const char* keys[] = {"patient_id", "beats", "heart_rate_bpm",
                               "heart_rate_jitter", "latent_dim",
                               "atypical_fraction", "noise_level", "seed",
                               "sample_rate_hz", "amp_jitter", "time_jitter_s",
                               "width_jitter", "mixing_seed", "mixing_jitter"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) fail_data("synth config: unknown key '" + it.key() + "'");
  }
  if (j.contains("patient_id")) c.patient_id = j["patient_id"].get<std::string>();
  if (j.contains("beats")) c.beats = j["beats"].get<int>();
  if (j.contains("heart_rate_bpm")) c.heart_rate_bpm = j["heart_rate_bpm"].get<double>();
  if (j.contains("heart_rate_jitter"))
    c.heart_rate_jitter = j["heart_rate_jitter"].get<double>();
  if (j.contains("latent_dim")) c.latent_dim = j["latent_dim"].get<int>();
  if (j.contains("atypical_fraction"))
    c.atypical_fraction = j["atypical_fraction"].get<double>();
  if (j.contains("noise_level")) c.noise_level = j["noise_level"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
  if (j.contains("sample_rate_hz")) c.sample_rate_hz = j["sample_rate_hz"].get<int>();
  if (j.contains("amp_jitter")) c.amp_jitter = j["amp_jitter"].get<double>();
  if (j.contains("time_jitter_s")) c.time_jitter_s = j["time_jitter_s"].get<double>();
  if (j.contains("width_jitter")) c.width_jitter = j["width_jitter"].get<double>();
  if (j.contains("mixing_seed")) c.mixing_seed = j["mixing_seed"].get<uint64_t>();
  if (j.contains("mixing_jitter")) c.mixing_jitter = j["mixing_jitter"].get<double>();
  c.validate();
  return c;
}

LatentBeat synth_beat(const SynthPatientConfig& cfg, int beat_index,
                      BeatLabel label) {
  cfg.validate();
  if (label == BeatLabel::Unlabeled)
    fail_data("synth_beat: label must be sinus or atypical");
  const bool atypical = label == BeatLabel::Atypical;
  const int fs = cfg.sample_rate_hz;
  const int half = static_cast<int>(kBeatSpanSeconds * fs);
  const int len = 2 * half + 1;

  Rng rng(derive_seed(derive_seed(cfg.seed, 1000 + static_cast<uint64_t>(beat_index)),
                      atypical ? 1 : 0));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  // Beat-level variation: one global scale, one amplitude factor per source,
  // small timing and width perturbations per wave.
  const double global_amp = 1.0 + 0.5 * cfg.amp_jitter * unit(rng);
  VectorXd src_amp(5);
  for (int i = 0; i < 5; ++i) src_amp[i] = 1.0 + cfg.amp_jitter * unit(rng);
  // The QRS waves stay close to the R anchor; P and T move more freely.
  const double qrs_tj = cfg.time_jitter_s / 3.0;

  LatentBeat beat;
  beat.traces = MatrixXd::Zero(cfg.latent_dim, len);
  beat.r_offset = half;

  // Source 0: ventricular (Q, R, S).
  {
    const double widen = atypical ? 2.2 : 1.0;
    const double qs_center = atypical ? 0.045 : 0.030;
    const double flip = atypical ? -1.0 : 1.0;
    double a = global_amp * src_amp[0];
    Wave q{flip * -0.25 * a * (1 + cfg.amp_jitter * unit(rng)),
           shifted(rng, -qs_center, qrs_tj),
           jittered(rng, 0.0085 * widen, cfg.width_jitter)};
    Wave r{(atypical ? 1.15 : 1.0) * a,
           shifted(rng, 0.0, qrs_tj / 2.0),
           jittered(rng, 0.011 * widen, cfg.width_jitter)};
    Wave s{flip * -0.30 * a * (1 + cfg.amp_jitter * unit(rng)),
           shifted(rng, qs_center, qrs_tj),
           jittered(rng, 0.0085 * widen, cfg.width_jitter)};
    add_wave(beat.traces, 0, q, fs, half);
    add_wave(beat.traces, 0, r, fs, half);
    add_wave(beat.traces, 0, s, fs, half);
  }
  // Source 1: atrial (P), suppressed on atypical beats.
  {
    double a = global_amp * src_amp[1] * (atypical ? 0.05 : 1.0);
    Wave p{0.55 * a, shifted(rng, -0.165, cfg.time_jitter_s),
           jittered(rng, 0.022, cfg.width_jitter)};
    add_wave(beat.traces, 1, p, fs, half);
  }
  // Source 2: repolarization (T), inverted and delayed on atypical beats.
  {
    double a = global_amp * src_amp[2];
    Wave t{atypical ? -0.55 * a : 0.50 * a,
           shifted(rng, atypical ? 0.200 : 0.185, cfg.time_jitter_s),
           jittered(rng, atypical ? 0.045 : 0.038, cfg.width_jitter)};
    add_wave(beat.traces, 2, t, fs, half);
  }
  // Remaining sources: auxiliary bump mixtures for morphology diversity.
  for (int srcidx = 3; srcidx < cfg.latent_dim; ++srcidx) {
    double a = global_amp * src_amp[srcidx];
    double flip = atypical ? -1.0 : 1.0;
    Wave b1{flip * 0.20 * a, shifted(rng, -0.095 + 0.02 * (srcidx - 3), cfg.time_jitter_s),
            jittered(rng, 0.028, cfg.width_jitter)};
    Wave b2{-0.17 * a, shifted(rng, 0.105 + 0.02 * (srcidx - 3), cfg.time_jitter_s),
            jittered(rng, 0.024, cfg.width_jitter)};
    add_wave(beat.traces, srcidx, b1, fs, half);
    add_wave(beat.traces, srcidx, b2, fs, half);
  }
  return beat;
}

MixingMap make_mixing_map(const SynthPatientConfig& cfg) {
  const uint64_t base_seed = cfg.mixing_seed ? cfg.mixing_seed : cfg.seed;
  Rng rng(derive_seed(base_seed, 5));
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  std::uniform_real_distribution<double> pos(0.0, 1.0);

  MixingMap map;
  map.ecg_mix.resize(kEcgLeads, cfg.latent_dim);
  for (int i = 0; i < kEcgLeads; ++i)
    for (int j = 0; j < cfg.latent_dim; ++j) map.ecg_mix(i, j) = u(rng);
  // Lead II carries a dominant upright ventricular deflection; it anchors
  // R-peak detection.
  map.ecg_mix(1, 0) = 0.9 + 0.3 * pos(rng);
  // Give every lead a visible ventricular component of consistent-enough
  // magnitude that beats are recognizable on all channels.
  for (int i = 0; i < kEcgLeads; ++i) {
    if (std::abs(map.ecg_mix(i, 0)) < 0.25)
      map.ecg_mix(i, 0) = map.ecg_mix(i, 0) < 0 ? -0.25 : 0.25;
  }

  map.egm_mix.resize(kEgmLeads, cfg.latent_dim);
  for (int i = 0; i < kEgmLeads; ++i)
    for (int j = 0; j < cfg.latent_dim; ++j) map.egm_mix(i, j) = u(rng);
  // The first EGM channel predominantly senses the atrial source.
  map.egm_mix(0, 1) = 1.0 + 0.3 * pos(rng);
  map.egm_mix(0, 0) = 0.35 * map.egm_mix(0, 0);

  map.ecg_gain.resize(kEcgLeads);
  for (int i = 0; i < kEcgLeads; ++i) map.ecg_gain[i] = 0.9 + 0.6 * pos(rng);
  map.egm_gain.resize(kEgmLeads);
  for (int i = 0; i < kEgmLeads; ++i) map.egm_gain[i] = 1.2 + 0.8 * pos(rng);
  return map;
}

std::pair<MatrixXd, MatrixXd> derive_leads(const MatrixXd& latent,
                                           const MixingMap& map,
                                           double noise_level, Rng& noise_rng) {
  const int64_t L = latent.cols();
  if (latent.rows() != map.ecg_mix.cols())
    fail_data("derive_leads: latent dimension does not match the mixing map");

  // EGM leads mix sharpened traces: a scaled central difference that turns
  // the smooth bumps into spiky biphasic deflections.
  MatrixXd sharp = MatrixXd::Zero(latent.rows(), L);
  const double dscale = 12.0;  // ~ d/dt in units of 12 ms
  for (int64_t t = 1; t + 1 < L; ++t)
    sharp.col(t) = dscale * 0.5 * (latent.col(t + 1) - latent.col(t - 1));

  MatrixXd ecg = (map.ecg_mix * latent);
  MatrixXd egm = (map.egm_mix * sharp);
  for (int i = 0; i < ecg.rows(); ++i)
    ecg.row(i) = (map.ecg_gain[i] * ecg.row(i)).array().tanh();
  for (int i = 0; i < egm.rows(); ++i)
    egm.row(i) = (map.egm_gain[i] * egm.row(i)).array().tanh();

  std::normal_distribution<double> gauss(0.0, 1.0);
  // Noise draw order is fixed (ECG rows then EGM rows, time-major), so two
  // runs from equal rng states produce identical noise up to the level scale.
  for (int i = 0; i < ecg.rows(); ++i)
    for (int64_t t = 0; t < L; ++t) ecg(i, t) += noise_level * gauss(noise_rng);
  for (int i = 0; i < egm.rows(); ++i)
    for (int64_t t = 0; t < L; ++t) egm(i, t) += noise_level * gauss(noise_rng);
  return {std::move(ecg), std::move(egm)};
}

SynthPatient synth_patient(const SynthPatientConfig& cfg) {
  cfg.validate();
  const int fs = cfg.sample_rate_hz;
  const int half = static_cast<int>(kBeatSpanSeconds * fs);

  // Exact atypical count at deterministic positions.
  const int n_atypical =
      static_cast<int>(std::lround(cfg.beats * cfg.atypical_fraction));
  std::vector<int> order(cfg.beats);
  std::iota(order.begin(), order.end(), 0);
  {
    Rng rng(derive_seed(cfg.seed, 2));
    for (int i = cfg.beats - 1; i > 0; --i) {
      std::uniform_int_distribution<int> pick(0, i);
      std::swap(order[i], order[pick(rng)]);
    }
  }
  std::set<int> atypical(order.begin(), order.begin() + n_atypical);

  // R-peak schedule.
  Rng rr_rng(derive_seed(cfg.seed, 3));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double rr_mean = 60.0 / cfg.heart_rate_bpm;
  std::vector<int64_t> r_peaks(cfg.beats);
  double t = 0.5;
  for (int i = 0; i < cfg.beats; ++i) {
    r_peaks[i] = static_cast<int64_t>(std::llround(t * fs));
    double rr = rr_mean * (1.0 + cfg.heart_rate_jitter * gauss(rr_rng));
    rr = std::clamp(rr, 0.55, 2.0);
    t += rr;
  }
  const int64_t L = r_peaks.back() + static_cast<int64_t>(0.5 * fs);

  MatrixXd latent = MatrixXd::Zero(cfg.latent_dim, L);
  LabelTable labels(cfg.beats);
  for (int i = 0; i < cfg.beats; ++i) {
    BeatLabel label = atypical.count(i) ? BeatLabel::Atypical : BeatLabel::Sinus;
    LatentBeat beat = synth_beat(cfg, i, label);
    const int64_t start = r_peaks[i] - half;
    const int len = static_cast<int>(beat.traces.cols());
    for (int c = 0; c < cfg.latent_dim; ++c)
      for (int s = 0; s < len; ++s)
        if (start + s >= 0 && start + s < L)
          latent(c, start + s) += beat.traces(c, s);
    labels[i] = {i, r_peaks[i], label};
  }

  MixingMap map = make_mixing_map(cfg);
  Rng noise_rng(derive_seed(cfg.seed, 4));
  auto [ecg, egm] = derive_leads(latent, map, cfg.noise_level, noise_rng);

  SynthPatient out;
  out.recording.patient_id = cfg.patient_id;
  out.recording.sample_rate_hz = fs;
  out.recording.ecg = std::move(ecg);
  out.recording.egm = std::move(egm);
  out.labels = std::move(labels);
  return out;
}

void generate_dataset(const std::vector<SynthPatientConfig>& cohort,
                      const std::filesystem::path& out_dir) {
  if (cohort.empty()) fail_data("generate_dataset: empty cohort");
  std::set<std::string> seen;
  for (const SynthPatientConfig& cfg : cohort) {
    cfg.validate();
    if (!seen.insert(cfg.patient_id).second)
      fail_data("generate_dataset: duplicate patient id '" + cfg.patient_id + "'");
  }
  std::filesystem::create_directories(out_dir);
  for (const SynthPatientConfig& cfg : cohort) {
    SynthPatient patient = synth_patient(cfg);
    write_recording_csv(out_dir / (cfg.patient_id + ".csv"), patient.recording);
    write_manifest(out_dir / (cfg.patient_id + ".json"), cfg.patient_id,
                   cfg.sample_rate_hz);
    write_labels_csv(out_dir / ("labels_" + cfg.patient_id + ".csv"),
                     patient.labels);
    log_info("synth: wrote patient '" + cfg.patient_id + "' (" +
             std::to_string(cfg.beats) + " beats, " +
             std::to_string(patient.recording.num_samples()) + " samples)");
  }
}

}  // namespace nrced
