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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nrced/beat.hpp"
#include "nrced/common.hpp"

namespace nrced {

/// A raw paired recording: 12 surface leads and 5 intracardiac leads
/// sampled simultaneously.
struct Recording {
  std::string patient_id;
  int sample_rate_hz = 1000;
  Eigen::MatrixXd ecg;  // 12 x L
  Eigen::MatrixXd egm;  // 5 x L

  int64_t num_samples() const { return ecg.cols(); }
};

constexpr int kEcgLeads = 12;
constexpr int kEgmLeads = 5;

/// Ground-truth or matched beat annotations.
struct LabelRow {
  int beat_index = 0;
  int64_t r_peak_index = 0;
  BeatLabel label = BeatLabel::Unlabeled;
};
using LabelTable = std::vector<LabelRow>;

/// One second-order section in direct form II transposed,
/// y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2].
struct Sos {
  double b0, b1, b2;
  double a1, a2;
};

struct BandpassConfig {
  double low_hz = 3.0;
  double high_hz = 50.0;
  int order = 5;  // analog prototype order; the bandpass carries 2x poles
};

/// Butterworth bandpass as cascaded second-order sections, designed by the
/// analog prototype -> lowpass-to-bandpass transform -> bilinear route.
std::vector<Sos> butterworth_bandpass_sos(const BandpassConfig& cfg,
                                          double sample_rate_hz);

/// Single forward pass through the cascade, with steady-state initial
/// conditions scaled to the first sample.
std::vector<double> sosfilt(const std::vector<Sos>& sections,
                            std::span<const double> x);

/// Forward-backward filtering with odd-reflection padding of 3x the filter
/// order at both ends. Net phase response is zero; magnitude response is the
/// square of the single-pass filter. Errors on signals too short for the
/// padding and on non-finite input.
std::vector<double> bandpass_filter_zero_phase(std::span<const double> signal,
                                               int sample_rate_hz,
                                               const BandpassConfig& cfg = {});

struct PeakConfig {
  int lead = 1;                    // lead II drives detection by default
  double prominence_scale = 0.4;   // times the lead's robust amplitude
  double refractory_ms = 400.0;    // minimum peak spacing
};

/// Local-maximum detector with a prominence floor and a refractory distance;
/// when two candidates collide within the refractory window the taller one
/// wins. Returns strictly increasing indices; empty on flatline input.
std::vector<int64_t> detect_r_peaks(std::span<const double> ecg_lead,
                                    int sample_rate_hz,
                                    const PeakConfig& cfg = {});

struct BeatPair {
  Beat egm;
  Beat ecg;
};

/// Cuts aligned EGM/ECG snippets of 2*half_window samples centered on each
/// peak. Peaks too close to either edge are dropped (count reported through
/// *dropped). Both snippets of a pair index the identical half-open sample
/// interval [peak - half_window, peak + half_window).
std::vector<BeatPair> segment_beats(const Recording& rec,
                                    const std::vector<int64_t>& peaks,
                                    int half_window = 250,
                                    size_t* dropped = nullptr);

/// Keeps every second sample. Halves the sample rate.
Beat downsample_by_two(const Beat& beat);

/// Removes the per-channel mean, then scales each channel to unit Euclidean
/// norm. A constant channel maps to all zeros. Idempotent.
Beat center_normalize(const Beat& beat);

struct PreprocessConfig {
  BandpassConfig band;
  PeakConfig peaks;
  int half_window = 250;
  // Maximum distance (source samples) between a detected peak and a
  // ground-truth annotation for label matching.
  int label_match_tolerance = 25;
};

/// Centered, normalized, fixed-length beat pairs in time domain, ordered by
/// R-peak position.
struct BeatPairSet {
  std::string patient_id;
  int sample_rate_hz = 500;
  std::vector<BeatPair> pairs;
  std::vector<BeatLabel> labels;  // aligned with pairs
  size_t dropped = 0;
};

/// Full pipeline: zero-phase bandpass on every channel, R-peak detection on
/// the configured ECG lead, segmentation, decimation, centering and
/// normalization. Labels, when given, are matched to detected beats by
/// nearest ground-truth R peak. Errors when no usable beat survives.
BeatPairSet preprocess_recording(const Recording& recording,
                                 const PreprocessConfig& cfg = {},
                                 const LabelTable* truth_labels = nullptr);

}  // namespace nrced
