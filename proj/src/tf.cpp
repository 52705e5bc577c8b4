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

#include "nrced/tf.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "nrced/common.hpp"

namespace nrced {

namespace {

// Analysis tables for the direct DFT on a windowed frame.
// cos_kt(k, t) = cos(2 pi k t / N), sin_kt(k, t) = sin(2 pi k t / N).
struct DftTables {
  Eigen::MatrixXd cos_kt;  // num_freqs x window_len
  Eigen::MatrixXd sin_kt;
};

DftTables make_tables(const STFTConfig& cfg) {
  DftTables t;
  t.cos_kt.resize(cfg.num_freqs, cfg.window_len);
  t.sin_kt.resize(cfg.num_freqs, cfg.window_len);
  const double step = 2.0 * std::numbers::pi / cfg.fft_len;
  for (int k = 0; k < cfg.num_freqs; ++k) {
    for (int n = 0; n < cfg.window_len; ++n) {
      t.cos_kt(k, n) = std::cos(step * k * n);
      t.sin_kt(k, n) = std::sin(step * k * n);
    }
  }
  return t;
}

std::vector<double> pad_signal(std::span<const double> x,
                               const STFTConfig& cfg) {
  std::vector<double> padded(cfg.padded_len(), 0.0);
  for (int i = 0; i < cfg.source_len; ++i) padded[cfg.pad_left + i] = x[i];
  return padded;
}

// Windowed frames of the padded signal as a window_len x num_frames matrix.
Eigen::MatrixXd frame_matrix(std::span<const double> padded,
                             const STFTConfig& cfg) {
  Eigen::MatrixXd frames(cfg.window_len, cfg.num_frames);
  for (int f = 0; f < cfg.num_frames; ++f) {
    const int start = f * cfg.hop;
    for (int n = 0; n < cfg.window_len; ++n)
      frames(n, f) = cfg.window[n] * padded[start + n];
  }
  return frames;
}

}  // namespace

std::vector<double> make_hann_window(int len) {
  if (len < 2) fail_data("make_hann_window: window length must be >= 2");
  std::vector<double> w(len);
  for (int t = 0; t < len; ++t)
    w[t] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * t / len));
  return w;
}

STFTConfig make_stft_config(int window_len, int hop, int fft_len,
                            int source_len) {
  if (window_len < 2 || hop < 1 || hop > window_len)
    fail_data("make_stft_config: need window_len >= 2 and 1 <= hop <= window_len");
  if (fft_len < window_len)
    fail_data("make_stft_config: fft_len must be >= window_len");
  if (source_len < window_len)
    fail_data("make_stft_config: beat shorter than the analysis window");

  STFTConfig cfg;
  cfg.window_len = window_len;
  cfg.hop = hop;
  cfg.fft_len = fft_len;
  cfg.num_freqs = fft_len / 2 + 1;
  cfg.source_len = source_len;
  cfg.pad_left = 1;
  // Smallest frame count whose tiling covers pad_left + source_len.
  const int covered = cfg.pad_left + source_len;
  int frames = 1;
  if (covered > window_len)
    frames = 1 + (covered - window_len + hop - 1) / hop;
  cfg.num_frames = frames;
  cfg.pad_right = window_len + hop * (frames - 1) - covered;
  cfg.window = make_hann_window(window_len);
  return cfg;
}

ComplexSpectrogram stft_channel(std::span<const double> signal,
                                const STFTConfig& cfg) {
  if (static_cast<int>(signal.size()) != cfg.source_len)
    fail_data("stft_channel: expected " + std::to_string(cfg.source_len) +
              " samples, got " + std::to_string(signal.size()));
  const DftTables tables = make_tables(cfg);
  const std::vector<double> padded = pad_signal(signal, cfg);
  const Eigen::MatrixXd frames = frame_matrix(padded, cfg);
  ComplexSpectrogram out;
  out.re = tables.cos_kt * frames;
  out.im = -(tables.sin_kt * frames);
  return out;
}

TFTensor tf_forward(const Eigen::MatrixXd& channels, const STFTConfig& cfg) {
  const int m = static_cast<int>(channels.rows());
  if (m < 1) fail_data("tf_forward: beat has no channels");
  if (static_cast<int>(channels.cols()) != cfg.source_len)
    fail_data("tf_forward: expected " + std::to_string(cfg.source_len) +
              " samples per channel, got " + std::to_string(channels.cols()));

  TFTensor t;
  t.channels = 2 * m;
  t.num_freqs = cfg.num_freqs;
  t.num_frames = cfg.num_frames;
  t.source_len = cfg.source_len;
  t.data.assign(t.size(), 0.0);

  std::vector<double> row(cfg.source_len);
  for (int c = 0; c < m; ++c) {
    for (int i = 0; i < cfg.source_len; ++i) row[i] = channels(c, i);
    ComplexSpectrogram spec = stft_channel(row, cfg);
    for (int k = 0; k < cfg.num_freqs; ++k) {
      for (int f = 0; f < cfg.num_frames; ++f) {
        t.at(c, k, f) = spec.re(k, f);
        t.at(m + c, k, f) = spec.im(k, f);
      }
    }
  }
  return t;
}

TFTensor tf_forward(const Beat& beat, const STFTConfig& cfg) {
  return tf_forward(beat.channels, cfg);
}

Beat tf_inverse(const TFTensor& tensor, const STFTConfig& cfg) {
  if (tensor.channels < 2 || tensor.channels % 2 != 0)
    fail_data("tf_inverse: channel count must be even (real/imag stacking)");
  if (tensor.num_freqs != cfg.num_freqs || tensor.num_frames != cfg.num_frames)
    fail_data("tf_inverse: tensor shape does not match the STFT config");

  const int m = tensor.channels / 2;
  const int nfft = cfg.fft_len;

  // Synthesis tables over the full spectrum, t rows, k columns.
  Eigen::MatrixXd icos(cfg.window_len, nfft), isin(cfg.window_len, nfft);
  const double step = 2.0 * std::numbers::pi / nfft;
  for (int t = 0; t < cfg.window_len; ++t) {
    for (int k = 0; k < nfft; ++k) {
      icos(t, k) = std::cos(step * k * t);
      isin(t, k) = std::sin(step * k * t);
    }
  }

  // Per-sample squared window weight of the frame tiling.
  std::vector<double> den(cfg.padded_len(), 0.0);
  for (int f = 0; f < cfg.num_frames; ++f)
    for (int n = 0; n < cfg.window_len; ++n)
      den[f * cfg.hop + n] += cfg.window[n] * cfg.window[n];

  Beat beat;
  beat.channels.resize(m, cfg.source_len);
  beat.sample_rate_hz = 500;

  Eigen::MatrixXd re_full(nfft, cfg.num_frames), im_full(nfft, cfg.num_frames);
  for (int c = 0; c < m; ++c) {
    // Hermitian completion of the one-sided spectrum.
    for (int f = 0; f < cfg.num_frames; ++f) {
      for (int k = 0; k < cfg.num_freqs; ++k) {
        re_full(k, f) = tensor.at(c, k, f);
        im_full(k, f) = tensor.at(m + c, k, f);
      }
      for (int k = cfg.num_freqs; k < nfft; ++k) {
        re_full(k, f) = tensor.at(c, nfft - k, f);
        im_full(k, f) = -tensor.at(m + c, nfft - k, f);
      }
    }
    // Real part of the inverse DFT of every frame, then window-weighted
    // overlap-add normalized by the squared window weights.
    Eigen::MatrixXd ytime =
        (icos * re_full - isin * im_full) / static_cast<double>(nfft);
    std::vector<double> num(cfg.padded_len(), 0.0);
    for (int f = 0; f < cfg.num_frames; ++f)
      for (int n = 0; n < cfg.window_len; ++n)
        num[f * cfg.hop + n] += cfg.window[n] * ytime(n, f);
    for (int i = 0; i < cfg.source_len; ++i) {
      const int p = cfg.pad_left + i;
      beat.channels(c, i) = den[p] > 0.0 ? num[p] / den[p] : 0.0;
    }
  }
  return beat;
}

std::vector<double> flatten(const TFTensor& tensor) { return tensor.data; }

TFTensor unflatten(std::span<const double> vec, int channels,
                   const STFTConfig& cfg) {
  TFTensor t;
  t.channels = channels;
  t.num_freqs = cfg.num_freqs;
  t.num_frames = cfg.num_frames;
  t.source_len = cfg.source_len;
  if (vec.size() != t.size())
    fail_data("unflatten: vector length " + std::to_string(vec.size()) +
              " does not match " + std::to_string(t.size()));
  t.data.assign(vec.begin(), vec.end());
  return t;
}

}  // namespace nrced
