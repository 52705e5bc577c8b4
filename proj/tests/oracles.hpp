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

// Independent reference implementations the tests check the library against.
// Everything here is written naively (complex arithmetic, direct summation,
// Gaussian elimination) and shares no code with the implementation paths it
// verifies.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "nrced/tf.hpp"

namespace oracles {

using cd = std::complex<double>;

// Windowed Fourier coefficients by direct summation over every (bin, frame)
// pair: O(K * frames * window_len) complex multiplies.
inline std::vector<std::vector<cd>> stft_direct(std::span<const double> signal,
                                                const nrced::STFTConfig& cfg) {
  std::vector<double> padded(cfg.padded_len(), 0.0);
  for (int i = 0; i < cfg.source_len; ++i) padded[cfg.pad_left + i] = signal[i];
  std::vector<std::vector<cd>> out(cfg.num_freqs,
                                   std::vector<cd>(cfg.num_frames));
  for (int k = 0; k < cfg.num_freqs; ++k) {
    for (int f = 0; f < cfg.num_frames; ++f) {
      cd acc(0.0, 0.0);
      for (int t = 0; t < cfg.window_len; ++t) {
        double phase = -2.0 * std::numbers::pi * k * t / cfg.fft_len;
        acc += cfg.window[t] * padded[f * cfg.hop + t] * cd(std::cos(phase), std::sin(phase));
      }
      out[k][f] = acc;
    }
  }
  return out;
}

// Direct overlap-add inversion of a one-sided complex spectrogram: Hermitian
// completion, naive inverse DFT per frame, window-weighted recombination.
inline std::vector<double> istft_direct(
    const std::vector<std::vector<cd>>& spec, const nrced::STFTConfig& cfg) {
  const int nfft = cfg.fft_len;
  std::vector<double> num(cfg.padded_len(), 0.0), den(cfg.padded_len(), 0.0);
  for (int f = 0; f < cfg.num_frames; ++f) {
    std::vector<cd> full(nfft);
    for (int k = 0; k < cfg.num_freqs; ++k) full[k] = spec[k][f];
    for (int k = cfg.num_freqs; k < nfft; ++k) full[k] = std::conj(spec[nfft - k][f]);
    for (int t = 0; t < cfg.window_len; ++t) {
      cd acc(0.0, 0.0);
      for (int k = 0; k < nfft; ++k) {
        double phase = 2.0 * std::numbers::pi * k * t / nfft;
        acc += full[k] * cd(std::cos(phase), std::sin(phase));
      }
      double y = acc.real() / nfft;
      num[f * cfg.hop + t] += cfg.window[t] * y;
      den[f * cfg.hop + t] += cfg.window[t] * cfg.window[t];
    }
  }
  std::vector<double> x(cfg.source_len);
  for (int i = 0; i < cfg.source_len; ++i) {
    int p = cfg.pad_left + i;
    x[i] = den[p] > 0.0 ? num[p] / den[p] : 0.0;
  }
  return x;
}

// Amplitude of the frequency-f component over sample range [lo, hi).
inline double tone_amplitude(std::span<const double> x, double f_hz, double fs,
                             size_t lo, size_t hi) {
  cd acc(0.0, 0.0);
  for (size_t n = lo; n < hi; ++n) {
    double phase = -2.0 * std::numbers::pi * f_hz * static_cast<double>(n) / fs;
    acc += x[n] * cd(std::cos(phase), std::sin(phase));
  }
  return 2.0 * std::abs(acc) / static_cast<double>(hi - lo);
}

// Lag of the cross-correlation maximum between two equal-length signals,
// searched over [-max_lag, max_lag].
inline int xcorr_argmax_lag(std::span<const double> a, std::span<const double> b,
                            int max_lag) {
  int best_lag = 0;
  double best = -std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(a.size());
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      int j = i + lag;
      if (j < 0 || j >= n) continue;
      acc += a[i] * b[j];
    }
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  return best_lag;
}

// Dense solve of A x = b by Gaussian elimination with partial pivoting.
inline Eigen::VectorXd gaussian_solve(Eigen::MatrixXd a, Eigen::VectorXd b) {
  const int n = static_cast<int>(a.rows());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    a.row(col).swap(a.row(pivot));
    std::swap(b[col], b[pivot]);
    for (int r = col + 1; r < n; ++r) {
      double factor = a(r, col) / a(col, col);
      a.row(r) -= factor * a.row(col);
      b[r] -= factor * b[col];
    }
  }
  Eigen::VectorXd x(n);
  for (int r = n - 1; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < n; ++c) acc -= a(r, c) * x[c];
    x[r] = acc / a(r, r);
  }
  return x;
}

// Plain Pearson correlation, written independently of the library version.
inline double pearson_direct(std::span<const double> a, std::span<const double> b) {
  const size_t n = a.size();
  double ma = 0, mb = 0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace oracles
