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
#include <span>
#include <vector>

#include "nrced/beat.hpp"

namespace nrced {

/// Hann taper of the given length: w(t) = 0.5 * (1 - cos(2*pi*t/len)) for
/// t in [0, len). w(0) = 0 and, for even len, w(len/2) = 1. Shifted copies
/// at hop = len/2 sum to 1 across the interior (constant overlap-add).
std::vector<double> make_hann_window(int len);

/// Short-time Fourier analysis geometry for one beat.
///
/// The beat is zero-padded to `padded_len()` samples before framing: one
/// leading zero, then the beat, then trailing zeros. The leading zero keeps
/// every real sample under nonzero window weight (the Hann taper is exactly
/// zero at its first tap), which is what makes the transform invertible over
/// the whole beat.
struct STFTConfig {
  int window_len = 30;  // analysis window length
  int hop = 15;         // 50% overlap
  int fft_len = 30;     // one-sided bins = fft_len/2 + 1
  int num_freqs = 16;
  int num_frames = 16;
  int source_len = 250;
  int pad_left = 1;
  int pad_right = 4;
  std::vector<double> window;

  int padded_len() const { return pad_left + source_len + pad_right; }
};

/// Builds a validated config. Frame count and trailing pad are derived so
/// that frames at multiples of `hop` exactly tile the padded signal. The
/// defaults give a 16x16 time-frequency image of a 250-sample beat.
STFTConfig make_stft_config(int window_len = 30, int hop = 15, int fft_len = 30,
                            int source_len = 250);

/// Real-stacked 3-D time-frequency representation of one beat: the real
/// planes of every channel first, then the imaginary planes in the same
/// channel order, each plane num_freqs x num_frames.
struct TFTensor {
  int channels = 0;  // 2M after real/imaginary stacking
  int num_freqs = 0;
  int num_frames = 0;
  int source_len = 0;
  std::vector<double> data;  // (channels, num_freqs, num_frames) row-major

  size_t size() const {
    return static_cast<size_t>(channels) * num_freqs * num_frames;
  }
  double& at(int c, int k, int t) {
    return data[(static_cast<size_t>(c) * num_freqs + k) * num_frames + t];
  }
  double at(int c, int k, int t) const {
    return data[(static_cast<size_t>(c) * num_freqs + k) * num_frames + t];
  }
};

struct ComplexSpectrogram {
  Eigen::MatrixXd re;  // num_freqs x num_frames
  Eigen::MatrixXd im;
};

/// Windowed one-sided Fourier coefficients of a single channel.
/// Entry (k, f) = sum_t window[t] * x[frame_f + t] * exp(-i 2 pi k t / fft_len).
/// Linear in the input. Errors if the signal length differs from
/// cfg.source_len.
ComplexSpectrogram stft_channel(std::span<const double> signal,
                                const STFTConfig& cfg);

/// Applies stft_channel per channel and stacks real/imaginary planes,
/// doubling the channel count: (M, T) -> (2M, K, frames).
TFTensor tf_forward(const Beat& beat, const STFTConfig& cfg);
TFTensor tf_forward(const Eigen::MatrixXd& channels, const STFTConfig& cfg);

/// Least-squares overlap-add inversion. Each frame's one-sided spectrum is
/// completed by Hermitian symmetry, inverse-transformed, and the frames are
/// recombined by the window-weighted normal equations (numerator w*y,
/// denominator sum of squared window weights). Exact, up to roundoff, for
/// tensors produced by tf_forward. Errors on malformed shapes.
Beat tf_inverse(const TFTensor& tensor, const STFTConfig& cfg);

/// Tensor <-> vector reshaping, channel-major then frequency then time.
/// Exact bijection.
std::vector<double> flatten(const TFTensor& tensor);
TFTensor unflatten(std::span<const double> vec, int channels,
                   const STFTConfig& cfg);

}  // namespace nrced
