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

#include <random>

#include "nrced/common.hpp"
#include "nrced/tf.hpp"
#include "oracles.hpp"

using namespace nrced;

namespace {

Eigen::MatrixXd random_beat(int channels, int len, uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(channels, len);
  for (int c = 0; c < channels; ++c)
    for (int t = 0; t < len; ++t) m(c, t) = g(rng);
  return m;
}

}  // namespace

TEST_CASE("hann window endpoints and peak") {
  auto w = make_hann_window(30);
  CHECK(w[0] == doctest::Approx(0.0));
  CHECK(w[15] == doctest::Approx(1.0));
  CHECK(*std::max_element(w.begin(), w.end()) == doctest::Approx(1.0));
}

TEST_CASE("hann window satisfies constant overlap-add at half hop") {
  const int len = 30, hop = 15;
  auto w = make_hann_window(len);
  // Sum shifted copies by direct summation, check the interior is constant.
  std::vector<double> acc(300, 0.0);
  for (int start = 0; start + len <= 300; start += hop)
    for (int t = 0; t < len; ++t) acc[start + t] += w[t];
  for (int i = len; i + len < 300; ++i) CHECK(acc[i] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("default config gives a 16x16 image of a 250-sample beat") {
  STFTConfig cfg = make_stft_config();
  CHECK(cfg.num_freqs == 16);
  CHECK(cfg.num_frames == 16);
  CHECK(cfg.padded_len() == 255);
  CHECK(cfg.window.size() == 30);
}

TEST_CASE("stft of the zero signal is zero, and the operator is linear") {
  STFTConfig cfg = make_stft_config();
  std::vector<double> zero(250, 0.0);
  auto s = stft_channel(zero, cfg);
  CHECK(s.re.cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.im.cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd a = random_beat(1, 250, 7), b = random_beat(1, 250, 8);
  std::vector<double> va(a.data(), a.data() + 250), vb(b.data(), b.data() + 250);
  std::vector<double> vsum(250);
  for (int i = 0; i < 250; ++i) vsum[i] = va[i] + vb[i];
  auto sa = stft_channel(va, cfg), sb = stft_channel(vb, cfg), ssum = stft_channel(vsum, cfg);
  CHECK((ssum.re - sa.re - sb.re).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((ssum.im - sa.im - sb.im).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("stft matches the direct windowed-Fourier oracle") {
  STFTConfig cfg = make_stft_config();
  // Unit impulse at a frame-aligned position plus dense random signals.
  std::vector<double> impulse(250, 0.0);
  impulse[29] = 1.0;  // padded position 30 = start of frame 2
  for (uint64_t seed : {0ull, 1ull, 2ull}) {
    std::vector<double> sig(250);
    if (seed == 0) {
      sig = impulse;
    } else {
      Eigen::MatrixXd m = random_beat(1, 250, seed);
      std::copy(m.data(), m.data() + 250, sig.begin());
    }
    auto got = stft_channel(sig, cfg);
    auto want = oracles::stft_direct(sig, cfg);
    for (int k = 0; k < cfg.num_freqs; ++k)
      for (int f = 0; f < cfg.num_frames; ++f) {
        CHECK(got.re(k, f) == doctest::Approx(want[k][f].real()).epsilon(1e-9));
        CHECK(got.im(k, f) == doctest::Approx(want[k][f].imag()).epsilon(1e-9));
      }
  }
}

TEST_CASE("stft rejects wrong-length input") {
  STFTConfig cfg = make_stft_config();
  std::vector<double> bad(100, 0.0);
  CHECK_THROWS_AS((void)stft_channel(bad, cfg), Error);
}

TEST_CASE("tf_forward stacks real and imaginary planes") {
  STFTConfig cfg = make_stft_config();
  Eigen::MatrixXd egm = random_beat(5, 250, 11);
  TFTensor t5 = tf_forward(egm, cfg);
  CHECK(t5.channels == 10);
  CHECK(t5.num_freqs == 16);
  CHECK(t5.num_frames == 16);

  Eigen::MatrixXd ecg = random_beat(12, 250, 12);
  TFTensor t12 = tf_forward(ecg, cfg);
  CHECK(t12.channels == 24);
  CHECK(t12.size() == 24u * 16 * 16);

  TFTensor tz = tf_forward(Eigen::MatrixXd::Zero(3, 250), cfg);
  for (double v : tz.data) CHECK(v == 0.0);

  // Plane order: real planes for all channels first, then imaginary planes.
  std::vector<double> ch0(egm.row(0).begin(), egm.row(0).end());
  auto spec = stft_channel(ch0, cfg);
  CHECK(t5.at(0, 3, 4) == doctest::Approx(spec.re(3, 4)));
  CHECK(t5.at(5, 3, 4) == doctest::Approx(spec.im(3, 4)));
}

TEST_CASE("round trip recovers the beat to 1e-6 relative") {
  STFTConfig cfg = make_stft_config();
  for (int channels : {1, 5, 12}) {
    for (uint64_t seed = 0; seed < 8; ++seed) {
      Beat beat;
      beat.channels = random_beat(channels, 250, 100 * channels + seed);
      TFTensor t = tf_forward(beat, cfg);
      Beat back = tf_inverse(t, cfg);
      double err = (back.channels - beat.channels).norm() / beat.channels.norm();
      CHECK(err < 1e-6);
    }
  }
}

TEST_CASE("tf_inverse of the zero tensor is the zero beat") {
  STFTConfig cfg = make_stft_config();
  TFTensor t;
  t.channels = 2;
  t.num_freqs = cfg.num_freqs;
  t.num_frames = cfg.num_frames;
  t.source_len = cfg.source_len;
  t.data.assign(t.size(), 0.0);
  Beat b = tf_inverse(t, cfg);
  CHECK(b.channels.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tf_inverse matches the direct overlap-add oracle off the range") {
  STFTConfig cfg = make_stft_config();
  Eigen::MatrixXd sig = random_beat(1, 250, 42);
  TFTensor t = tf_forward(sig, cfg);
  // Negate the imaginary plane: the tensor leaves tf_forward's range.
  for (int k = 0; k < cfg.num_freqs; ++k)
    for (int f = 0; f < cfg.num_frames; ++f) t.at(1, k, f) = -t.at(1, k, f);

  Beat got = tf_inverse(t, cfg);
  std::vector<std::vector<oracles::cd>> spec(cfg.num_freqs,
                                             std::vector<oracles::cd>(cfg.num_frames));
  for (int k = 0; k < cfg.num_freqs; ++k)
    for (int f = 0; f < cfg.num_frames; ++f)
      spec[k][f] = oracles::cd(t.at(0, k, f), t.at(1, k, f));
  std::vector<double> want = oracles::istft_direct(spec, cfg);
  double diff = 0.0;
  for (int i = 0; i < 250; ++i) diff = std::max(diff, std::abs(got.channels(0, i) - want[i]));
  CHECK(diff < 1e-9);
  // And it differs from the original signal (conjugation is not identity).
  CHECK((got.channels - sig).norm() / sig.norm() > 1e-3);
}

TEST_CASE("tf_inverse rejects malformed shapes") {
  STFTConfig cfg = make_stft_config();
  TFTensor bad;
  bad.channels = 3;  // odd: cannot be re/im stacked
  bad.num_freqs = cfg.num_freqs;
  bad.num_frames = cfg.num_frames;
  bad.data.assign(bad.size(), 0.0);
  CHECK_THROWS_AS((void)tf_inverse(bad, cfg), Error);
  TFTensor wrong;
  wrong.channels = 2;
  wrong.num_freqs = 4;
  wrong.num_frames = 4;
  wrong.data.assign(wrong.size(), 0.0);
  CHECK_THROWS_AS((void)tf_inverse(wrong, cfg), Error);
}

TEST_CASE("tf_forward is linear") {
  STFTConfig cfg = make_stft_config();
  Eigen::MatrixXd x = random_beat(5, 250, 1), y = random_beat(5, 250, 2);
  const double alpha = 0.37, beta = -1.25;
  TFTensor tx = tf_forward(x, cfg), ty = tf_forward(y, cfg);
  TFTensor tmix = tf_forward(alpha * x + beta * y, cfg);
  for (size_t i = 0; i < tmix.size(); ++i)
    CHECK(tmix.data[i] ==
          doctest::Approx(alpha * tx.data[i] + beta * ty.data[i]).epsilon(1e-9));
}

TEST_CASE("full-spectrum energy equals window-weighted frame energy") {
  STFTConfig cfg = make_stft_config();
  Eigen::MatrixXd sig = random_beat(1, 250, 77);
  std::vector<double> v(sig.data(), sig.data() + 250);
  auto spec = stft_channel(v, cfg);

  // One-sided planes expanded to the full spectrum: bins 0 and nfft/2 count
  // once, the rest twice (their conjugates).
  double lhs = 0.0;
  for (int k = 0; k < cfg.num_freqs; ++k) {
    double mag2 = 0.0;
    for (int f = 0; f < cfg.num_frames; ++f)
      mag2 += spec.re(k, f) * spec.re(k, f) + spec.im(k, f) * spec.im(k, f);
    const bool self_conjugate = k == 0 || 2 * k == cfg.fft_len;
    lhs += self_conjugate ? mag2 : 2.0 * mag2;
  }

  std::vector<double> padded(cfg.padded_len(), 0.0);
  for (int i = 0; i < 250; ++i) padded[cfg.pad_left + i] = v[i];
  double rhs = 0.0;
  for (int f = 0; f < cfg.num_frames; ++f)
    for (int t = 0; t < cfg.window_len; ++t) {
      double wx = cfg.window[t] * padded[f * cfg.hop + t];
      rhs += wx * wx;
    }
  rhs *= cfg.fft_len;
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
}

TEST_CASE("flatten and unflatten are an exact bijection") {
  STFTConfig cfg = make_stft_config();
  TFTensor t24 = tf_forward(random_beat(12, 250, 5), cfg);
  std::vector<double> v = flatten(t24);
  CHECK(v.size() == 6144);
  TFTensor t10 = tf_forward(random_beat(5, 250, 6), cfg);
  CHECK(flatten(t10).size() == 2560);

  TFTensor back = unflatten(v, 24, cfg);
  REQUIRE(back.data.size() == t24.data.size());
  for (size_t i = 0; i < v.size(); ++i) CHECK(back.data[i] == t24.data[i]);

  // Flatten order is channel-major, then frequency, then time.
  CHECK(v[(3 * 16 + 7) * 16 + 9] == t24.at(3, 7, 9));

  std::vector<double> wrong(100, 0.0);
  CHECK_THROWS_AS((void)unflatten(wrong, 24, cfg), Error);
}
