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

#include "nrced/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>

#include "nrced/common.hpp"

namespace nrced {

namespace {

using cd = std::complex<double>;

// Prewarped analog frequency for the bilinear transform.
double prewarp(double f_hz, double fs) {
  return 2.0 * fs * std::tan(std::numbers::pi * f_hz / fs);
}

struct ZpkDigital {
  std::vector<cd> zeros;
  std::vector<cd> poles;
  double gain;
};

ZpkDigital design_bandpass_zpk(const BandpassConfig& cfg, double fs) {
  const int n = cfg.order;
  const double w1 = prewarp(cfg.low_hz, fs);
  const double w2 = prewarp(cfg.high_hz, fs);
  const double bw = w2 - w1;
  const double w0sq = w1 * w2;

  // Lowpass Butterworth prototype poles on the left half unit circle.
  std::vector<cd> proto(n);
  for (int k = 1; k <= n; ++k) {
    double theta = std::numbers::pi * (2.0 * k + n - 1.0) / (2.0 * n);
    proto[k - 1] = cd(std::cos(theta), std::sin(theta));
  }

  // Lowpass-to-bandpass: each prototype pole p solves s^2 - p*bw*s + w0^2 = 0.
  std::vector<cd> apoles;
  apoles.reserve(2 * n);
  for (const cd& p : proto) {
    cd half = p * bw * 0.5;
    cd disc = std::sqrt(half * half - cd(w0sq, 0.0));
    apoles.push_back(half + disc);
    apoles.push_back(half - disc);
  }
  // n analog zeros at the origin; gain bw^n.
  double again = std::pow(bw, n);

  // Bilinear transform: c -> (2fs + c) / (2fs - c).
  const double fs2 = 2.0 * fs;
  ZpkDigital out;
  out.poles.reserve(2 * n);
  cd gain_num(std::pow(fs2, n), 0.0);  // product of (2fs - 0) over analog zeros
  cd gain_den(1.0, 0.0);
  for (const cd& p : apoles) {
    out.poles.push_back((cd(fs2, 0.0) + p) / (cd(fs2, 0.0) - p));
    gain_den *= (cd(fs2, 0.0) - p);
  }
  // n digital zeros at z=1 (from s=0) and n at z=-1 (from infinity).
  for (int i = 0; i < n; ++i) out.zeros.push_back(cd(1.0, 0.0));
  for (int i = 0; i < n; ++i) out.zeros.push_back(cd(-1.0, 0.0));
  out.gain = again * (gain_num / gain_den).real();
  return out;
}

}  // namespace

std::vector<Sos> butterworth_bandpass_sos(const BandpassConfig& cfg,
                                          double fs) {
  if (cfg.order < 1) fail_data("butterworth_bandpass_sos: order must be >= 1");
  if (!(cfg.low_hz > 0.0) || !(cfg.high_hz > cfg.low_hz))
    fail_data("butterworth_bandpass_sos: need 0 < low < high cutoff");
  if (fs <= 2.0 * cfg.high_hz)
    fail_data("butterworth_bandpass_sos: sample rate must exceed twice the high cutoff");

  ZpkDigital zpk = design_bandpass_zpk(cfg, fs);

  // Split poles into conjugate pairs and real poles.
  std::vector<cd> complex_poles;
  std::vector<double> real_poles;
  for (const cd& p : zpk.poles) {
    if (std::abs(p.imag()) < 1e-12 * std::max(1.0, std::abs(p.real())))
      real_poles.push_back(p.real());
    else if (p.imag() > 0.0)
      complex_poles.push_back(p);
  }
  if (real_poles.size() % 2 != 0)
    fail_data("butterworth_bandpass_sos: unpaired real pole");

  struct PolePair {
    double a1, a2;  // z^2 + a1 z + a2
    double radius;
  };
  std::vector<PolePair> pairs;
  for (const cd& p : complex_poles)
    pairs.push_back({-2.0 * p.real(), std::norm(p), std::abs(p)});
  std::sort(real_poles.begin(), real_poles.end());
  for (size_t i = 0; i + 1 < real_poles.size(); i += 2) {
    double r1 = real_poles[i], r2 = real_poles[i + 1];
    pairs.push_back({-(r1 + r2), r1 * r2, std::max(std::abs(r1), std::abs(r2))});
  }
  // Well-damped sections first; the near-unit-circle resonances come last.
  std::sort(pairs.begin(), pairs.end(), [](const PolePair& a, const PolePair& b) {
    return a.radius < b.radius || (a.radius == b.radius && a.a1 < b.a1);
  });

  // Every section takes one zero at z=1 and one at z=-1, so each numerator is
  // scale * (z^2 - 1). Spreading the gain evenly keeps the sections balanced.
  const int nsec = static_cast<int>(pairs.size());
  double section_scale = std::pow(zpk.gain, 1.0 / nsec);
  std::vector<Sos> sos(nsec);
  for (int i = 0; i < nsec; ++i) {
    sos[i].b0 = section_scale;
    sos[i].b1 = 0.0;
    sos[i].b2 = -section_scale;
    sos[i].a1 = pairs[i].a1;
    sos[i].a2 = pairs[i].a2;
    if (!(pairs[i].radius < 1.0))
      fail_data("butterworth_bandpass_sos: unstable section, check cutoffs");
  }
  return sos;
}

std::vector<double> sosfilt(const std::vector<Sos>& sections,
                            std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  // Steady-state initial conditions for a constant input equal to the first
  // sample; suppresses the cascade's startup transient.
  double carry = y.empty() ? 0.0 : y.front();
  for (const Sos& s : sections) {
    double h1_den = 1.0 + s.a1 + s.a2;
    double h1 = h1_den != 0.0 ? (s.b0 + s.b1 + s.b2) / h1_den : 0.0;
    double z1 = (h1 - s.b0) * carry;
    double z2 = (s.b2 - s.a2 * h1) * carry;
    for (double& v : y) {
      double in = v;
      double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
    carry *= h1;
  }
  return y;
}

std::vector<double> bandpass_filter_zero_phase(std::span<const double> signal,
                                               int sample_rate_hz,
                                               const BandpassConfig& cfg) {
  if (sample_rate_hz < 200)
    fail_data("bandpass_filter_zero_phase: sample rate must be >= 200 Hz");
  const int pad = 3 * 2 * cfg.order;  // 3x the bandpass pole count
  const int64_t n = static_cast<int64_t>(signal.size());
  if (n <= pad)
    fail_data("bandpass_filter_zero_phase: signal too short (" +
              std::to_string(n) + " samples, need > " + std::to_string(pad) + ")");
  for (double v : signal)
    if (!std::isfinite(v))
      fail_data("bandpass_filter_zero_phase: non-finite input sample");

  const std::vector<Sos> sos =
      butterworth_bandpass_sos(cfg, static_cast<double>(sample_rate_hz));

  // Odd reflection about both endpoints.
  std::vector<double> ext(n + 2 * pad);
  for (int i = 0; i < pad; ++i)
    ext[i] = 2.0 * signal[0] - signal[pad - i];
  for (int64_t i = 0; i < n; ++i) ext[pad + i] = signal[i];
  for (int i = 0; i < pad; ++i)
    ext[pad + n + i] = 2.0 * signal[n - 1] - signal[n - 2 - i];

  std::vector<double> fwd = sosfilt(sos, ext);
  std::reverse(fwd.begin(), fwd.end());
  std::vector<double> bwd = sosfilt(sos, fwd);
  std::reverse(bwd.begin(), bwd.end());

  return std::vector<double>(bwd.begin() + pad, bwd.begin() + pad + n);
}

namespace {

// Indices of local maxima; plateaus report their midpoint.
std::vector<int64_t> local_maxima(std::span<const double> x) {
  std::vector<int64_t> out;
  const int64_t n = static_cast<int64_t>(x.size());
  int64_t i = 1;
  while (i + 1 < n) {
    if (x[i] > x[i - 1]) {
      int64_t j = i;
      while (j + 1 < n && x[j + 1] == x[i]) ++j;
      if (j + 1 < n && x[j + 1] < x[i]) {
        out.push_back((i + j) / 2);
        i = j + 1;
        continue;
      }
      i = j + 1;
      continue;
    }
    ++i;
  }
  return out;
}

double peak_prominence(std::span<const double> x, int64_t p) {
  const int64_t n = static_cast<int64_t>(x.size());
  double left_min = x[p];
  for (int64_t i = p - 1; i >= 0; --i) {
    if (x[i] > x[p]) break;
    left_min = std::min(left_min, x[i]);
  }
  double right_min = x[p];
  for (int64_t i = p + 1; i < n; ++i) {
    if (x[i] > x[p]) break;
    right_min = std::min(right_min, x[i]);
  }
  return x[p] - std::max(left_min, right_min);
}

double robust_amplitude(std::span<const double> x) {
  std::vector<double> tmp(x.begin(), x.end());
  auto mid = tmp.begin() + tmp.size() / 2;
  std::nth_element(tmp.begin(), mid, tmp.end());
  double med = *mid;
  for (double& v : tmp) v = std::abs(v - med);
  std::nth_element(tmp.begin(), mid, tmp.end());
  // 1.4826 * MAD estimates the standard deviation for Gaussian data.
  return 1.4826 * *mid;
}

}  // namespace

std::vector<int64_t> detect_r_peaks(std::span<const double> ecg_lead,
                                    int sample_rate_hz, const PeakConfig& cfg) {
  if (ecg_lead.size() < 3) return {};
  const int64_t min_dist = std::max<int64_t>(
      1, static_cast<int64_t>(std::llround(cfg.refractory_ms * sample_rate_hz / 1000.0)));

  std::vector<int64_t> cand = local_maxima(ecg_lead);
  if (cand.empty()) return {};

  const double floor = cfg.prominence_scale * robust_amplitude(ecg_lead);
  std::vector<int64_t> strong;
  for (int64_t p : cand)
    if (peak_prominence(ecg_lead, p) >= floor) strong.push_back(p);
  if (strong.empty()) return {};

  // Enforce the refractory distance, tallest peak first.
  std::vector<size_t> order(strong.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    double ya = ecg_lead[strong[a]], yb = ecg_lead[strong[b]];
    return ya > yb || (ya == yb && strong[a] < strong[b]);
  });
  std::vector<char> keep(strong.size(), 1);
  for (size_t oi : order) {
    if (!keep[oi]) continue;
    for (size_t j = oi + 1; j < strong.size() && strong[j] - strong[oi] < min_dist; ++j)
      keep[j] = 0;
    for (size_t j = oi; j-- > 0 && strong[oi] - strong[j] < min_dist;)
      keep[j] = 0;
  }
  std::vector<int64_t> out;
  for (size_t i = 0; i < strong.size(); ++i)
    if (keep[i]) out.push_back(strong[i]);
  return out;
}

std::vector<BeatPair> segment_beats(const Recording& rec,
                                    const std::vector<int64_t>& peaks,
                                    int half_window, size_t* dropped) {
  const int64_t L = rec.num_samples();
  std::vector<BeatPair> out;
  size_t skipped = 0;
  int ordinal = 0;
  for (int64_t p : peaks) {
    if (p < half_window || p + half_window > L) {
      ++skipped;
      continue;
    }
    BeatPair pair;
    pair.egm.channels = rec.egm.middleCols(p - half_window, 2 * half_window);
    pair.ecg.channels = rec.ecg.middleCols(p - half_window, 2 * half_window);
    pair.egm.r_peak_index = pair.ecg.r_peak_index = p;
    pair.egm.beat_index = pair.ecg.beat_index = ordinal;
    pair.egm.sample_rate_hz = pair.ecg.sample_rate_hz = rec.sample_rate_hz;
    out.push_back(std::move(pair));
    ++ordinal;
  }
  if (dropped) *dropped = skipped;
  return out;
}

Beat downsample_by_two(const Beat& beat) {
  const int t = beat.num_samples();
  if (t % 2 != 0) fail_data("downsample_by_two: input length must be even");
  Beat out = beat;
  out.channels.resize(beat.num_channels(), t / 2);
  for (int c = 0; c < beat.num_channels(); ++c)
    for (int i = 0; i < t / 2; ++i) out.channels(c, i) = beat.channels(c, 2 * i);
  out.sample_rate_hz = beat.sample_rate_hz / 2;
  return out;
}

Beat center_normalize(const Beat& beat) {
  Beat out = beat;
  for (int c = 0; c < out.num_channels(); ++c) {
    auto row = out.channels.row(c);
    row.array() -= row.mean();
    double norm = row.norm();
    if (norm > 1e-300)
      row /= norm;
    else
      row.setZero();
  }
  return out;
}

BeatPairSet preprocess_recording(const Recording& recording,
                                 const PreprocessConfig& cfg,
                                 const LabelTable* truth_labels) {
  if (recording.ecg.rows() != kEcgLeads || recording.egm.rows() != kEgmLeads)
    fail_data("preprocess_recording: expected 12 ECG and 5 EGM channels");
  if (recording.ecg.cols() != recording.egm.cols())
    fail_data("preprocess_recording: ECG and EGM lengths differ");
  if (!recording.ecg.allFinite() || !recording.egm.allFinite())
    fail_data("preprocess_recording: non-finite sample in recording");
  if (cfg.peaks.lead < 0 || cfg.peaks.lead >= kEcgLeads)
    fail_data("preprocess_recording: peak detection lead out of range");

  const int64_t L = recording.num_samples();
  Recording filtered = recording;
  parallel_for(kEcgLeads + kEgmLeads, [&](int64_t ch) {
    Eigen::MatrixXd& mat = ch < kEcgLeads ? filtered.ecg : filtered.egm;
    int row = ch < kEcgLeads ? static_cast<int>(ch) : static_cast<int>(ch - kEcgLeads);
    std::vector<double> buf(L);
    for (int64_t i = 0; i < L; ++i) buf[i] = mat(row, i);
    std::vector<double> f =
        bandpass_filter_zero_phase(buf, recording.sample_rate_hz, cfg.band);
    for (int64_t i = 0; i < L; ++i) mat(row, i) = f[i];
  });

  std::vector<double> lead(L);
  for (int64_t i = 0; i < L; ++i) lead[i] = filtered.ecg(cfg.peaks.lead, i);
  std::vector<int64_t> peaks =
      detect_r_peaks(lead, recording.sample_rate_hz, cfg.peaks);

  BeatPairSet set;
  set.patient_id = recording.patient_id;
  std::vector<BeatPair> pairs =
      segment_beats(filtered, peaks, cfg.half_window, &set.dropped);
  if (pairs.empty())
    fail_data("preprocess_recording: no usable beats in patient '" +
              recording.patient_id + "'");

  set.pairs.reserve(pairs.size());
  set.labels.reserve(pairs.size());
  for (BeatPair& p : pairs) {
    BeatPair cooked;
    cooked.egm = center_normalize(downsample_by_two(p.egm));
    cooked.ecg = center_normalize(downsample_by_two(p.ecg));
    BeatLabel label = BeatLabel::Unlabeled;
    if (truth_labels) {
      int64_t best = std::numeric_limits<int64_t>::max();
      for (const LabelRow& row : *truth_labels) {
        int64_t d = std::abs(row.r_peak_index - cooked.ecg.r_peak_index);
        if (d < best) {
          best = d;
          label = row.label;
        }
      }
      if (best > cfg.label_match_tolerance) label = BeatLabel::Unlabeled;
    }
    set.labels.push_back(label);
    set.pairs.push_back(std::move(cooked));
  }
  set.sample_rate_hz = recording.sample_rate_hz / 2;
  return set;
}

}  // namespace nrced
