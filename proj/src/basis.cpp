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

#include "nrced/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nrced/stats.hpp"

namespace nrced {

using Eigen::MatrixXd;
using Eigen::VectorXd;

RegressionBasis::RegressionBasis(MatrixXd w_last, VectorXd bias, double lambda,
                                 std::string source)
    : w_(std::move(w_last)), bias_(std::move(bias)), lambda_(lambda),
      source_(std::move(source)) {
  if (w_.rows() != w_.cols()) fail_data("regression basis: W must be square");
  if (bias_.size() != w_.rows())
    fail_data("regression basis: bias length does not match W");
  if (!w_.allFinite() || !bias_.allFinite())
    fail_data("regression basis: non-finite weights");
  if (!(lambda_ > 0.0)) fail_data("regression basis: lambda must be positive");
}

void RegressionBasis::factorize() {
  if (factored_) return;
  MatrixXd gram = w_.transpose() * w_;
  gram.diagonal().array() += lambda_;
  llt_.compute(gram);
  if (llt_.info() != Eigen::Success)
    fail_data("regression basis: Cholesky factorization failed");
  factored_ = true;
}

VectorXd RegressionBasis::solve(const VectorXd& x) {
  if (x.size() != w_.rows()) fail_data("ridge solve: target length mismatch");
  if (!x.allFinite()) fail_data("ridge solve: non-finite target");
  factorize();
  return llt_.solve(w_.transpose() * x);
}

MatrixXd RegressionBasis::solve_many(const MatrixXd& xs) {
  if (xs.rows() != w_.rows()) fail_data("ridge solve: target length mismatch");
  if (!xs.allFinite()) fail_data("ridge solve: non-finite target");
  factorize();
  return llt_.solve(w_.transpose() * xs);
}

double RegressionBasis::normal_equation_residual(const VectorXd& beta,
                                                 const VectorXd& x) const {
  VectorXd rhs = w_.transpose() * x;
  VectorXd lhs = w_.transpose() * (w_ * beta - x) + lambda_ * beta;
  double denom = rhs.norm();
  return denom > 0.0 ? lhs.norm() / denom : lhs.norm();
}

VectorXd ridge_solve(const MatrixXd& w, const VectorXd& x, double lambda) {
  if (w.rows() != x.size()) fail_data("ridge_solve: shape mismatch");
  if (!w.allFinite() || !x.allFinite()) fail_data("ridge_solve: non-finite input");
  if (lambda < 0.0) fail_data("ridge_solve: lambda must be >= 0");
  MatrixXd gram = w.transpose() * w;
  gram.diagonal().array() += lambda;
  Eigen::LDLT<MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) fail_data("ridge_solve: factorization failed");
  return ldlt.solve(w.transpose() * x);
}

RidgeReconstruction ridge_reconstruct(RegressionBasis& basis,
                                      const BeatDataset& beats,
                                      const STFTConfig& cfg) {
  if (beats.beats.empty()) fail_data("ridge_reconstruct: empty dataset");
  const int d = basis.dim();
  const int out_channels = beats.ecg_channels();
  if (out_channels * cfg.num_freqs * cfg.num_frames != d)
    fail_data("ridge_reconstruct: basis dimension does not match the beats");

  const int64_t n = static_cast<int64_t>(beats.size());
  MatrixXd targets(d, n);
  for (int64_t i = 0; i < n; ++i) {
    const TFTensor& t = beats.beats[i].ecg;
    for (int k = 0; k < d; ++k) targets(k, i) = t.data[k];
  }
  // The basis models the linear part of the final layer; its bias is
  // removed from the targets before fitting and added back after.
  MatrixXd centered = targets.colwise() - basis.bias();
  MatrixXd betas = basis.solve_many(centered);

  RidgeReconstruction out;
  out.betas.rows = betas.transpose();
  out.betas.r_peaks.reserve(n);
  out.betas.labels.reserve(n);
  for (const BeatEntry& e : beats.beats) {
    out.betas.r_peaks.push_back(e.r_peak_index);
    out.betas.labels.push_back(e.label);
  }

  MatrixXd recon = basis.w_last() * betas;
  recon.colwise() += basis.bias();

  out.per_beat_rho.resize(n);
  out.normal_eq_residuals.resize(n);
  for (int64_t i = 0; i < n; ++i) {
    out.normal_eq_residuals[i] =
        basis.normal_equation_residual(betas.col(i), centered.col(i));
    TFTensor rt = unflatten(std::span<const double>(recon.col(i).data(), d),
                            out_channels, cfg);
    TFTensor tt = unflatten(std::span<const double>(targets.col(i).data(), d),
                            out_channels, cfg);
    Beat rb = tf_inverse(rt, cfg);
    Beat tb = tf_inverse(tt, cfg);
    std::vector<double> a(rb.channels.data(), rb.channels.data() + rb.channels.size());
    std::vector<double> b(tb.channels.data(), tb.channels.data() + tb.channels.size());
    out.per_beat_rho[i] = pearson_corr(a, b);
  }
  out.mean_rho = mean_of(out.per_beat_rho);
  return out;
}

MatrixXd column_to_time_domain(const RegressionBasis& basis, int column,
                               const STFTConfig& cfg) {
  if (column < 0 || column >= basis.dim())
    fail_data("column_to_time_domain: column index out of range");
  const int channels = basis.dim() / (cfg.num_freqs * cfg.num_frames);
  VectorXd col = basis.w_last().col(column);
  TFTensor t = unflatten(std::span<const double>(col.data(), col.size()),
                         channels, cfg);
  return tf_inverse(t, cfg).channels;
}

double near_zero_fraction(const MatrixXd& w, double tol_scale) {
  const double tol = tol_scale * w.cwiseAbs().maxCoeff();
  int64_t below = 0;
  const double* p = w.data();
  for (int64_t i = 0; i < w.size(); ++i)
    if (std::abs(p[i]) < tol) ++below;
  return static_cast<double>(below) / static_cast<double>(w.size());
}

MatrixXd cross_corr_matrix(const MatrixXd& beta_rows) {
  const int64_t n = beta_rows.rows();
  if (n < 2) fail_data("cross_corr_matrix: need at least two beats");

  // Center and normalize each row, then correlations reduce to dot products.
  MatrixXd hat = beta_rows;
  std::vector<char> degenerate(n, 0);
  for (int64_t i = 0; i < n; ++i) {
    hat.row(i).array() -= hat.row(i).mean();
    double norm = hat.row(i).norm();
    if (norm > 0.0)
      hat.row(i) /= norm;
    else
      degenerate[i] = 1;
  }

  MatrixXd ccm(n, n);
  for (int64_t i = 0; i < n; ++i) {
    ccm(i, i) = 1.0;
    for (int64_t j = i + 1; j < n; ++j) {
      double v = (degenerate[i] || degenerate[j]) ? 0.0 : hat.row(i).dot(hat.row(j));
      v = std::clamp(v, -1.0, 1.0);
      ccm(i, j) = v;
      ccm(j, i) = v;
    }
  }
  return ccm;
}

MatrixXd rescale_unit(const MatrixXd& ccm) {
  return (ccm.array() + 1.0) / 2.0;
}

int pick_reference_beat(const MatrixXd& ccm) {
  if (ccm.rows() < 1) fail_data("pick_reference_beat: empty matrix");
  int best = 0;
  double best_mean = -2.0;
  for (int64_t i = 0; i < ccm.rows(); ++i) {
    double m = ccm.row(i).mean();
    if (m > best_mean) {
      best_mean = m;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<int> classify_beats(const MatrixXd& ccm01, int reference_index,
                                double threshold) {
  if (reference_index < 0 || reference_index >= ccm01.rows())
    fail_data("classify_beats: reference index out of range");
  std::vector<int> labels(ccm01.rows(), 0);
  for (int64_t i = 0; i < ccm01.rows(); ++i)
    labels[i] = ccm01(i, reference_index) < threshold ? 1 : 0;
  labels[reference_index] = 0;
  return labels;
}

RocCurve roc_curve(const std::vector<double>& scores,
                   const std::vector<int>& positive_labels) {
  if (scores.size() != positive_labels.size() || scores.empty())
    fail_data("roc_curve: scores and labels must be equal-length and nonempty");
  int64_t pos = 0, neg = 0;
  for (int l : positive_labels) {
    if (l == 1)
      ++pos;
    else if (l == 0)
      ++neg;
    else
      fail_data("roc_curve: labels must be 0 or 1");
  }
  if (pos == 0 || neg == 0)
    fail_data("roc_curve: both classes must be present");

  // Positive prediction means score < threshold; sweep ascending scores so
  // both rates grow monotonically from (0,0) to (1,1).
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  RocCurve curve;
  curve.points.push_back({scores[order.front()], 0.0, 0.0});
  int64_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    // Everything strictly below the next threshold becomes positive.
    while (i < order.size() && scores[order[i]] == s) {
      if (positive_labels[order[i]] == 1)
        ++tp;
      else
        ++fp;
      ++i;
    }
    const double next_threshold =
        i < order.size() ? scores[order[i]] : std::nextafter(s, s + 1.0);
    curve.points.push_back({next_threshold,
                            static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos)});
  }

  double auc = 0.0;
  for (size_t k = 1; k < curve.points.size(); ++k) {
    const RocPoint& a = curve.points[k - 1];
    const RocPoint& b = curve.points[k];
    auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  curve.auc = auc;
  return curve;
}

}  // namespace nrced
