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

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nrced/experiment.hpp"
#include "nrced/tf.hpp"

namespace nrced {

/// The trained final-layer weight matrix treated as an overcomplete basis of
/// the output time-frequency space, with the ridge penalty used to fit
/// coefficients. One Cholesky factorization of (W^T W + lambda I) is shared
/// by every per-beat solve.
class RegressionBasis {
public:
  RegressionBasis(Eigen::MatrixXd w_last, Eigen::VectorXd bias,
                  double lambda = 1e-7, std::string source = {});

  const Eigen::MatrixXd& w_last() const { return w_; }
  const Eigen::VectorXd& bias() const { return bias_; }
  double lambda() const { return lambda_; }
  const std::string& source() const { return source_; }
  int dim() const { return static_cast<int>(w_.rows()); }

  /// Solves (W^T W + lambda I) beta = W^T x. Factorizes on first use.
  Eigen::VectorXd solve(const Eigen::VectorXd& x);
  Eigen::MatrixXd solve_many(const Eigen::MatrixXd& xs);

  /// Relative residual of the normal equations for a solved beta, computed
  /// through W itself: ||W^T (W beta - x) + lambda beta|| / ||W^T x||.
  double normal_equation_residual(const Eigen::VectorXd& beta,
                                  const Eigen::VectorXd& x) const;

private:
  void factorize();

  Eigen::MatrixXd w_;
  Eigen::VectorXd bias_;
  double lambda_;
  std::string source_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  bool factored_ = false;
};

/// One-shot dense ridge solve (small systems, tests, no shared factor).
Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& w, const Eigen::VectorXd& x,
                            double lambda);

/// Solved coefficient rows, one beat per row, in temporal order.
struct BetaMatrix {
  Eigen::MatrixXd rows;  // N x D
  std::vector<uint64_t> r_peaks;
  std::vector<BeatLabel> labels;

  int64_t count() const { return rows.rows(); }
};

struct RidgeReconstruction {
  BetaMatrix betas;
  std::vector<double> per_beat_rho;        // time-domain, per beat
  std::vector<double> normal_eq_residuals;
  double mean_rho = 0.0;
};

/// Fits every target beat against the basis (bias subtracted first),
/// reconstructs W beta + bias, inverts to time domain and scores Pearson
/// correlation per beat.
RidgeReconstruction ridge_reconstruct(RegressionBasis& basis,
                                      const BeatDataset& beats,
                                      const STFTConfig& cfg);

/// One basis column mapped back to a leads x time waveform (the feature the
/// column encodes).
Eigen::MatrixXd column_to_time_domain(const RegressionBasis& basis, int column,
                                      const STFTConfig& cfg);

/// Fraction of entries with |w| below tol_scale * max|w|.
double near_zero_fraction(const Eigen::MatrixXd& w, double tol_scale = 1e-4);

/// Pairwise Pearson correlation of the coefficient rows. Exactly symmetric
/// with unit diagonal.
Eigen::MatrixXd cross_corr_matrix(const Eigen::MatrixXd& beta_rows);

/// Affine rescale of correlations from [-1, 1] to [0, 1].
Eigen::MatrixXd rescale_unit(const Eigen::MatrixXd& ccm);

/// The most typical beat: the row with maximal mean correlation to all rows.
int pick_reference_beat(const Eigen::MatrixXd& ccm);

/// Labels beat n atypical (1) when its rescaled correlation with the
/// reference beat falls below the threshold; the reference itself stays 0.
std::vector<int> classify_beats(const Eigen::MatrixXd& ccm01, int reference_index,
                                double threshold);

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;  // monotone from (0,0) to (1,1)
  double auc = 0.0;
};

/// ROC for a "positive when score < threshold" classifier, swept over every
/// distinct score. AUC by the trapezoidal rule. Errors unless both classes
/// are present.
RocCurve roc_curve(const std::vector<double>& scores,
                   const std::vector<int>& positive_labels);

}  // namespace nrced
