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
#include <filesystem>
#include <string>
#include <vector>

#include "nrced/basis.hpp"

namespace nrced {

// Static SVG emission. Every plot gets a sibling CSV carrying the raw
// numbers behind it; none of the outputs embeds a timestamp, so reruns are
// byte-identical.

/// Per-lead overlay of a true and a reconstructed beat, one panel per lead.
/// CSV columns: lead,sample,truth,reconstruction.
void write_overlay_plot(const std::filesystem::path& svg_path,
                        const Eigen::MatrixXd& truth,
                        const Eigen::MatrixXd& recon,
                        const std::vector<std::string>& lead_names);

/// Horizontal-category bar chart (e.g. mean correlation per patient).
void write_bar_chart(const std::filesystem::path& svg_path,
                     const std::vector<std::string>& labels,
                     const std::vector<double>& values,
                     const std::string& title);

struct HeatmapOptions {
  bool log_abs = false;     // plot log10 |v| (weight-matrix style)
  bool diverging = false;   // symmetric blue-white-red around zero
  int max_cells = 128;      // downsample above this many rows/cols
  std::string title;
};

/// Downsampled heatmap; the sibling CSV holds the plotted (downsampled)
/// grid values.
void write_heatmap(const std::filesystem::path& svg_path,
                   const Eigen::MatrixXd& values, const HeatmapOptions& opt);

/// ROC curve with its AUC. CSV columns: threshold,fpr,tpr.
void write_roc_plot(const std::filesystem::path& svg_path, const RocCurve& curve);

void write_roc_csv(const std::filesystem::path& csv_path, const RocCurve& curve);
RocCurve read_roc_csv(const std::filesystem::path& csv_path);

void write_matrix_csv(const std::filesystem::path& csv_path,
                      const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& csv_path);

}  // namespace nrced
