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

#include "nrced/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "nrced/io.hpp"

namespace nrced {

using Eigen::MatrixXd;

namespace {

std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string svg_header(int width, int height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" viewBox=\"0 0 " + std::to_string(width) + " " +
         std::to_string(height) + "\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string polyline(const std::vector<std::pair<double, double>>& pts,
                     const std::string& color, double stroke = 1.0) {
  std::string s = "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
                  svg_num(stroke) + "\" points=\"";
  for (const auto& [x, y] : pts) {
    s += svg_num(x);
    s += ',';
    s += svg_num(y);
    s += ' ';
  }
  s += "\"/>\n";
  return s;
}

std::string text_at(double x, double y, const std::string& msg, int size = 11) {
  return "<text x=\"" + svg_num(x) + "\" y=\"" + svg_num(y) +
         "\" font-family=\"monospace\" font-size=\"" + std::to_string(size) +
         "\">" + msg + "</text>\n";
}

// Max-magnitude pooling down to at most max_cells per side.
MatrixXd downsample_abs_max(const MatrixXd& m, int max_cells) {
  const int64_t r = m.rows(), c = m.cols();
  if (r <= max_cells && c <= max_cells) return m;
  const int64_t br = (r + max_cells - 1) / max_cells;
  const int64_t bc = (c + max_cells - 1) / max_cells;
  const int64_t nr = (r + br - 1) / br, nc = (c + bc - 1) / bc;
  MatrixXd out(nr, nc);
  for (int64_t i = 0; i < nr; ++i) {
    for (int64_t j = 0; j < nc; ++j) {
      double best = 0.0;
      bool found = false;
      for (int64_t a = i * br; a < std::min(r, (i + 1) * br); ++a)
        for (int64_t b = j * bc; b < std::min(c, (j + 1) * bc); ++b)
          if (!found || std::abs(m(a, b)) > std::abs(best)) {
            best = m(a, b);
            found = true;
          }
      out(i, j) = best;
    }
  }
  return out;
}

std::string color_hex(int r, int g, int b) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

void write_overlay_plot(const std::filesystem::path& svg_path,
                        const MatrixXd& truth, const MatrixXd& recon,
                        const std::vector<std::string>& lead_names) {
  if (truth.rows() != recon.rows() || truth.cols() != recon.cols())
    fail_data("overlay plot: truth/reconstruction shape mismatch");
  const int leads = static_cast<int>(truth.rows());
  const int T = static_cast<int>(truth.cols());
  const int cols = leads > 6 ? 4 : 3;
  const int rows = (leads + cols - 1) / cols;
  const int pw = 220, ph = 120, margin = 14;
  const int width = cols * (pw + margin) + margin;
  const int height = rows * (ph + margin) + margin;

  double lo = std::min(truth.minCoeff(), recon.minCoeff());
  double hi = std::max(truth.maxCoeff(), recon.maxCoeff());
  if (hi - lo < 1e-12) hi = lo + 1.0;

  std::string svg = svg_header(width, height);
  for (int l = 0; l < leads; ++l) {
    const int gx = margin + (l % cols) * (pw + margin);
    const int gy = margin + (l / cols) * (ph + margin);
    svg += "<rect x=\"" + std::to_string(gx) + "\" y=\"" + std::to_string(gy) +
           "\" width=\"" + std::to_string(pw) + "\" height=\"" + std::to_string(ph) +
           "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
    auto to_pt = [&](int t, double v) {
      double x = gx + (static_cast<double>(t) / (T - 1)) * pw;
      double y = gy + ph - (v - lo) / (hi - lo) * ph;
      return std::make_pair(x, y);
    };
    std::vector<std::pair<double, double>> pt, pr;
    pt.reserve(T);
    pr.reserve(T);
    for (int t = 0; t < T; ++t) {
      pt.push_back(to_pt(t, truth(l, t)));
      pr.push_back(to_pt(t, recon(l, t)));
    }
    svg += polyline(pt, "#d62728", 1.2);
    svg += polyline(pr, "#1f77b4", 1.0);
    std::string name = l < static_cast<int>(lead_names.size())
                           ? lead_names[l]
                           : "lead" + std::to_string(l + 1);
    svg += text_at(gx + 4, gy + 12, name);
  }
  svg += "</svg>\n";
  atomic_write_text(svg_path, svg);

  std::string csv = "lead,sample,truth,reconstruction\n";
  for (int l = 0; l < leads; ++l) {
    std::string name = l < static_cast<int>(lead_names.size())
                           ? lead_names[l]
                           : "lead" + std::to_string(l + 1);
    for (int t = 0; t < T; ++t) {
      csv += name;
      csv += ',';
      csv += std::to_string(t);
      csv += ',';
      csv += format_double(truth(l, t));
      csv += ',';
      csv += format_double(recon(l, t));
      csv += '\n';
    }
  }
  std::filesystem::path csv_path = svg_path;
  csv_path.replace_extension(".csv");
  atomic_write_text(csv_path, csv);
}

void write_bar_chart(const std::filesystem::path& svg_path,
                     const std::vector<std::string>& labels,
                     const std::vector<double>& values,
                     const std::string& title) {
  if (labels.size() != values.size() || labels.empty())
    fail_data("bar chart: labels and values must be equal-length and nonempty");
  const int n = static_cast<int>(values.size());
  const int bw = 46, gap = 16, margin = 42;
  const int width = margin * 2 + n * (bw + gap);
  const int height = 260;
  double hi = *std::max_element(values.begin(), values.end());
  hi = std::max(hi, 1.0);

  std::string svg = svg_header(width, height);
  svg += text_at(margin, 18, title, 13);
  const int base = height - 40;
  const int span = base - 40;
  for (int i = 0; i < n; ++i) {
    double h = std::max(0.0, values[i]) / hi * span;
    int x = margin + i * (bw + gap);
    svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + svg_num(base - h) +
           "\" width=\"" + std::to_string(bw) + "\" height=\"" + svg_num(h) +
           "\" fill=\"#1f77b4\"/>\n";
    svg += text_at(x, base + 14, labels[i], 10);
    svg += text_at(x, base - h - 4, svg_num(values[i]), 10);
  }
  svg += "</svg>\n";
  atomic_write_text(svg_path, svg);

  std::string csv = "label,value\n";
  for (int i = 0; i < n; ++i)
    csv += labels[i] + "," + format_double(values[i]) + "\n";
  std::filesystem::path csv_path = svg_path;
  csv_path.replace_extension(".csv");
  atomic_write_text(csv_path, csv);
}

void write_heatmap(const std::filesystem::path& svg_path, const MatrixXd& values,
                   const HeatmapOptions& opt) {
  if (values.size() == 0) fail_data("heatmap: empty matrix");
  MatrixXd grid = downsample_abs_max(values, opt.max_cells);
  MatrixXd shown = grid;
  if (opt.log_abs) {
    for (int64_t i = 0; i < shown.size(); ++i)
      shown.data()[i] = std::log10(std::abs(shown.data()[i]) + 1e-12);
  }

  const int64_t nr = shown.rows(), nc = shown.cols();
  const int cell = std::max<int>(2, 512 / static_cast<int>(std::max(nr, nc)));
  const int margin = 24;
  const int width = static_cast<int>(nc) * cell + 2 * margin;
  const int height = static_cast<int>(nr) * cell + 2 * margin + 16;

  double lo = shown.minCoeff(), hi = shown.maxCoeff();
  if (opt.diverging) {
    double m = std::max(std::abs(lo), std::abs(hi));
    lo = -m;
    hi = m;
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;

  std::string svg = svg_header(width, height);
  if (!opt.title.empty()) svg += text_at(margin, 16, opt.title, 12);
  for (int64_t i = 0; i < nr; ++i) {
    for (int64_t j = 0; j < nc; ++j) {
      double u = (shown(i, j) - lo) / (hi - lo);
      std::string color;
      if (opt.diverging) {
        // blue (low) - white - red (high)
        double c = 2.0 * u - 1.0;
        int r = static_cast<int>(255 * std::min(1.0, 1.0 + c));
        int b = static_cast<int>(255 * std::min(1.0, 1.0 - c));
        int g = static_cast<int>(255 * (1.0 - std::abs(c)));
        color = color_hex(r, g, b);
      } else {
        int v = static_cast<int>(255 * u);
        color = color_hex(v, v, v);
      }
      svg += "<rect x=\"" + std::to_string(margin + j * cell) + "\" y=\"" +
             std::to_string(margin + 16 + i * cell) + "\" width=\"" +
             std::to_string(cell) + "\" height=\"" + std::to_string(cell) +
             "\" fill=\"" + color + "\"/>\n";
    }
  }
  svg += "</svg>\n";
  atomic_write_text(svg_path, svg);

  std::filesystem::path csv_path = svg_path;
  csv_path.replace_extension(".csv");
  write_matrix_csv(csv_path, grid);
}

void write_roc_csv(const std::filesystem::path& csv_path, const RocCurve& curve) {
  std::string csv = "threshold,fpr,tpr\n";
  for (const RocPoint& p : curve.points) {
    csv += format_double(p.threshold);
    csv += ',';
    csv += format_double(p.fpr);
    csv += ',';
    csv += format_double(p.tpr);
    csv += '\n';
  }
  atomic_write_text(csv_path, csv);
}

RocCurve read_roc_csv(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) fail_data("cannot open '" + csv_path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("threshold,fpr,tpr", 0) != 0)
    fail_data("'" + csv_path.string() + "': not a roc csv");
  RocCurve curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    RocPoint p;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &p.threshold, &p.fpr, &p.tpr) != 3)
      fail_data("'" + csv_path.string() + "': malformed row");
    curve.points.push_back(p);
  }
  for (size_t k = 1; k < curve.points.size(); ++k)
    curve.auc += (curve.points[k].fpr - curve.points[k - 1].fpr) *
                 (curve.points[k].tpr + curve.points[k - 1].tpr) / 2.0;
  return curve;
}

void write_roc_plot(const std::filesystem::path& svg_path, const RocCurve& curve) {
  const int size = 320, margin = 36;
  std::string svg = svg_header(size + 2 * margin, size + 2 * margin);
  svg += "<rect x=\"" + std::to_string(margin) + "\" y=\"" + std::to_string(margin) +
         "\" width=\"" + std::to_string(size) + "\" height=\"" + std::to_string(size) +
         "\" fill=\"none\" stroke=\"#999999\"/>\n";
  auto to_pt = [&](double fpr, double tpr) {
    return std::make_pair(margin + fpr * size, margin + size - tpr * size);
  };
  svg += polyline({to_pt(0, 0), to_pt(1, 1)}, "#bbbbbb", 1.0);
  std::vector<std::pair<double, double>> pts;
  pts.reserve(curve.points.size());
  for (const RocPoint& p : curve.points) pts.push_back(to_pt(p.fpr, p.tpr));
  svg += polyline(pts, "#d62728", 1.6);
  char auc_buf[48];
  std::snprintf(auc_buf, sizeof(auc_buf), "AUC = %.4f", curve.auc);
  svg += text_at(margin + 8, margin + 16, auc_buf, 12);
  svg += text_at(margin + size / 2 - 30, margin + size + 24, "false positive rate");
  svg += "</svg>\n";
  atomic_write_text(svg_path, svg);

  std::filesystem::path csv_path = svg_path;
  csv_path.replace_extension(".csv");
  write_roc_csv(csv_path, curve);
}

void write_matrix_csv(const std::filesystem::path& csv_path, const MatrixXd& m) {
  std::string csv;
  csv.reserve(static_cast<size_t>(m.size()) * 12);
  for (int64_t i = 0; i < m.rows(); ++i) {
    for (int64_t j = 0; j < m.cols(); ++j) {
      if (j) csv += ',';
      csv += format_double(m(i, j));
    }
    csv += '\n';
  }
  atomic_write_text(csv_path, csv);
}

MatrixXd read_matrix_csv(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) fail_data("cannot open '" + csv_path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    size_t start = 0;
    while (true) {
      size_t comma = line.find(',', start);
      std::string cell = line.substr(start, comma == std::string::npos
                                                ? std::string::npos
                                                : comma - start);
      row.push_back(std::stod(cell));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      fail_data("'" + csv_path.string() + "': ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail_data("'" + csv_path.string() + "': empty matrix");
  MatrixXd m(rows.size(), rows.front().size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

}  // namespace nrced
