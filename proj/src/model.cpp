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

#include "nrced/model.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "nrced/io.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nrced {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

// Batch columns below this size are not worth spawning threads for.
constexpr int kParallelBatchThreshold = 16;

void batched_for(int64_t n, const std::function<void(int64_t)>& fn) {
  if (n < kParallelBatchThreshold) {
    for (int64_t i = 0; i < n; ++i) fn(i);
  } else {
    parallel_for(n, fn);
  }
}

struct BlockSpec {
  std::string name;
  std::vector<int> shape;
  enum class Fill { FanInUniform, Zero, One } fill = Fill::Zero;
  int fan_in = 0;

  int64_t size() const {
    int64_t s = 1;
    for (int d : shape) s *= d;
    return s;
  }
};

struct Dims {
  int c = 0, h = 0, w = 0;  // spatial meaning; flat stages use c*h*w with h=w=1
  int flat() const { return c * h * w; }
};

// Context shared by stage calls.
struct FwdCtx {
  ModelParams* params;
  Mode mode;
  Rng* rng;
  const ModelConfig* cfg;
};

struct BwdCtx {
  const ModelParams* params;
  Gradients* grads;
  const ModelConfig* cfg;
};

class Stage {
public:
  virtual ~Stage() = default;
  virtual void forward(FwdCtx& ctx, const MatrixXd& x, MatrixXd& y,
                       TraceSlot& slot) const = 0;
  virtual void backward(BwdCtx& ctx, const TraceSlot& slot, const MatrixXd& dy,
                        MatrixXd& dx) const = 0;
};

// ---- Fully connected: y = W x + b ----

class FcStage : public Stage {
public:
  FcStage(int wi, int bi, int in, int out) : wi_(wi), bi_(bi), in_(in), out_(out) {}

  void forward(FwdCtx& ctx, const MatrixXd& x, MatrixXd& y,
               TraceSlot& slot) const override {
    auto w = Eigen::Map<const MatrixXd>(ctx.params->blocks[wi_].values.data(),
                                        out_, in_);
    const VectorXd& b = ctx.params->blocks[bi_].values;
    y.resize(out_, x.cols());
    y.noalias() = w * x;
    y.colwise() += b;
    slot.x = x;
  }

  void backward(BwdCtx& ctx, const TraceSlot& slot, const MatrixXd& dy,
                MatrixXd& dx) const override {
    auto w = Eigen::Map<const MatrixXd>(ctx.params->blocks[wi_].values.data(),
                                        out_, in_);
    auto dw = Eigen::Map<MatrixXd>(ctx.grads->g[wi_].data(), out_, in_);
    dw.noalias() += dy * slot.x.transpose();
    ctx.grads->g[bi_] += dy.rowwise().sum();
    dx.noalias() = w.transpose() * dy;
  }

private:
  int wi_, bi_, in_, out_;
};

// ---- Convolution machinery ----
//
// Both convolution flavors run as GEMMs over im2col patch matrices. The
// patch matrix P has one column per (sample, pixel) and one row per
// (channel, kernel tap): P((c*k + u)*k + v, n*HW + p) = x[n, c, p + (u,v) -
// pad], zero outside the image. Every gradient of the stride-1 same-padding
// pair reduces to a product of P-like matrices with a (rows x cols*k*k)
// kernel view.

namespace convdet {

using RowMajorMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

MatrixXd im2col(const MatrixXd& x, Dims d, int k, int pad) {
  const int64_t n = x.cols();
  const int hw = d.h * d.w;
  MatrixXd p(static_cast<int64_t>(d.c) * k * k, n * hw);
  batched_for(n, [&](int64_t s) {
    const double* xs = x.col(s).data();
    for (int i = 0; i < d.h; ++i) {
      for (int j = 0; j < d.w; ++j) {
        double* col = p.col(s * hw + i * d.w + j).data();
        for (int c = 0; c < d.c; ++c) {
          const double* base = xs + static_cast<int64_t>(c) * hw;
          for (int u = 0; u < k; ++u) {
            const int a = i + u - pad;
            const bool row_ok = a >= 0 && a < d.h;
            for (int v = 0; v < k; ++v) {
              const int b = j + v - pad;
              *col++ = (row_ok && b >= 0 && b < d.w) ? base[a * d.w + b] : 0.0;
            }
          }
        }
      }
    }
  });
  return p;
}

// Channel-major view of a batch: (C x N*HW), column (n*HW + p) = x[n, :, p].
MatrixXd channel_cols(const MatrixXd& x, int c, int hw) {
  const int64_t n = x.cols();
  MatrixXd out(c, n * hw);
  batched_for(n, [&](int64_t s) {
    const double* xs = x.col(s).data();
    for (int p = 0; p < hw; ++p) {
      double* col = out.col(s * hw + p).data();
      for (int ch = 0; ch < c; ++ch) col[ch] = xs[static_cast<int64_t>(ch) * hw + p];
    }
  });
  return out;
}

// Inverse of channel_cols; optionally adds a per-channel bias.
void channel_scatter(const MatrixXd& cols, MatrixXd& x, int c, int hw,
                     const double* bias) {
  const int64_t n = x.cols();
  batched_for(n, [&](int64_t s) {
    double* xs = x.col(s).data();
    for (int p = 0; p < hw; ++p) {
      const double* col = cols.col(s * hw + p).data();
      for (int ch = 0; ch < c; ++ch)
        xs[static_cast<int64_t>(ch) * hw + p] = col[ch] + (bias ? bias[ch] : 0.0);
    }
  });
}

}  // namespace convdet

// Stride-1 convolution with zero padding keeping the spatial size.
// Weights are (c_out, c_in, k, k) row-major.
class ConvStage : public Stage {
public:
  ConvStage(int wi, int bi, Dims in, int cout, int ksz)
      : wi_(wi), bi_(bi), in_(in), cout_(cout), k_(ksz), pad_(ksz / 2) {}

  void forward(FwdCtx& ctx, const MatrixXd& x, MatrixXd& y,
               TraceSlot& slot) const override {
    using convdet::RowMajorMat;
    const int hw = in_.h * in_.w;
    auto wmat = Eigen::Map<const RowMajorMat>(
        ctx.params->blocks[wi_].values.data(), cout_, in_.c * k_ * k_);
    slot.aux = convdet::im2col(x, in_, k_, pad_);  // reused for dW
    MatrixXd ycols = wmat * slot.aux;
    y.resize(static_cast<int64_t>(cout_) * hw, x.cols());
    convdet::channel_scatter(ycols, y, cout_, hw,
                             ctx.params->blocks[bi_].values.data());
    slot.x = x;
  }

  void backward(BwdCtx& ctx, const TraceSlot& slot, const MatrixXd& dy,
                MatrixXd& dx) const override {
    using convdet::RowMajorMat;
    const int hw = in_.h * in_.w;
    const double* wv = ctx.params->blocks[wi_].values.data();

    MatrixXd dycols = convdet::channel_cols(dy, cout_, hw);
    auto dwmat = Eigen::Map<RowMajorMat>(ctx.grads->g[wi_].data(), cout_,
                                         in_.c * k_ * k_);
    dwmat.noalias() += dycols * slot.aux.transpose();
    ctx.grads->g[bi_] += dycols.rowwise().sum();

    // Input gradient: convolution of dy with the flipped, channel-swapped
    // kernel.
    MatrixXd wflip(in_.c, static_cast<int64_t>(cout_) * k_ * k_);
    for (int ci = 0; ci < in_.c; ++ci)
      for (int co = 0; co < cout_; ++co)
        for (int u = 0; u < k_; ++u)
          for (int v = 0; v < k_; ++v)
            wflip(ci, (static_cast<int64_t>(co) * k_ + u) * k_ + v) =
                wv[((static_cast<int64_t>(co) * in_.c + ci) * k_ + (k_ - 1 - u)) * k_ +
                   (k_ - 1 - v)];
    Dims dyd{cout_, in_.h, in_.w};
    MatrixXd pdy = convdet::im2col(dy, dyd, k_, pad_);
    MatrixXd dxcols = wflip * pdy;
    dx.resize(x_rows(), dy.cols());
    convdet::channel_scatter(dxcols, dx, in_.c, hw, nullptr);
  }

private:
  int64_t x_rows() const { return static_cast<int64_t>(in_.c) * in_.h * in_.w; }
  int wi_, bi_;
  Dims in_;
  int cout_, k_, pad_;
};

// Transposed convolution, stride 1, same spatial size; the adjoint of
// ConvStage. Weights are (c_in, c_out, k, k) row-major.
class TConvStage : public Stage {
public:
  TConvStage(int wi, int bi, Dims in, int cout, int ksz)
      : wi_(wi), bi_(bi), in_(in), cout_(cout), k_(ksz), pad_(ksz / 2) {}

  void forward(FwdCtx& ctx, const MatrixXd& x, MatrixXd& y,
               TraceSlot& slot) const override {
    const int hw = in_.h * in_.w;
    const double* wv = ctx.params->blocks[wi_].values.data();
    // Equivalent direct convolution kernel: flipped taps, swapped channels.
    MatrixXd weq(cout_, static_cast<int64_t>(in_.c) * k_ * k_);
    for (int co = 0; co < cout_; ++co)
      for (int ci = 0; ci < in_.c; ++ci)
        for (int u = 0; u < k_; ++u)
          for (int v = 0; v < k_; ++v)
            weq(co, (static_cast<int64_t>(ci) * k_ + u) * k_ + v) =
                wv[((static_cast<int64_t>(ci) * cout_ + co) * k_ + (k_ - 1 - u)) * k_ +
                   (k_ - 1 - v)];
    MatrixXd p = convdet::im2col(x, in_, k_, pad_);
    MatrixXd ycols = weq * p;
    y.resize(static_cast<int64_t>(cout_) * hw, x.cols());
    convdet::channel_scatter(ycols, y, cout_, hw,
                             ctx.params->blocks[bi_].values.data());
    slot.x = x;
  }

  void backward(BwdCtx& ctx, const TraceSlot& slot, const MatrixXd& dy,
                MatrixXd& dx) const override {
    using convdet::RowMajorMat;
    const int hw = in_.h * in_.w;
    auto wmat = Eigen::Map<const RowMajorMat>(
        ctx.params->blocks[wi_].values.data(), in_.c,
        static_cast<int64_t>(cout_) * k_ * k_);

    Dims dyd{cout_, in_.h, in_.w};
    MatrixXd pdy = convdet::im2col(dy, dyd, k_, pad_);

    // dK(ci, (co,u,v)) = sum_(n,p) x[n,ci,p] * dy[n,co,p+(u,v)-pad].
    MatrixXd xcols = convdet::channel_cols(slot.x, in_.c, hw);
    auto dwmat = Eigen::Map<RowMajorMat>(ctx.grads->g[wi_].data(), in_.c,
                                         static_cast<int64_t>(cout_) * k_ * k_);
    dwmat.noalias() += xcols * pdy.transpose();

    MatrixXd dycols = convdet::channel_cols(dy, cout_, hw);
    ctx.grads->g[bi_] += dycols.rowwise().sum();

    MatrixXd dxcols = wmat * pdy;
    dx.resize(slot.x.rows(), dy.cols());
    convdet::channel_scatter(dxcols, dx, in_.c, hw, nullptr);
  }

private:
  int wi_, bi_;
  Dims in_;
  int cout_, k_, pad_;
};

// ---- 2x2 max pooling, stride 2 ----

class MaxPoolStage : public Stage {
public:
  explicit MaxPoolStage(Dims in)
      : in_(in), oh_(in.h / 2), ow_(in.w / 2),
        rows_in_(static_cast<int64_t>(in.c) * in.h * in.w) {}

  void forward(FwdCtx&, const MatrixXd& x, MatrixXd& y,
               TraceSlot& slot) const override {
    const int64_t n = x.cols();
    const int64_t out_rows = static_cast<int64_t>(in_.c) * oh_ * ow_;
    y.resize(out_rows, n);
    slot.idx.assign(static_cast<size_t>(out_rows) * n, 0);
    batched_for(n, [&](int64_t s) {
      const double* xs = x.col(s).data();
      double* ys = y.col(s).data();
      int32_t* idx = slot.idx.data() + s * out_rows;
      for (int c = 0; c < in_.c; ++c) {
        const double* base = xs + static_cast<int64_t>(c) * in_.h * in_.w;
        for (int i = 0; i < oh_; ++i) {
          for (int j = 0; j < ow_; ++j) {
            int best = (2 * i) * in_.w + 2 * j;
            double bv = base[best];
            const int cand[3] = {(2 * i) * in_.w + 2 * j + 1,
                                 (2 * i + 1) * in_.w + 2 * j,
                                 (2 * i + 1) * in_.w + 2 * j + 1};
            for (int t : cand) {
              if (base[t] > bv) {
                bv = base[t];
                best = t;
              }
            }
            int64_t o = (static_cast<int64_t>(c) * oh_ + i) * ow_ + j;
            ys[o] = bv;
            idx[o] = static_cast<int32_t>(c * in_.h * in_.w + best);
          }
        }
      }
    });
  }

  void backward(BwdCtx&, const TraceSlot& slot, const MatrixXd& dy,
                MatrixXd& dx) const override {
    const int64_t n = dy.cols();
    const int64_t out_rows = dy.rows();
    dx.setZero(rows_in_, n);
    batched_for(n, [&](int64_t s) {
      const double* dys = dy.col(s).data();
      double* dxs = dx.col(s).data();
      const int32_t* idx = slot.idx.data() + s * out_rows;
      for (int64_t o = 0; o < out_rows; ++o) dxs[idx[o]] += dys[o];
    });
  }

private:
  Dims in_;
  int oh_, ow_;
  int64_t rows_in_;
};

// ---- Nearest-neighbor 2x upsampling ----

class UpsampleStage : public Stage {
public:
  explicit UpsampleStage(Dims in) : in_(in), oh_(in.h * 2), ow_(in.w * 2) {}

  void forward(FwdCtx&, const MatrixXd& x, MatrixXd& y,
               TraceSlot&) const override {
    const int64_t n = x.cols();
    y.resize(static_cast<int64_t>(in_.c) * oh_ * ow_, n);
    batched_for(n, [&](int64_t s) {
      const double* xs = x.col(s).data();
      double* ys = y.col(s).data();
      for (int c = 0; c < in_.c; ++c) {
        const double* base = xs + static_cast<int64_t>(c) * in_.h * in_.w;
        double* ob = ys + static_cast<int64_t>(c) * oh_ * ow_;
        for (int i = 0; i < oh_; ++i)
          for (int j = 0; j < ow_; ++j)
            ob[i * ow_ + j] = base[(i / 2) * in_.w + j / 2];
      }
    });
  }

  void backward(BwdCtx&, const TraceSlot&, const MatrixXd& dy,
                MatrixXd& dx) const override {
    const int64_t n = dy.cols();
    dx.setZero(static_cast<int64_t>(in_.c) * in_.h * in_.w, n);
    batched_for(n, [&](int64_t s) {
      const double* dys = dy.col(s).data();
      double* dxs = dx.col(s).data();
      for (int c = 0; c < in_.c; ++c) {
        const double* ob = dys + static_cast<int64_t>(c) * oh_ * ow_;
        double* base = dxs + static_cast<int64_t>(c) * in_.h * in_.w;
        for (int i = 0; i < oh_; ++i)
          for (int j = 0; j < ow_; ++j)
            base[(i / 2) * in_.w + j / 2] += ob[i * ow_ + j];
      }
    });
  }

private:
  Dims in_;
  int oh_, ow_;
};

// ---- Batch normalization ----
// groups_ == c for spatial inputs (normalize per channel over batch and
// space) and == feature count for flat inputs (spatial_ == 1).

class BatchNormStage : public Stage {
public:
  BatchNormStage(int scale_i, int shift_i, int mean_i, int var_i, int groups,
                 int spatial)
      : scale_i_(scale_i), shift_i_(shift_i), mean_i_(mean_i), var_i_(var_i),
        groups_(groups), spatial_(spatial) {}

  void forward(FwdCtx& ctx, const MatrixXd& x, MatrixXd& y,
               TraceSlot& slot) const override {
    const VectorXd& scale = ctx.params->blocks[scale_i_].values;
    const VectorXd& shift = ctx.params->blocks[shift_i_].values;
    const int64_t n = x.cols();
    const double eps = ctx.cfg->bn_eps;
    y.resize(x.rows(), n);

    VectorXd mean(groups_), var(groups_);
    if (ctx.mode == Mode::Train) {
      const double m = static_cast<double>(n * spatial_);
      for (int g = 0; g < groups_; ++g) {
        auto block = x.middleRows(static_cast<int64_t>(g) * spatial_, spatial_);
        mean[g] = block.sum() / m;
        var[g] = (block.array() - mean[g]).square().sum() / m;
      }
      VectorXd& run_mean = ctx.params->state[mean_i_].values;
      VectorXd& run_var = ctx.params->state[var_i_].values;
      const double mom = ctx.cfg->bn_momentum;
      run_mean = mom * run_mean + (1.0 - mom) * mean;
      run_var = mom * run_var + (1.0 - mom) * var;
    } else {
      mean = ctx.params->state[mean_i_].values;
      var = ctx.params->state[var_i_].values;
    }

    slot.aux.resize(x.rows(), n);  // normalized values
    for (int g = 0; g < groups_; ++g) {
      const int64_t off = static_cast<int64_t>(g) * spatial_;
      const double istd = 1.0 / std::sqrt(var[g] + eps);
      auto xhat = slot.aux.middleRows(off, spatial_);
      xhat = (x.middleRows(off, spatial_).array() - mean[g]) * istd;
      y.middleRows(off, spatial_) = scale[g] * xhat.array() + shift[g];
    }
    slot.mean = mean;
    slot.var = var;
  }

  void backward(BwdCtx& ctx, const TraceSlot& slot, const MatrixXd& dy,
                MatrixXd& dx) const override {
    const VectorXd& scale = ctx.params->blocks[scale_i_].values;
    VectorXd& dscale = ctx.grads->g[scale_i_];
    VectorXd& dshift = ctx.grads->g[shift_i_];
    const MatrixXd& xhat = slot.aux;
    const int64_t n = dy.cols();
    const double m = static_cast<double>(n * spatial_);
    const double eps = ctx.cfg->bn_eps;

    dx.resize(dy.rows(), n);
    for (int g = 0; g < groups_; ++g) {
      const int64_t off = static_cast<int64_t>(g) * spatial_;
      auto dyb = dy.middleRows(off, spatial_);
      auto hb = xhat.middleRows(off, spatial_);
      const double istd = 1.0 / std::sqrt(slot.var[g] + eps);
      const double sum_dy = dyb.sum();
      const double sum_dyh = dyb.cwiseProduct(hb).sum();
      dscale[g] += sum_dyh;
      dshift[g] += sum_dy;
      const double sd = sum_dy * scale[g];
      const double sdh = sum_dyh * scale[g];
      dx.middleRows(off, spatial_) =
          istd * (scale[g] * dyb.array() - sd / m - hb.array() * sdh / m);
    }
  }

private:
  int scale_i_, shift_i_, mean_i_, var_i_;
  int groups_, spatial_;
};

// ---- Tanh ----

class TanhStage : public Stage {
public:
  void forward(FwdCtx&, const MatrixXd& x, MatrixXd& y,
               TraceSlot& slot) const override {
    y = x.array().tanh();
    slot.y = y;
  }
  void backward(BwdCtx&, const TraceSlot& slot, const MatrixXd& dy,
                MatrixXd& dx) const override {
    dx = dy.array() * (1.0 - slot.y.array().square());
  }
};

// ---- Inverted dropout ----

class DropoutStage : public Stage {
public:
  void forward(FwdCtx& ctx, const MatrixXd& x, MatrixXd& y,
               TraceSlot& slot) const override {
    const double rate = ctx.cfg->dropout_rate;
    if (ctx.mode == Mode::Eval || rate == 0.0) {
      y = x;
      return;
    }
    if (!ctx.rng) fail_data("dropout in train mode requires an rng");
    const double keep = 1.0 - rate;
    slot.aux.resize(x.rows(), x.cols());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double* mv = slot.aux.data();
    for (int64_t i = 0; i < slot.aux.size(); ++i)
      mv[i] = unit(*ctx.rng) >= rate ? 1.0 / keep : 0.0;
    y = x.cwiseProduct(slot.aux);
  }

  void backward(BwdCtx& ctx, const TraceSlot& slot, const MatrixXd& dy,
                MatrixXd& dx) const override {
    if (ctx.cfg->dropout_rate == 0.0 || slot.aux.size() == 0) {
      dx = dy;
      return;
    }
    dx = dy.cwiseProduct(slot.aux);
  }
};

}  // namespace

// ---- Loss ----

namespace {

// d(rho)/d(a) for one column pair; zero when either side is constant.
void pearson_column_grad(const Eigen::Ref<const VectorXd>& a,
                         const Eigen::Ref<const VectorXd>& b, VectorXd& out,
                         double scale) {
  VectorXd ac = a.array() - a.mean();
  VectorXd bc = b.array() - b.mean();
  double p = ac.norm(), q = bc.norm();
  if (p <= 0.0 || q <= 0.0) {
    out.setZero(a.size());
    return;
  }
  double rho = ac.dot(bc) / (p * q);
  out = scale * (bc / (p * q) - (rho / (p * p)) * ac);
}

}  // namespace

double batch_loss(const MatrixXd& outputs, const MatrixXd& targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
    fail_data("batch_loss: shape mismatch between outputs and targets");
  if (outputs.cols() == 0) fail_data("batch_loss: empty batch");
  double acc = 0.0;
  for (int64_t s = 0; s < outputs.cols(); ++s) {
    VectorXd ac = outputs.col(s).array() - outputs.col(s).mean();
    VectorXd bc = targets.col(s).array() - targets.col(s).mean();
    double denom = ac.norm() * bc.norm();
    // A constant column contributes zero; non-finite data must propagate so
    // the training loop can detect divergence.
    double rho;
    if (std::isnan(denom))
      rho = std::numeric_limits<double>::quiet_NaN();
    else
      rho = denom > 0.0 ? ac.dot(bc) / denom : 0.0;
    acc += -rho;
  }
  return acc / static_cast<double>(outputs.cols());
}

MatrixXd batch_loss_backward(const MatrixXd& outputs, const MatrixXd& targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
    fail_data("batch_loss_backward: shape mismatch");
  MatrixXd d(outputs.rows(), outputs.cols());
  const double scale = -1.0 / static_cast<double>(outputs.cols());
  VectorXd col;
  for (int64_t s = 0; s < outputs.cols(); ++s) {
    pearson_column_grad(outputs.col(s), targets.col(s), col, scale);
    d.col(s) = col;
  }
  return d;
}

// ---- Network ----

struct Network::Impl {
  ModelConfig cfg;
  std::vector<BlockSpec> blocks;
  std::vector<BlockSpec> state;
  std::vector<std::unique_ptr<Stage>> stages;
  int final_fc_stage = -1;
  int final_w_block = -1;
  int final_b_block = -1;

  int add_block(BlockSpec spec) {
    blocks.push_back(std::move(spec));
    return static_cast<int>(blocks.size()) - 1;
  }
  int add_state(BlockSpec spec) {
    state.push_back(std::move(spec));
    return static_cast<int>(state.size()) - 1;
  }

  void add_bn(const std::string& name, int groups, int spatial) {
    int sc = add_block({name + ".scale", {groups}, BlockSpec::Fill::One, 0});
    int sh = add_block({name + ".shift", {groups}, BlockSpec::Fill::Zero, 0});
    int rm = add_state({name + ".run_mean", {groups}, BlockSpec::Fill::Zero, 0});
    int rv = add_state({name + ".run_var", {groups}, BlockSpec::Fill::One, 0});
    stages.push_back(std::make_unique<BatchNormStage>(sc, sh, rm, rv, groups, spatial));
  }

  void add_fc(const std::string& name, int in, int out) {
    int wi = add_block({name + ".weight", {out, in}, BlockSpec::Fill::FanInUniform, in});
    int bi = add_block({name + ".bias", {out}, BlockSpec::Fill::Zero, 0});
    stages.push_back(std::make_unique<FcStage>(wi, bi, in, out));
    final_fc_stage = static_cast<int>(stages.size()) - 1;
    final_w_block = wi;
    final_b_block = bi;
  }

  void build() {
    const int k = cfg.conv_kernel;
    Dims d{cfg.in_channels, cfg.height, cfg.width};

    for (int s = 0; s < cfg.conv_stage_count(); ++s) {
      const int cout = cfg.conv_channel_widths[s];
      const std::string name = "enc.conv" + std::to_string(s + 1);
      int wi = add_block({name + ".weight",
                          {cout, d.c, k, k},
                          BlockSpec::Fill::FanInUniform,
                          d.c * k * k});
      int bi = add_block({name + ".bias", {cout}, BlockSpec::Fill::Zero, 0});
      stages.push_back(std::make_unique<ConvStage>(wi, bi, d, cout, k));
      d.c = cout;
      add_bn("enc.bn" + std::to_string(s + 1), d.c, d.h * d.w);
      stages.push_back(std::make_unique<TanhStage>());
      stages.push_back(std::make_unique<DropoutStage>());
      stages.push_back(std::make_unique<MaxPoolStage>(d));
      d.h /= 2;
      d.w /= 2;
    }

    const int conv_flat = d.flat();
    int cur = conv_flat;
    int fc_id = 0;
    auto fc_block = [&](int out) {
      const std::string name = "fc" + std::to_string(++fc_id);
      add_fc(name, cur, out);
      add_bn(name + ".bn", out, 1);
      stages.push_back(std::make_unique<TanhStage>());
      stages.push_back(std::make_unique<DropoutStage>());
      cur = out;
    };
    for (int w : cfg.enc_fc_widths) fc_block(w);
    fc_block(cfg.bottleneck_dim);
    for (int w : cfg.dec_fc_widths) fc_block(w);
    fc_block(conv_flat);

    // Back to spatial (free reshape), then two upsample + tconv stages.
    const int stages_n = cfg.conv_stage_count();
    for (int s = 0; s < stages_n; ++s) {
      stages.push_back(std::make_unique<UpsampleStage>(d));
      d.h *= 2;
      d.w *= 2;
      const int cout =
          s + 1 < stages_n ? cfg.conv_channel_widths[stages_n - 2 - s] : cfg.out_channels;
      const std::string name = "dec.tconv" + std::to_string(s + 1);
      int wi = add_block({name + ".weight",
                          {d.c, cout, k, k},
                          BlockSpec::Fill::FanInUniform,
                          d.c * k * k});
      int bi = add_block({name + ".bias", {cout}, BlockSpec::Fill::Zero, 0});
      stages.push_back(std::make_unique<TConvStage>(wi, bi, d, cout, k));
      d.c = cout;
      add_bn("dec.bn" + std::to_string(s + 1), d.c, d.h * d.w);
      stages.push_back(std::make_unique<TanhStage>());
      stages.push_back(std::make_unique<DropoutStage>());
    }

    if (d.flat() != cfg.output_dim())
      fail_data("model build: decoder output dims inconsistent");
    add_fc("final", cfg.output_dim(), cfg.output_dim());
  }
};

void ModelConfig::validate() const {
  if (in_channels < 1 || out_channels < 1)
    fail_data("model config: channel counts must be positive");
  if (height % 4 != 0 || width % 4 != 0)
    fail_data("model config: height and width must be divisible by 4 (two 2x2 pools)");
  if (conv_channel_widths.size() != 2)
    fail_data("model config: expected exactly two conv stage widths");
  for (int w : conv_channel_widths)
    if (w < 1) fail_data("model config: conv widths must be positive");
  if (conv_kernel < 1 || conv_kernel % 2 == 0)
    fail_data("model config: conv kernel must be odd");
  if (bottleneck_dim < 1 ||
      bottleneck_dim >= std::min(input_dim(), output_dim()))
    fail_data("model config: bottleneck must be below both data dimensions");
  for (int w : enc_fc_widths)
    if (w < 1) fail_data("model config: encoder fc widths must be positive");
  for (int w : dec_fc_widths)
    if (w < 1) fail_data("model config: decoder fc widths must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    fail_data("model config: dropout rate must lie in [0, 1)");
  if (learning_rate <= 0.0) fail_data("model config: learning rate must be positive");
  if (batch_size < 1) fail_data("model config: batch size must be positive");
  if (bn_momentum < 0.0 || bn_momentum >= 1.0)
    fail_data("model config: batch-norm momentum must lie in [0, 1)");
}

json ModelConfig::to_json() const {
  json j;
  j["in_channels"] = in_channels;
  j["out_channels"] = out_channels;
  j["height"] = height;
  j["width"] = width;
  j["conv_channel_widths"] = conv_channel_widths;
  j["conv_kernel"] = conv_kernel;
  j["enc_fc_widths"] = enc_fc_widths;
  j["dec_fc_widths"] = dec_fc_widths;
  j["bottleneck_dim"] = bottleneck_dim;
  j["dropout_rate"] = dropout_rate;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["bn_momentum"] = bn_momentum;
  j["bn_eps"] = bn_eps;
  j["seed"] = seed;
  return j;
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  static const char* keys[] = {"in_channels", "out_channels", "height", "width",
                               "conv_channel_widths", "conv_kernel",
                               "enc_fc_widths", "dec_fc_widths", "bottleneck_dim",
                               "dropout_rate", "learning_rate", "batch_size",
                               "bn_momentum", "bn_eps", "seed"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) fail_data("model config: unknown key '" + it.key() + "'");
  }
  if (j.contains("in_channels")) c.in_channels = j["in_channels"].get<int>();
  if (j.contains("out_channels")) c.out_channels = j["out_channels"].get<int>();
  if (j.contains("height")) c.height = j["height"].get<int>();
  if (j.contains("width")) c.width = j["width"].get<int>();
  if (j.contains("conv_channel_widths"))
    c.conv_channel_widths = j["conv_channel_widths"].get<std::vector<int>>();
  if (j.contains("conv_kernel")) c.conv_kernel = j["conv_kernel"].get<int>();
  if (j.contains("enc_fc_widths"))
    c.enc_fc_widths = j["enc_fc_widths"].get<std::vector<int>>();
  if (j.contains("dec_fc_widths"))
    c.dec_fc_widths = j["dec_fc_widths"].get<std::vector<int>>();
  if (j.contains("bottleneck_dim")) c.bottleneck_dim = j["bottleneck_dim"].get<int>();
  if (j.contains("dropout_rate")) c.dropout_rate = j["dropout_rate"].get<double>();
  if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
  if (j.contains("bn_momentum")) c.bn_momentum = j["bn_momentum"].get<double>();
  if (j.contains("bn_eps")) c.bn_eps = j["bn_eps"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
  c.validate();
  return c;
}

int64_t ModelParams::parameter_count() const {
  int64_t n = 0;
  for (const ParamBlock& b : blocks) n += b.size();
  return n;
}

Network::Network(ModelConfig cfg) : impl_(std::make_unique<Impl>()) {
  cfg.validate();
  impl_->cfg = std::move(cfg);
  impl_->build();
}

Network::~Network() = default;
Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;

const ModelConfig& Network::config() const { return impl_->cfg; }

ModelParams Network::init_params(uint64_t seed) const {
  ModelParams p;
  Rng rng(seed);
  auto materialize = [&](const BlockSpec& spec) {
    ParamBlock b;
    b.name = spec.name;
    b.shape = spec.shape;
    b.values.resize(spec.size());
    switch (spec.fill) {
      case BlockSpec::Fill::FanInUniform: {
        double bound = std::sqrt(6.0 / static_cast<double>(spec.fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (int64_t i = 0; i < b.values.size(); ++i) b.values[i] = u(rng);
        break;
      }
      case BlockSpec::Fill::Zero:
        b.values.setZero();
        break;
      case BlockSpec::Fill::One:
        b.values.setOnes();
        break;
    }
    return b;
  };
  for (const BlockSpec& spec : impl_->blocks) p.blocks.push_back(materialize(spec));
  for (const BlockSpec& spec : impl_->state) p.state.push_back(materialize(spec));
  p.step = 0;
  return p;
}

ForwardTrace Network::forward(ModelParams& params, const MatrixXd& input,
                              Mode mode, Rng* rng) const {
  if (input.rows() != impl_->cfg.input_dim())
    fail_data("forward: input has " + std::to_string(input.rows()) +
              " features, expected " + std::to_string(impl_->cfg.input_dim()));
  if (params.blocks.size() != impl_->blocks.size())
    fail_data("forward: parameter layout does not match this network");

  ForwardTrace trace;
  trace.mode = mode;
  trace.slots.resize(impl_->stages.size());

  FwdCtx ctx{&params, mode, rng, &impl_->cfg};
  MatrixXd cur = input;
  MatrixXd next;
  for (size_t i = 0; i < impl_->stages.size(); ++i) {
    if (static_cast<int>(i) == impl_->final_fc_stage) trace.penultimate = cur;
    impl_->stages[i]->forward(ctx, cur, next, trace.slots[i]);
    cur.swap(next);
  }
  trace.output = cur;
  return trace;
}

Gradients Network::zero_gradients() const {
  Gradients g;
  g.g.reserve(impl_->blocks.size());
  for (const BlockSpec& spec : impl_->blocks)
    g.g.push_back(VectorXd::Zero(spec.size()));
  return g;
}

Gradients Network::backward(const ModelParams& params, const ForwardTrace& trace,
                            const MatrixXd& targets) const {
  if (trace.mode != Mode::Train)
    fail_data("backward: trace must come from a train-mode forward");
  if (trace.slots.size() != impl_->stages.size())
    fail_data("backward: trace does not match this network");

  Gradients grads = zero_gradients();
  BwdCtx ctx{&params, &grads, &impl_->cfg};
  MatrixXd dcur = batch_loss_backward(trace.output, targets);
  MatrixXd dnext;
  for (size_t i = impl_->stages.size(); i-- > 0;) {
    impl_->stages[i]->backward(ctx, trace.slots[i], dcur, dnext);
    dcur.swap(dnext);
  }
  return grads;
}

Eigen::Map<const MatrixXd> Network::last_layer_weight(const ModelParams& p) const {
  const int d = impl_->cfg.output_dim();
  return Eigen::Map<const MatrixXd>(p.blocks[impl_->final_w_block].values.data(), d, d);
}

const VectorXd& Network::last_layer_bias(const ModelParams& p) const {
  return p.blocks[impl_->final_b_block].values;
}

std::vector<float> Network::params_to_payload(const ModelParams& p) const {
  std::vector<float> out;
  int64_t total = 0;
  for (const ParamBlock& b : p.blocks) total += b.size();
  for (const ParamBlock& b : p.state) total += b.size();
  out.reserve(total);
  for (const ParamBlock& b : p.blocks)
    for (int64_t i = 0; i < b.size(); ++i)
      out.push_back(static_cast<float>(b.values[i]));
  for (const ParamBlock& b : p.state)
    for (int64_t i = 0; i < b.size(); ++i)
      out.push_back(static_cast<float>(b.values[i]));
  return out;
}

ModelParams Network::params_from_payload(const std::vector<float>& payload) const {
  ModelParams p = init_params(0);
  size_t pos = 0;
  auto fill = [&](ParamBlock& b) {
    if (pos + static_cast<size_t>(b.size()) > payload.size())
      fail_data("checkpoint payload too short for block '" + b.name + "'");
    for (int64_t i = 0; i < b.size(); ++i)
      b.values[i] = static_cast<double>(payload[pos++]);
  };
  for (ParamBlock& b : p.blocks) fill(b);
  for (ParamBlock& b : p.state) fill(b);
  if (pos != payload.size()) fail_data("checkpoint payload has trailing values");
  return p;
}

json Network::block_shapes_json() const {
  json arr = json::array();
  for (const BlockSpec& b : impl_->blocks)
    arr.push_back({{"name", b.name}, {"shape", b.shape}});
  for (const BlockSpec& b : impl_->state)
    arr.push_back({{"name", b.name}, {"shape", b.shape}, {"state", true}});
  return arr;
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               const AdamHyper& hp) {
  if (grads.g.size() != params.blocks.size())
    fail_data("adam_step: gradient layout does not match parameters");
  if (state.m.empty()) {
    for (const ParamBlock& b : params.blocks) {
      state.m.push_back(VectorXd::Zero(b.size()));
      state.v.push_back(VectorXd::Zero(b.size()));
    }
    state.t = 0;
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t));
  const double inv_bc2_sqrt = 1.0 / std::sqrt(bc2);
  for (size_t i = 0; i < params.blocks.size(); ++i) {
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    const double* g = grads.g[i].data();
    double* p = params.blocks[i].values.data();
    const int64_t len = state.m[i].size();
    if (grads.g[i].size() != len) fail_data("adam_step: block size mismatch");
    // Single fused pass: the optimizer state is large, so memory traffic
    // matters more than arithmetic here.
    for (int64_t j = 0; j < len; ++j) {
      m[j] = hp.beta1 * m[j] + (1.0 - hp.beta1) * g[j];
      v[j] = hp.beta2 * v[j] + (1.0 - hp.beta2) * g[j] * g[j];
      p[j] -= hp.lr * (m[j] / bc1) / (std::sqrt(v[j]) * inv_bc2_sqrt + hp.eps);
    }
  }
}

void set_compute_threads(int n) {
  set_thread_cap(n);
  int cap = thread_cap();
  Eigen::setNbThreads(cap);
#ifdef _OPENMP
  omp_set_num_threads(cap);
#endif
}

void save_checkpoint(const std::filesystem::path& path, const Network& net,
                     const ModelParams& params, uint64_t seed) {
  json header;
  header["format"] = "nrced-checkpoint";
  header["version"] = 1;
  header["config"] = net.config().to_json();
  header["blocks"] = net.block_shapes_json();
  header["seed"] = seed;
  header["step"] = params.step;
  write_checkpoint_file(path, header.dump(), net.params_to_payload(params));
}

std::pair<ModelConfig, ModelParams> load_checkpoint(
    const std::filesystem::path& path) {
  auto [header_text, payload] = read_checkpoint_file(path);
  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::parse_error& e) {
    fail_data(path.string() + ": bad checkpoint header: " + e.what());
  }
  if (!header.contains("format") || header["format"] != "nrced-checkpoint")
    fail_data(path.string() + ": not a checkpoint file");
  ModelConfig cfg = ModelConfig::from_json(header["config"]);
  Network net(cfg);
  ModelParams params = net.params_from_payload(payload);
  params.step = header.value("step", 0);
  return {cfg, params};
}

}  // namespace nrced
