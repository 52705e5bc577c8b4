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
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "nrced/common.hpp"

namespace nrced {

// The network maps a (in_channels, height, width) time-frequency image to a
// (out_channels, height, width) one through an encoder (two conv stages with
// 2x2 max pooling, then fully connected layers down to the bottleneck) and a
// decoder (fully connected layers up, two upsample + transposed-conv stages,
// and a final square fully connected layer). Batch normalization, tanh and
// dropout follow every layer except the final one, which stays purely linear
// so the output factors exactly as W_last * g + b_last.
struct ModelConfig {
  int in_channels = 10;
  int out_channels = 24;
  int height = 16;  // frequency bins
  int width = 16;   // time frames
  std::vector<int> conv_channel_widths{32, 64};
  int conv_kernel = 3;
  std::vector<int> enc_fc_widths{512, 256};
  std::vector<int> dec_fc_widths{512};
  int bottleneck_dim = 128;
  double dropout_rate = 0.1;
  double learning_rate = 5e-3;
  int batch_size = 64;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;
  uint64_t seed = 0;

  int conv_stage_count() const {
    return static_cast<int>(conv_channel_widths.size());
  }
  int fc_layer_count() const {
    return static_cast<int>(enc_fc_widths.size()) + 1 +
           static_cast<int>(dec_fc_widths.size()) + 1 + 1;
  }
  int input_dim() const { return in_channels * height * width; }
  int output_dim() const { return out_channels * height * width; }

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

enum class Mode { Train, Eval };

struct ParamBlock {
  std::string name;
  std::vector<int> shape;
  Eigen::VectorXd values;

  int64_t size() const { return values.size(); }
};

/// All learnable parameters plus batch-norm running statistics, in declared
/// layer order. The layout is fixed by the Network that created them.
struct ModelParams {
  std::vector<ParamBlock> blocks;  // weights, biases, batch-norm scale/shift
  std::vector<ParamBlock> state;   // batch-norm running mean/var
  int64_t step = 0;

  int64_t parameter_count() const;
};

struct Gradients {
  std::vector<Eigen::VectorXd> g;  // aligned with ModelParams::blocks
};

struct TraceSlot {
  Eigen::MatrixXd x;    // stage input, when backward needs it
  Eigen::MatrixXd y;    // stage output, when backward needs it
  Eigen::MatrixXd aux;  // normalized values / dropout mask
  Eigen::VectorXd mean, var;
  std::vector<int32_t> idx;  // max-pool argmax offsets
};

/// Activations are stored as (features x batch) matrices; each column is one
/// sample with its channels-major spatial layout, so reshapes between the
/// flat and spatial stages are free.
struct ForwardTrace {
  Mode mode = Mode::Eval;
  std::vector<TraceSlot> slots;
  Eigen::MatrixXd penultimate;  // g = G(input), out_dim x batch
  Eigen::MatrixXd output;       // W_last * g + b_last
};

/// Mean over the batch of the negated Pearson correlation between matching
/// columns. Lies in [-1, 1]; -1 iff every output column is a positive affine
/// image of its target.
double batch_loss(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets);

/// d(batch_loss)/d(outputs). Degenerate (constant) columns get zero gradient.
Eigen::MatrixXd batch_loss_backward(const Eigen::MatrixXd& outputs,
                                    const Eigen::MatrixXd& targets);

class Network {
public:
  explicit Network(ModelConfig cfg);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;

  const ModelConfig& config() const;

  /// Deterministic fan-in-scaled uniform initialization; biases zero,
  /// batch-norm scale 1 / shift 0, running stats (0, 1).
  ModelParams init_params(uint64_t seed) const;

  /// Runs the stage pipeline. Train mode uses batch statistics, draws
  /// dropout masks from `rng` and updates the running statistics inside
  /// `params`; eval mode touches nothing and disables dropout.
  ForwardTrace forward(ModelParams& params, const Eigen::MatrixXd& input,
                       Mode mode, Rng* rng = nullptr) const;

  /// Gradient of batch_loss(trace.output, targets) with respect to every
  /// parameter block. Requires a train-mode trace.
  Gradients backward(const ModelParams& params, const ForwardTrace& trace,
                     const Eigen::MatrixXd& targets) const;

  Gradients zero_gradients() const;

  /// Final-layer weight matrix W_last as an out_dim x out_dim view.
  Eigen::Map<const Eigen::MatrixXd> last_layer_weight(const ModelParams& p) const;
  const Eigen::VectorXd& last_layer_bias(const ModelParams& p) const;

  std::vector<float> params_to_payload(const ModelParams& p) const;
  ModelParams params_from_payload(const std::vector<float>& payload) const;
  nlohmann::json block_shapes_json() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

inline const Eigen::MatrixXd& penultimate_features(const ForwardTrace& t) {
  return t.penultimate;
}

struct AdamHyper {
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Eigen::VectorXd> m, v;
  int64_t t = 0;
};

/// Bias-corrected Adam update applied elementwise to every block.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               const AdamHyper& hp = {});

/// Caps both the library's own worker threads and Eigen's GEMM threads.
void set_compute_threads(int n);

// ---- Checkpoints ----

struct Checkpoint {
  ModelConfig config;
  uint64_t seed = 0;
  int64_t step = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Network& net,
                     const ModelParams& params, uint64_t seed);
std::pair<ModelConfig, ModelParams> load_checkpoint(
    const std::filesystem::path& path);

}  // namespace nrced
