// Copyright 2026 The spkdiar Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal frame-level network kernel with hand-written reverse-mode
// gradients.
//
// A batch of variable-length sequences is stored as one C x (sum T_b)
// matrix whose columns are the frames of every sample laid end to end;
// `offsets` marks where each sample starts. Layer forward passes are const;
// backward passes take the forward input (and output where useful),
// return the input gradient, and accumulate parameter gradients.

#include <Eigen/Dense>

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace spkdiar::nn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Seq {
  MatrixXd data;
  /// Size num_samples() + 1; sample b spans columns [offsets[b], offsets[b+1]).
  std::vector<Index> offsets;

  Index channels() const { return data.rows(); }
  std::size_t num_samples() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  Index length(std::size_t b) const { return offsets[b + 1] - offsets[b]; }

  auto sample(std::size_t b) { return data.middleCols(offsets[b], length(b)); }
  auto sample(std::size_t b) const {
    return data.middleCols(offsets[b], length(b));
  }

  /// Same layout, different channel count, zero-filled.
  Seq like(Index channels) const;
  static Seq from_samples(const std::vector<MatrixXd>& xs);
  static Seq single(const MatrixXd& x);
};

struct Param {
  MatrixXd value;
  MatrixXd grad;

  void resize(Index rows, Index cols);
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Visitor over named tensors: trainable parameters (is_param = true) and
/// non-trainable state such as running statistics.
using TensorVisitor =
    std::function<void(const std::string& name, MatrixXd& value, Param* param)>;

enum class Mode { kTrain, kInfer };

using Rng = std::mt19937_64;

/// Uniform(-sqrt(3/fan_in), +sqrt(3/fan_in)).
void init_fan_in(MatrixXd& w, Index fan_in, Rng& rng);

MatrixXd relu(const MatrixXd& x);
/// Gradient through ReLU given its output.
MatrixXd relu_backward(const MatrixXd& y, const MatrixXd& gy);

/// Dilated 1-D convolution with same padding (odd kernel sizes).
/// weight: out x (kernel * in), column block j holds tap j.
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(Index in, Index out, int kernel, int dilation = 1);

  Seq forward(const Seq& x) const;
  Seq backward(const Seq& x, const Seq& gy);
  void init(Rng& rng);
  void visit(const std::string& prefix, const TensorVisitor& v);

  Index in_channels() const { return in_; }
  Index out_channels() const { return out_; }

  Param weight;
  Param bias;

 private:
  MatrixXd im2col(const Seq& x) const;

  Index in_ = 0;
  Index out_ = 0;
  int kernel_ = 1;
  int dilation_ = 1;
};

/// Batch normalization over all frames of all samples.
class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  explicit BatchNorm1d(Index channels, double momentum = 0.1,
                       double eps = 1e-5);

  Seq forward(const Seq& x, Mode mode) const;
  Seq backward(const Seq& x, const Seq& gy);
  /// Folds this batch's statistics into the running averages.
  void update_running(const Seq& x);
  void visit(const std::string& prefix, const TensorVisitor& v);

  Param gamma;
  Param beta;
  MatrixXd running_mean;
  MatrixXd running_var;

 private:
  double momentum_ = 0.1;
  double eps_ = 1e-5;
};

/// Hierarchical grouped convolution. Channels split into `scale` groups;
/// group 0 passes through and group i >= 1 is conv_i(x_i + y_{i-1}). With
/// scale = 1 the single group is convolved.
class Res2Conv {
 public:
  Res2Conv() = default;
  Res2Conv(Index channels, int scale, int kernel, int dilation);

  Seq forward(const Seq& x) const;
  Seq backward(const Seq& x, const Seq& gy);
  void init(Rng& rng);
  void visit(const std::string& prefix, const TensorVisitor& v);

  int scale() const { return scale_; }
  std::vector<Conv1d>& convs() { return convs_; }

 private:
  /// Per-group convolution inputs, recomputed for backward.
  std::vector<Seq> group_inputs(const Seq& x, std::vector<Seq>* outputs) const;

  Index channels_ = 0;
  Index width_ = 0;
  int scale_ = 1;
  std::vector<Conv1d> convs_;
};

/// Squeeze-excitation: x * sigmoid(W2 relu(W1 mean_t(x) + b1) + b2).
class SqueezeExcite {
 public:
  SqueezeExcite() = default;
  SqueezeExcite(Index channels, Index bottleneck);

  Seq forward(const Seq& x) const;
  Seq backward(const Seq& x, const Seq& gy);
  void init(Rng& rng);
  void visit(const std::string& prefix, const TensorVisitor& v);
  /// Channel gates, channels x num_samples.
  MatrixXd gates(const Seq& x) const;

  Param w1, b1, w2, b2;
};

/// Channel- and context-dependent attentive statistics pooling. Output is
/// a (2C) x num_samples matrix of [weighted mean; weighted std].
class AttentiveStatsPool {
 public:
  AttentiveStatsPool() = default;
  AttentiveStatsPool(Index channels, Index bottleneck, double std_floor = 1e-4);

  MatrixXd forward(const Seq& h) const;
  Seq backward(const Seq& h, const MatrixXd& gy);
  void init(Rng& rng);
  void visit(const std::string& prefix, const TensorVisitor& v);
  /// Attention weights (channels x frames), rows summing to 1 per sample.
  Seq attention(const Seq& h) const;

  double std_floor() const { return floor_; }

  Param wa, ba, we, be;

 private:
  struct Cache;
  Cache compute(const Seq& h) const;

  Index channels_ = 0;
  Index bottleneck_ = 0;
  double floor_ = 1e-4;
};

}  // namespace spkdiar::nn
