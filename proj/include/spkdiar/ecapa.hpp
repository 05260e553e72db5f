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

// ECAPA-TDNN speaker embedder:
//
//   conv(k=5)+ReLU+BN
//   -> N x [conv1x1+ReLU+BN -> Res2(dilation d_i)+ReLU+BN -> conv1x1+ReLU+BN
//           -> SE, plus skip connection]
//   -> concat of all block outputs -> conv1x1+ReLU+BN
//   -> attentive statistics pooling -> BN -> dense -> embedding
//
// The AAM-softmax class-center matrix lives alongside the network weights
// so that one container holds everything needed to resume training.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spkdiar/embedding.hpp"
#include "spkdiar/features.hpp"
#include "spkdiar/nn.hpp"

namespace spkdiar::ecapa {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct EcapaConfig {
  int n_mels = 80;
  int channels = 512;
  int embed_dim = 192;
  int n_se_res2_blocks = 3;
  std::vector<int> dilations = {2, 3, 4};
  int kernel_size = 3;
  int initial_kernel = 5;
  int res2_scale = 8;
  int se_bottleneck = 128;
  int attn_bottleneck = 128;
  /// Training-only; size of the AAM class-center matrix.
  int n_classes = 2;

  /// C=512, D=192 reference layout.
  static EcapaConfig full();
  /// C=32, D=16 desk-scale layout used by tests and toy training.
  static EcapaConfig toy();

  int mfa_channels() const { return channels * n_se_res2_blocks; }
  void validate() const;
  friend bool operator==(const EcapaConfig&, const EcapaConfig&) = default;
};

/// Named tensor map plus the configuration that produced it.
struct ModelWeights {
  EcapaConfig config;
  std::map<std::string, MatrixXd> tensors;
};

class EcapaModel {
 public:
  explicit EcapaModel(const EcapaConfig& cfg, std::uint64_t seed = 0);
  /// Throws on missing tensors or shape mismatches, naming the tensor.
  explicit EcapaModel(const ModelWeights& weights);

  const EcapaConfig& config() const { return cfg_; }
  ModelWeights weights() const;

  /// Inference-mode embedding (batch norm uses running statistics).
  Embedding embed(const features::FeatureMatrix& f) const;
  /// D x B inference embeddings.
  MatrixXd embed_batch(const std::vector<features::FeatureMatrix>& fs) const;

  /// Intermediate activations kept for the backward pass.
  struct Tape;

  /// Training-mode forward over inputs laid out as n_mels x (sum T). When
  /// `update_running` is set, batch-norm running statistics absorb this
  /// batch. Returns D x B embeddings.
  MatrixXd forward_train(const nn::Seq& x, Tape& tape, bool update_running);
  /// Accumulates parameter gradients given dLoss/dEmbedding (D x B).
  void backward(const Tape& tape, const MatrixXd& g_emb);

  nn::Param& class_centers() { return centers_; }
  const nn::Param& class_centers() const { return centers_; }

  /// All tensors (parameters and running statistics) in a fixed order.
  void visit(const nn::TensorVisitor& v);
  /// Trainable parameters in the same fixed order, including the class
  /// centers.
  std::vector<std::pair<std::string, nn::Param*>> parameters();
  void zero_grad();

  /// Input-level building blocks, exposed for direct testing.
  struct Block {
    nn::Conv1d pre;
    nn::BatchNorm1d bn_pre;
    nn::Res2Conv res2;
    nn::BatchNorm1d bn_res2;
    nn::Conv1d post;
    nn::BatchNorm1d bn_post;
    nn::SqueezeExcite se;
  };
  std::vector<Block>& blocks() { return blocks_; }
  nn::AttentiveStatsPool& pooling() { return pool_; }

 private:
  MatrixXd run(const nn::Seq& x, nn::Mode mode, Tape* tape) const;

  EcapaConfig cfg_;
  nn::Conv1d conv0_;
  nn::BatchNorm1d bn0_;
  std::vector<Block> blocks_;
  nn::Conv1d mfa_;
  nn::BatchNorm1d bn_mfa_;
  nn::AttentiveStatsPool pool_;
  nn::BatchNorm1d bn_pool_;
  nn::Conv1d fc_;
  nn::Param centers_;
};

struct EcapaModel::Tape {
  struct BlockTape {
    nn::Seq u, p1, r1, v1, p2, r2, v2, p3, r3, v3, a;
  };
  nn::Seq x, c0, r0, a0;
  std::vector<BlockTape> blocks;
  nn::Seq mfa_in, mfa_c, mfa_r, h;
  nn::Seq pooled, z;
  MatrixXd emb;
};

/// Embedding of one segment; equivalent to EcapaModel(weights).embed(f).
Embedding forward(const features::FeatureMatrix& f, const ModelWeights& weights);

// ---------------------------------------------------------------------------
// Standalone layer evaluations on a single C x T map.

MatrixXd se_block(const MatrixXd& x, const nn::SqueezeExcite& se);
MatrixXd res2_conv(const MatrixXd& x, const nn::Res2Conv& res2);
/// Returns the 2C pooled vector [mean; std].
VectorXd attentive_stats_pooling(const MatrixXd& h,
                                 const nn::AttentiveStatsPool& pool);

// ---------------------------------------------------------------------------
// AAM-softmax

struct AamResult {
  double loss = 0.0;
  MatrixXd grad_emb;      // D x B
  MatrixXd grad_centers;  // K x D
  /// Fraction of samples whose highest plain cosine is the true class.
  double accuracy = 0.0;
};

/// Additive angular margin softmax over embeddings (D x B) and unnormalized
/// class centers (K x D). Returns the mean cross-entropy and its gradients.
AamResult aam_softmax_loss(const MatrixXd& emb, const std::vector<int>& labels,
                           const MatrixXd& centers, double margin,
                           double scale);

// ---------------------------------------------------------------------------
// Weight container: "SPKW", uint32 version, uint64 manifest length, JSON
// manifest (config + tensor names and shapes), then one float64 tensor
// record per manifest entry.

void save_weights(const std::filesystem::path& path, const ModelWeights& w);
/// Loads and validates against the configuration stored in the file.
ModelWeights load_weights(const std::filesystem::path& path);
/// Loads and validates against `expected` (errors name the tensor).
ModelWeights load_weights(const std::filesystem::path& path,
                          const EcapaConfig& expected);

}  // namespace spkdiar::ecapa
