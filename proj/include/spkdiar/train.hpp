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

#include <cstdint>
#include <functional>
#include <vector>

#include "spkdiar/augment.hpp"
#include "spkdiar/ecapa.hpp"
#include "spkdiar/features.hpp"

namespace spkdiar::train {

/// Triangular cyclical learning rate: linear from lr_min up to lr_max over
/// the first half of each cycle and back down over the second half.
struct CyclicLr {
  double lr_min = 1e-4;
  double lr_max = 1e-3;
  int cycle_steps = 100;

  double at(long step) const;
};

/// Adam over a fixed parameter list.
class Adam {
 public:
  explicit Adam(std::vector<nn::Param*> params, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8,
                double weight_decay = 0.0);
  void step(double lr);

 private:
  std::vector<nn::Param*> params_;
  std::vector<Eigen::MatrixXd> m_, v_;
  double beta1_, beta2_, eps_, weight_decay_;
  long t_ = 0;
};

enum class AugmentMode {
  /// Clean crops only.
  kNone,
  /// Each crop contaminated by one strategy drawn from the view list.
  kSingleView,
  /// Every crop expanded into all views of the view list in one batch.
  kConcatViews,
};

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double crop_s = 3.0;
  CyclicLr lr;
  double weight_decay = 2e-5;
  double aam_margin = 0.2;
  double aam_scale = 30.0;
  AugmentMode augment_mode = AugmentMode::kConcatViews;
  augment::AugmentConfig augment;
  features::FeatureConfig features;
  std::uint64_t seed = 0;
};

struct TrainResult {
  ecapa::ModelWeights weights;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;
};

/// Optional per-step observer: (global step, loss, learning rate).
using StepCallback = std::function<void(long, double, double)>;

/// Toy-scale training loop: random crops -> (augmented) batch -> log-Mel ->
/// embedder -> AAM-softmax -> Adam with the cyclical schedule. The model
/// is initialized from cfg with train_cfg.seed. Throws with the step index
/// if the loss becomes non-finite.
TrainResult train_toy(const std::vector<augment::LabeledWaveform>& dataset,
                      const augment::Corpora& corpora,
                      const ecapa::EcapaConfig& cfg, const TrainConfig& train_cfg,
                      const StepCallback& on_step = {});

/// Random crop of `crop_s` seconds (whole utterance if shorter).
audio::Waveform random_crop(const audio::Waveform& w, double crop_s,
                            std::mt19937_64& rng);

}  // namespace spkdiar::train
