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

#include "spkdiar/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "spkdiar/error.hpp"

namespace spkdiar::train {

double CyclicLr::at(long step) const {
  SPKDIAR_CHECK(cycle_steps >= 2, "CLR cycle must span >= 2 steps");
  const double pos = static_cast<double>(step % cycle_steps);
  const double x = std::abs(2.0 * pos / cycle_steps - 1.0);
  return lr_min + (lr_max - lr_min) * (1.0 - x);
}

Adam::Adam(std::vector<nn::Param*> params, double beta1, double beta2,
           double eps, double weight_decay)
    : params_(std::move(params)),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      weight_decay_(weight_decay) {
  for (auto* p : params_) {
    m_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    Eigen::MatrixXd g = p.grad;
    if (weight_decay_ > 0.0) g += weight_decay_ * p.value;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    p.value.array() -=
        lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

audio::Waveform random_crop(const audio::Waveform& w, double crop_s,
                            std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(std::llround(crop_s * w.sample_rate_hz));
  if (w.size() <= n) return w;
  const std::size_t start =
      std::uniform_int_distribution<std::size_t>(0, w.size() - n)(rng);
  audio::Waveform out;
  out.sample_rate_hz = w.sample_rate_hz;
  out.samples.assign(w.samples.begin() + start, w.samples.begin() + start + n);
  return out;
}

TrainResult train_toy(const std::vector<augment::LabeledWaveform>& dataset,
                      const augment::Corpora& corpora,
                      const ecapa::EcapaConfig& cfg, const TrainConfig& tc,
                      const StepCallback& on_step) {
  SPKDIAR_CHECK(!dataset.empty(), "training set is empty");
  SPKDIAR_CHECK(tc.batch_size >= 2, "batch size must be >= 2");
  SPKDIAR_CHECK(tc.epochs >= 1, "need at least one epoch");
  std::set<int> speakers;
  for (const auto& u : dataset) {
    speakers.insert(u.label);
    SPKDIAR_CHECK(u.label >= 0 && u.label < cfg.n_classes, "label ", u.label,
                  " outside [0, ", cfg.n_classes, ")");
    SPKDIAR_CHECK(u.wave.duration_s() + 1e-9 >= tc.crop_s, "utterance of ",
                  u.wave.duration_s(), " s is shorter than the ", tc.crop_s,
                  " s crop");
  }
  SPKDIAR_CHECK(speakers.size() >= 2, "training needs at least 2 speakers");

  ecapa::EcapaModel model(cfg, tc.seed);
  std::vector<nn::Param*> params;
  for (auto& [name, p] : model.parameters()) params.push_back(p);
  Adam adam(params, 0.9, 0.999, 1e-8, tc.weight_decay);

  std::mt19937_64 rng(augment::derive_seed(tc.seed, 0x7EA1, 1));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  long step = 0;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0, acc_sum = 0.0;
    int n_steps = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      if (end - start < 2) break;  // batch norm needs >= 2 samples
      std::vector<augment::LabeledWaveform> clean;
      for (std::size_t i = start; i < end; ++i) {
        const auto& u = dataset[order[i]];
        clean.push_back({random_crop(u.wave, tc.crop_s, rng), u.label});
      }

      augment::AugmentedBatch batch;
      switch (tc.augment_mode) {
        case AugmentMode::kNone:
          for (auto& c : clean) {
            batch.inputs.push_back(c.wave);
            batch.labels.push_back(c.label);
            batch.view_of.push_back(augment::Strategy::kClean);
            batch.snr_db.push_back(std::numeric_limits<double>::quiet_NaN());
          }
          break;
        case AugmentMode::kSingleView:
          batch = augment::build_single_view_batch(clean, tc.augment, corpora, rng);
          break;
        case AugmentMode::kConcatViews:
          batch = augment::build_augmented_batch(clean, tc.augment, corpora, rng);
          break;
      }

      std::vector<Eigen::MatrixXd> xs;
      xs.reserve(batch.size());
      for (const auto& w : batch.inputs)
        xs.push_back(features::extract(w, tc.features).frames.transpose());
      const nn::Seq x = nn::Seq::from_samples(xs);

      model.zero_grad();
      ecapa::EcapaModel::Tape tape;
      const Eigen::MatrixXd emb = model.forward_train(x, tape, true);
      const auto aam =
          ecapa::aam_softmax_loss(emb, batch.labels, model.class_centers().value,
                                  tc.aam_margin, tc.aam_scale);
      SPKDIAR_CHECK(std::isfinite(aam.loss), "training diverged: non-finite loss at step ",
                    step);
      model.class_centers().grad += aam.grad_centers;
      model.backward(tape, aam.grad_emb);
      const double lr = tc.lr.at(step);
      adam.step(lr);
      if (on_step) on_step(step, aam.loss, lr);

      loss_sum += aam.loss;
      acc_sum += aam.accuracy;
      ++n_steps;
      ++step;
    }
    SPKDIAR_CHECK(n_steps > 0, "dataset too small for one batch");
    result.epoch_loss.push_back(loss_sum / n_steps);
    result.epoch_accuracy.push_back(acc_sum / n_steps);
  }
  result.weights = model.weights();
  return result;
}

}  // namespace spkdiar::train
