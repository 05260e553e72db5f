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
#include "spkdiar/ecapa.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "spkdiar/error.hpp"
#include "support/gradcheck.hpp"

namespace spkdiar::ecapa {
namespace {

namespace fs = std::filesystem;
using nn::Seq;

MatrixXd randn(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

EcapaConfig small_config() {
  EcapaConfig c;
  c.n_mels = 12;
  c.channels = 8;
  c.res2_scale = 2;
  c.embed_dim = 4;
  c.se_bottleneck = 4;
  c.attn_bottleneck = 4;
  c.n_classes = 3;
  return c;
}

features::FeatureMatrix feats(const MatrixXd& frames) {
  features::FeatureMatrix f;
  f.frames = frames;
  return f;
}

TEST(Config, ReferenceAndToyLayouts) {
  const auto full = EcapaConfig::full();
  EXPECT_EQ(full.channels, 512);
  EXPECT_EQ(full.embed_dim, 192);
  EXPECT_EQ(full.dilations, (std::vector<int>{2, 3, 4}));
  EXPECT_EQ(full.res2_scale, 8);
  EXPECT_EQ(full.attn_bottleneck, 128);
  EXPECT_NO_THROW(full.validate());
  const auto toy = EcapaConfig::toy();
  EXPECT_EQ(toy.channels, 32);
  EXPECT_EQ(toy.embed_dim, 16);
  EXPECT_NO_THROW(toy.validate());
}

TEST(Config, IndivisibleChannelsAreRejected) {
  auto c = EcapaConfig::toy();
  c.res2_scale = 5;
  EXPECT_THROW(c.validate(), Error);
}

TEST(SeBlock, SaturatedGateIsIdentity) {
  nn::SqueezeExcite se(3, 2);
  se.w1.value = randn(2, 3, 1);
  se.w2.value.setZero();
  se.b2.value.setConstant(60.0);
  const MatrixXd x = randn(3, 5, 2);
  const MatrixXd y = se_block(x, se);
  ASSERT_EQ(y.rows(), 3);
  ASSERT_EQ(y.cols(), 5);
  EXPECT_LE((y - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SeBlock, ConstantInputMatchesHandEvaluation) {
  nn::SqueezeExcite se(2, 1);
  se.w1.value << 0.5, -1.0;
  se.b1.value << 0.25;
  se.w2.value << 2.0, -3.0;
  se.b2.value << 0.1, 0.2;
  MatrixXd x(2, 4);
  x.row(0).setConstant(3.0);
  x.row(1).setConstant(0.5);
  // z = relu(0.5*3 - 1*0.5 + 0.25) = 1.25.
  const double z = 1.25;
  const double g0 = 1.0 / (1.0 + std::exp(-(2.0 * z + 0.1)));
  const double g1 = 1.0 / (1.0 + std::exp(-(-3.0 * z + 0.2)));
  const MatrixXd y = se_block(x, se);
  for (int t = 0; t < 4; ++t) {
    EXPECT_NEAR(y(0, t), 3.0 * g0, 1e-12);
    EXPECT_NEAR(y(1, t), 0.5 * g1, 1e-12);
  }
}

TEST(Res2Conv, ScaleOneIsDilatedConvolution) {
  nn::Res2Conv r(2, 1, 3, 2);
  std::mt19937_64 rng(3);
  r.init(rng);
  const MatrixXd x = randn(2, 6, 4);
  EXPECT_EQ(res2_conv(x, r), r.convs()[0].forward(Seq::single(x)).data);
}

TEST(Res2Conv, IdentityKernelsTraceTheHierarchy) {
  nn::Res2Conv r(4, 2, 3, 1);
  ASSERT_EQ(r.convs().size(), 1u);
  auto& c = r.convs()[0];
  // Centre tap identity; weight columns are [tap0 | tap1 | tap2] x in.
  c.weight.value.setZero();
  c.weight.value(0, 2) = 1.0;
  c.weight.value(1, 3) = 1.0;
  c.bias.value.setZero();
  MatrixXd x(4, 3);
  x << 1, 2, 3,
       4, 5, 6,
       7, 8, 9,
       10, 11, 12;
  const MatrixXd y = res2_conv(x, r);
  ASSERT_EQ(y.rows(), 4);
  ASSERT_EQ(y.cols(), 3);
  EXPECT_EQ(y.topRows(2), x.topRows(2));
  EXPECT_EQ(y.bottomRows(2), x.topRows(2) + x.bottomRows(2));
}

TEST(Pooling, SingleFrameGivesValueAndFloor) {
  nn::AttentiveStatsPool p(3, 2);
  std::mt19937_64 rng(5);
  p.init(rng);
  const MatrixXd h = randn(3, 1, 6);
  const VectorXd out = attentive_stats_pooling(h, p);
  ASSERT_EQ(out.size(), 6);
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(out(c), h(c, 0), 1e-12);
    EXPECT_DOUBLE_EQ(out(3 + c), p.std_floor());
  }
}

TEST(Pooling, UniformAttentionGivesPlainStatistics) {
  nn::AttentiveStatsPool p(4, 3);
  std::mt19937_64 rng(7);
  p.init(rng);
  p.we.value.setZero();
  p.be.value.setZero();
  const MatrixXd h = randn(4, 9, 8);
  const VectorXd out = attentive_stats_pooling(h, p);
  for (int c = 0; c < 4; ++c) {
    const double mean = h.row(c).mean();
    const double sd = std::sqrt((h.row(c).array() - mean).square().mean());
    EXPECT_NEAR(out(c), mean, 1e-6);
    EXPECT_NEAR(out(4 + c), sd, 1e-6);
  }
}

TEST(Pooling, AttentionSumsToOnePerChannel) {
  nn::AttentiveStatsPool p(5, 3);
  std::mt19937_64 rng(9);
  p.init(rng);
  const auto a = p.attention(Seq::single(randn(5, 11, 10)));
  EXPECT_LE((a.data.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(Forward, EmbeddingHasConfiguredLength) {
  const auto cfg = small_config();
  const EcapaModel model(cfg, 1);
  for (int t : {1, 2, 7, 30}) {
    const auto e = model.embed(feats(randn(t, cfg.n_mels, 11 + t)));
    EXPECT_EQ(e.values.size(), cfg.embed_dim) << t;
    EXPECT_TRUE(e.values.allFinite());
  }
}

TEST(Forward, IdenticalInputsGiveIdenticalEmbeddings) {
  const auto cfg = small_config();
  const EcapaModel model(cfg, 2);
  const auto f = feats(randn(25, cfg.n_mels, 12));
  EXPECT_EQ(model.embed(f).values, model.embed(f).values);
  const auto w = model.weights();
  EXPECT_EQ(forward(f, w).values, model.embed(f).values);
}

TEST(Forward, ConstantInputIsTimeReversalInvariant) {
  const auto cfg = small_config();
  const EcapaModel model(cfg, 3);
  MatrixXd frames(15, cfg.n_mels);
  const MatrixXd row = randn(1, cfg.n_mels, 13);
  for (int t = 0; t < 15; ++t) frames.row(t) = row;
  const MatrixXd reversed = frames.colwise().reverse();
  EXPECT_LE((model.embed(feats(frames)).values - model.embed(feats(reversed)).values)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(Forward, BatchMatchesSingleInference) {
  const auto cfg = small_config();
  const EcapaModel model(cfg, 4);
  std::vector<features::FeatureMatrix> fs = {feats(randn(9, cfg.n_mels, 14)),
                                             feats(randn(17, cfg.n_mels, 15))};
  const MatrixXd e = model.embed_batch(fs);
  for (int b = 0; b < 2; ++b)
    EXPECT_LE((e.col(b) - model.embed(fs[b]).values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, WrongMelCountIsRejected) {
  const EcapaModel model(small_config(), 5);
  EXPECT_THROW(model.embed(feats(randn(5, 7, 16))), Error);
}

TEST(Forward, TrainingForwardPreservesFrameCount) {
  auto cfg = small_config();
  EcapaModel model(cfg, 6);
  const auto x = Seq::from_samples({randn(cfg.n_mels, 8, 17), randn(cfg.n_mels, 5, 18)});
  EcapaModel::Tape tape;
  const MatrixXd emb = model.forward_train(x, tape, false);
  EXPECT_EQ(emb.rows(), cfg.embed_dim);
  EXPECT_EQ(emb.cols(), 2);
  EXPECT_EQ(tape.h.data.cols(), 13);
  for (const auto& b : tape.blocks) EXPECT_EQ(b.a.offsets, x.offsets);
}

// Mean cross-entropy on scaled logits, true class shifted by the margin.
double reference_aam(const MatrixXd& emb, const std::vector<int>& labels,
                     const MatrixXd& centers, double m, double s) {
  double total = 0.0;
  for (Eigen::Index b = 0; b < emb.cols(); ++b) {
    const VectorXd e = emb.col(b).normalized();
    std::vector<double> logits;
    for (Eigen::Index k = 0; k < centers.rows(); ++k) {
      double c = centers.row(k).normalized().dot(e);
      if (k == labels[b]) c = std::cos(std::acos(std::clamp(c, -1 + 1e-7, 1 - 1e-7)) + m);
      logits.push_back(s * c);
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    total += -(logits[labels[b]] - mx - std::log(z));
  }
  return total / static_cast<double>(emb.cols());
}

TEST(AamSoftmax, NoMarginUnitScaleIsPlainCrossEntropy) {
  const MatrixXd emb = randn(4, 5, 20);
  const MatrixXd w = randn(3, 4, 21);
  const std::vector<int> y = {0, 2, 1, 1, 0};
  const auto r = aam_softmax_loss(emb, y, w, 0.0, 1.0);
  EXPECT_NEAR(r.loss, reference_aam(emb, y, w, 0.0, 1.0), 1e-12);
}

TEST(AamSoftmax, MarginPathMatchesReference) {
  const MatrixXd emb = randn(4, 6, 22);
  const MatrixXd w = randn(3, 4, 23);
  const std::vector<int> y = {0, 2, 1, 1, 0, 2};
  const auto r = aam_softmax_loss(emb, y, w, 0.2, 30.0);
  EXPECT_NEAR(r.loss, reference_aam(emb, y, w, 0.2, 30.0), 1e-9);
}

TEST(AamSoftmax, SingleClassHasZeroLoss) {
  const auto r = aam_softmax_loss(randn(4, 3, 24), {0, 0, 0}, randn(1, 4, 25), 0.0, 30.0);
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
}

TEST(AamSoftmax, GradientsMatchFiniteDifferences) {
  MatrixXd emb = randn(5, 4, 26);
  MatrixXd w = randn(3, 5, 27);
  const std::vector<int> y = {2, 0, 1, 2};
  const double m = 0.2, s = 10.0;
  const auto r = aam_softmax_loss(emb, y, w, m, s);
  const double h = 1e-6;
  auto check = [&](MatrixXd& p, const MatrixXd& g) {
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double keep = p.data()[i];
      p.data()[i] = keep + h;
      const double up = aam_softmax_loss(emb, y, w, m, s).loss;
      p.data()[i] = keep - h;
      const double dn = aam_softmax_loss(emb, y, w, m, s).loss;
      p.data()[i] = keep;
      const double num = (up - dn) / (2 * h);
      const double a = g.data()[i];
      EXPECT_LE(std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-4}), 1e-4);
    }
  };
  check(emb, r.grad_emb);
  check(w, r.grad_centers);
}

TEST(AamSoftmax, InvalidInputsAreRejected) {
  const MatrixXd emb = randn(4, 2, 28);
  const MatrixXd w = randn(2, 4, 29);
  EXPECT_THROW(aam_softmax_loss(emb, {0, 1}, w, 1.0, 30.0), Error);
  EXPECT_THROW(aam_softmax_loss(emb, {0, 1}, w, 0.2, 0.0), Error);
  EXPECT_THROW(aam_softmax_loss(emb, {0, 5}, w, 0.2, 30.0), Error);
  MatrixXd zero = emb;
  zero.col(1).setZero();
  EXPECT_THROW(aam_softmax_loss(zero, {0, 1}, w, 0.2, 30.0), Error);
}

TEST(GradientCheck, SmallModelMatchesFiniteDifferences) {
  testing::GradCheckSetup s;
  s.cfg = small_config();
  s.frames = 10;
  const auto r = testing::run_gradient_check(s);
  EXPECT_GT(r.checked, 1000);
  EXPECT_LE(r.max_rel_err, 1e-4) << r.worst;
}

class WeightsFile : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("spkdiar_ecapa_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(WeightsFile, RoundTripIsBitwiseEqual) {
  const EcapaModel model(small_config(), 30);
  const auto w = model.weights();
  save_weights(dir_ / "w.bin", w);
  const auto r = load_weights(dir_ / "w.bin");
  EXPECT_EQ(r.config, w.config);
  ASSERT_EQ(r.tensors.size(), w.tensors.size());
  for (const auto& [name, t] : w.tensors) {
    ASSERT_TRUE(r.tensors.count(name)) << name;
    EXPECT_EQ(r.tensors.at(name), t) << name;
  }
  EXPECT_TRUE(w.tensors.count("aam.centers"));
}

TEST_F(WeightsFile, MissingTensorIsNamed) {
  auto w = EcapaModel(small_config(), 31).weights();
  const std::string victim = w.tensors.begin()->first;
  w.tensors.erase(victim);
  try {
    EcapaModel m(w);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(victim), std::string::npos) << e.what();
  }
}

TEST_F(WeightsFile, ConfigMismatchIsRejected) {
  auto big = small_config();
  big.channels = 16;
  save_weights(dir_ / "w.bin", EcapaModel(big, 32).weights());
  try {
    load_weights(dir_ / "w.bin", small_config());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("shape"), std::string::npos) << e.what();
  }
}

TEST_F(WeightsFile, CorruptFileIsRejected) {
  {
    std::ofstream out(dir_ / "bad.bin", std::ios::binary);
    out << "NOPE";
  }
  EXPECT_THROW(load_weights(dir_ / "bad.bin"), Error);
  EXPECT_THROW(load_weights(dir_ / "missing.bin"), Error);
}

}  // namespace
}  // namespace spkdiar::ecapa
