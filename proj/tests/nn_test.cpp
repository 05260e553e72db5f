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
#include "spkdiar/nn.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "spkdiar/error.hpp"

namespace spkdiar::nn {
namespace {

// Central differences of L = sum(R .* f(x)) against the layer's backward.
struct LayerCheck {
  std::function<MatrixXd(const Seq&)> forward;
  std::function<Seq(const Seq&, const MatrixXd&)> backward;
  std::vector<Param*> params;
};

double loss(const LayerCheck& l, const Seq& x, const MatrixXd& r) {
  return (l.forward(x).array() * r.array()).sum();
}

double rel_err(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

void expect_gradients(LayerCheck l, Seq x, std::uint64_t seed, double tol = 1e-6) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const MatrixXd y = l.forward(x);
  MatrixXd r(y.rows(), y.cols());
  for (Index i = 0; i < r.size(); ++i) r.data()[i] = g(rng);
  for (auto* p : l.params) p->zero_grad();
  const Seq gx = l.backward(x, r);
  // Fourth-order central stencil: truncation O(h^4), round-off O(eps / h).
  const double h = 1e-4;
  auto derivative = [&](double& v) {
    const double keep = v;
    auto at = [&](double dx) {
      v = keep + dx;
      return loss(l, x, r);
    };
    const double d = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
    v = keep;
    return d;
  };
  double worst = 0.0;
  for (Index i = 0; i < x.data.size(); ++i)
    worst = std::max(worst, rel_err(gx.data.data()[i], derivative(x.data.data()[i])));
  EXPECT_LE(worst, tol) << "input gradient";
  for (std::size_t k = 0; k < l.params.size(); ++k) {
    auto& p = *l.params[k];
    double pw = 0.0;
    for (Index i = 0; i < p.value.size(); ++i)
      pw = std::max(pw, rel_err(p.grad.data()[i], derivative(p.value.data()[i])));
    EXPECT_LE(pw, tol) << "parameter " << k;
  }
}

Seq random_seq(Index channels, std::vector<Index> lengths, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<MatrixXd> xs;
  for (Index len : lengths) {
    MatrixXd m(channels, len);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    xs.push_back(m);
  }
  return Seq::from_samples(xs);
}

void randomize(Param& p, Rng& rng, double sd = 0.5) {
  std::normal_distribution<double> g(0.0, sd);
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = g(rng);
}

TEST(Seq, FromSamplesLayout) {
  const auto s = random_seq(3, {4, 1, 6}, 1);
  EXPECT_EQ(s.num_samples(), 3u);
  EXPECT_EQ(s.offsets, (std::vector<Index>{0, 4, 5, 11}));
  EXPECT_EQ(s.data.cols(), 11);
  EXPECT_EQ(s.length(2), 6);
  EXPECT_EQ(s.like(7).channels(), 7);
  EXPECT_THROW(Seq::from_samples({MatrixXd(2, 3), MatrixXd(3, 3)}), Error);
}

TEST(Relu, ForwardAndBackward) {
  MatrixXd x(1, 4);
  x << -1.0, 0.0, 2.0, -3.0;
  const MatrixXd y = relu(x);
  EXPECT_EQ(y(0, 2), 2.0);
  EXPECT_EQ(y(0, 0), 0.0);
  const MatrixXd g = relu_backward(y, MatrixXd::Ones(1, 4));
  EXPECT_EQ(g.sum(), 1.0);
}

TEST(Conv1d, SamePaddingPreservesLength) {
  Conv1d c(3, 5, 3, 4);
  Rng rng(2);
  c.init(rng);
  const auto x = random_seq(3, {7, 2}, 3);
  const auto y = c.forward(x);
  EXPECT_EQ(y.channels(), 5);
  EXPECT_EQ(y.offsets, x.offsets);
  EXPECT_THROW(Conv1d(3, 3, 2), Error);
}

TEST(Conv1d, HandCaseWithDilation) {
  // y[t] = w0 x[t-2] + w1 x[t] + w2 x[t+2] + b, zero outside the sample.
  Conv1d c(1, 1, 3, 2);
  c.weight.value << 1.0, 10.0, 100.0;
  c.bias.value << 0.5;
  MatrixXd x(1, 4);
  x << 1.0, 2.0, 3.0, 4.0;
  const auto y = c.forward(Seq::single(x));
  EXPECT_DOUBLE_EQ(y.data(0, 0), 10.0 + 300.0 + 0.5);
  EXPECT_DOUBLE_EQ(y.data(0, 1), 20.0 + 400.0 + 0.5);
  EXPECT_DOUBLE_EQ(y.data(0, 2), 1.0 + 30.0 + 0.5);
  EXPECT_DOUBLE_EQ(y.data(0, 3), 2.0 + 40.0 + 0.5);
}

TEST(Conv1d, SamplesDoNotLeakIntoEachOther) {
  Conv1d c(2, 2, 5, 1);
  Rng rng(4);
  c.init(rng);
  const auto both = random_seq(2, {6, 5}, 5);
  const auto alone = Seq::single(both.sample(1));
  EXPECT_LE((c.forward(both).sample(1) - c.forward(alone).data).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(Conv1d, Gradients) {
  Conv1d c(3, 4, 3, 2);
  Rng rng(6);
  c.init(rng);
  randomize(c.bias, rng);
  expect_gradients({[&](const Seq& x) { return c.forward(x).data; },
                    [&](const Seq& x, const MatrixXd& g) {
                      Seq gy;
                      gy.data = g;
                      gy.offsets = x.offsets;
                      return c.backward(x, gy);
                    },
                    {&c.weight, &c.bias}},
                   random_seq(3, {5, 3}, 7), 8);
}

TEST(BatchNorm1d, TrainModeNormalizesChannels) {
  BatchNorm1d bn(3);
  const auto x = random_seq(3, {10, 6}, 9);
  const auto y = bn.forward(x, Mode::kTrain);
  EXPECT_LE(y.data.rowwise().mean().cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::VectorXd var = y.data.array().square().rowwise().mean();
  EXPECT_LE((var.array() - 1.0).abs().maxCoeff(), 1e-3);
}

TEST(BatchNorm1d, RunningStatisticsUseMomentum) {
  BatchNorm1d bn(1, 0.1);
  MatrixXd x(1, 4);
  x << 1.0, 2.0, 3.0, 4.0;
  bn.update_running(Seq::single(x));
  EXPECT_NEAR(bn.running_mean(0, 0), 0.1 * 2.5, 1e-12);
  // Unbiased variance 5/3.
  EXPECT_NEAR(bn.running_var(0, 0), 0.9 + 0.1 * (5.0 / 3.0), 1e-12);
  const auto y = bn.forward(Seq::single(x), Mode::kInfer);
  EXPECT_NEAR(y.data(0, 0), (1.0 - 0.25) / std::sqrt(bn.running_var(0, 0) + 1e-5), 1e-12);
}

TEST(BatchNorm1d, Gradients) {
  BatchNorm1d bn(3);
  Rng rng(10);
  randomize(bn.gamma, rng);
  randomize(bn.beta, rng);
  expect_gradients({[&](const Seq& x) { return bn.forward(x, Mode::kTrain).data; },
                    [&](const Seq& x, const MatrixXd& g) {
                      Seq gy;
                      gy.data = g;
                      gy.offsets = x.offsets;
                      return bn.backward(x, gy);
                    },
                    {&bn.gamma, &bn.beta}},
                   random_seq(3, {4, 5}, 11), 12, 1e-5);
}

TEST(Res2Conv, ScaleOneIsPlainDilatedConv) {
  Res2Conv r(4, 1, 3, 2);
  Rng rng(13);
  r.init(rng);
  ASSERT_EQ(r.convs().size(), 1u);
  const auto x = random_seq(4, {6}, 14);
  EXPECT_EQ(r.forward(x).data, r.convs()[0].forward(x).data);
}

TEST(Res2Conv, IndivisibleChannelsAreRejected) {
  EXPECT_THROW(Res2Conv(6, 4, 3, 1), Error);
}

TEST(Res2Conv, Gradients) {
  Res2Conv r(8, 4, 3, 2);
  Rng rng(15);
  r.init(rng);
  std::vector<Param*> ps;
  for (auto& c : r.convs()) {
    randomize(c.bias, rng);
    ps.push_back(&c.weight);
    ps.push_back(&c.bias);
  }
  expect_gradients({[&](const Seq& x) { return r.forward(x).data; },
                    [&](const Seq& x, const MatrixXd& g) {
                      Seq gy;
                      gy.data = g;
                      gy.offsets = x.offsets;
                      return r.backward(x, gy);
                    },
                    ps},
                   random_seq(8, {5, 4}, 16), 17);
}

TEST(SqueezeExcite, Gradients) {
  SqueezeExcite se(4, 3);
  Rng rng(18);
  se.init(rng);
  randomize(se.b1, rng);
  randomize(se.b2, rng);
  expect_gradients({[&](const Seq& x) { return se.forward(x).data; },
                    [&](const Seq& x, const MatrixXd& g) {
                      Seq gy;
                      gy.data = g;
                      gy.offsets = x.offsets;
                      return se.backward(x, gy);
                    },
                    {&se.w1, &se.b1, &se.w2, &se.b2}},
                   random_seq(4, {6, 3}, 19), 20);
}

TEST(AttentiveStatsPool, AttentionRowsSumToOne) {
  AttentiveStatsPool p(3, 4);
  Rng rng(21);
  p.init(rng);
  const auto x = random_seq(3, {7, 2, 1}, 22);
  const auto a = p.attention(x);
  for (std::size_t b = 0; b < x.num_samples(); ++b) {
    const Eigen::VectorXd s = a.sample(b).rowwise().sum();
    EXPECT_LE((s.array() - 1.0).abs().maxCoeff(), 1e-12);
  }
  const auto out = p.forward(x);
  EXPECT_EQ(out.rows(), 6);
  EXPECT_EQ(out.cols(), 3);
  EXPECT_GE(out.bottomRows(3).minCoeff(), p.std_floor());
}

TEST(AttentiveStatsPool, Gradients) {
  AttentiveStatsPool p(3, 4);
  Rng rng(23);
  p.init(rng);
  randomize(p.ba, rng);
  randomize(p.be, rng);
  expect_gradients({[&](const Seq& x) { return p.forward(x); },
                    [&](const Seq& x, const MatrixXd& g) { return p.backward(x, g); },
                    {&p.wa, &p.ba, &p.we}},
                   random_seq(3, {6, 4}, 24), 25, 1e-5);
}

TEST(AttentiveStatsPool, ScoreBiasHasZeroGradient) {
  // Softmax over time ignores a per-channel shift of the scores.
  AttentiveStatsPool p(3, 4);
  Rng rng(26);
  p.init(rng);
  randomize(p.ba, rng);
  randomize(p.be, rng);
  const Seq x = random_seq(3, {6, 4}, 27);
  const MatrixXd y = p.forward(x);
  MatrixXd g(y.rows(), y.cols());
  std::normal_distribution<double> nd(0.0, 1.0);
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = nd(rng);
  p.be.zero_grad();
  p.backward(x, g);
  EXPECT_LE(p.be.grad.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Init, FanInBoundAndDeterminism) {
  MatrixXd a(10, 12), b(10, 12);
  Rng r1(5), r2(5);
  init_fan_in(a, 12, r1);
  init_fan_in(b, 12, r2);
  EXPECT_EQ(a, b);
  EXPECT_LE(a.cwiseAbs().maxCoeff(), std::sqrt(3.0 / 12.0));
}

}  // namespace
}  // namespace spkdiar::nn
