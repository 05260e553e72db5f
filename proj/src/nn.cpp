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

#include <cmath>

#include "spkdiar/error.hpp"

namespace spkdiar::nn {

namespace {

Seq slice_rows(const Seq& x, Index start, Index n) {
  Seq out;
  out.data = x.data.middleRows(start, n);
  out.offsets = x.offsets;
  return out;
}

MatrixXd sigmoid(const MatrixXd& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

MatrixXd sample_means(const Seq& x) {
  MatrixXd m(x.channels(), x.num_samples());
  for (std::size_t b = 0; b < x.num_samples(); ++b)
    m.col(b) = x.sample(b).rowwise().mean();
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

Seq Seq::like(Index channels) const {
  Seq s;
  s.data = MatrixXd::Zero(channels, data.cols());
  s.offsets = offsets;
  return s;
}

Seq Seq::from_samples(const std::vector<MatrixXd>& xs) {
  SPKDIAR_CHECK(!xs.empty(), "empty batch");
  Seq s;
  s.offsets.push_back(0);
  Index total = 0;
  for (const auto& x : xs) {
    SPKDIAR_CHECK(x.rows() == xs.front().rows(), "channel count mismatch");
    SPKDIAR_CHECK(x.cols() >= 1, "sample with zero frames");
    total += x.cols();
    s.offsets.push_back(total);
  }
  s.data.resize(xs.front().rows(), total);
  for (std::size_t b = 0; b < xs.size(); ++b) s.sample(b) = xs[b];
  return s;
}

Seq Seq::single(const MatrixXd& x) { return from_samples({x}); }

void Param::resize(Index rows, Index cols) {
  value = MatrixXd::Zero(rows, cols);
  grad = MatrixXd::Zero(rows, cols);
}

void init_fan_in(MatrixXd& w, Index fan_in, Rng& rng) {
  const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
}

MatrixXd relu(const MatrixXd& x) { return x.cwiseMax(0.0); }

MatrixXd relu_backward(const MatrixXd& y, const MatrixXd& gy) {
  return (y.array() > 0.0).select(gy, 0.0);
}

// ---------------------------------------------------------------------------
// Conv1d

Conv1d::Conv1d(Index in, Index out, int kernel, int dilation)
    : in_(in), out_(out), kernel_(kernel), dilation_(dilation) {
  SPKDIAR_CHECK(in >= 1 && out >= 1, "conv channels must be >= 1");
  SPKDIAR_CHECK(kernel >= 1 && kernel % 2 == 1, "conv kernel must be odd");
  SPKDIAR_CHECK(dilation >= 1, "conv dilation must be >= 1");
  weight.resize(out, in * kernel);
  bias.resize(out, 1);
}

void Conv1d::init(Rng& rng) {
  init_fan_in(weight.value, in_ * kernel_, rng);
  bias.value.setZero();
}

void Conv1d::visit(const std::string& prefix, const TensorVisitor& v) {
  v(prefix + ".weight", weight.value, &weight);
  v(prefix + ".bias", bias.value, &bias);
}

MatrixXd Conv1d::im2col(const Seq& x) const {
  MatrixXd col = MatrixXd::Zero(in_ * kernel_, x.data.cols());
  const int centre = (kernel_ - 1) / 2;
  for (std::size_t b = 0; b < x.num_samples(); ++b) {
    const Index off = x.offsets[b];
    const Index len = x.length(b);
    for (int j = 0; j < kernel_; ++j) {
      const Index shift = static_cast<Index>(j - centre) * dilation_;
      // col[:, t] = x[:, t + shift] for t + shift in [0, len).
      const Index t0 = std::max<Index>(0, -shift);
      const Index t1 = std::min<Index>(len, len - shift);
      if (t1 <= t0) continue;
      col.block(j * in_, off + t0, in_, t1 - t0) =
          x.data.block(0, off + t0 + shift, in_, t1 - t0);
    }
  }
  return col;
}

Seq Conv1d::forward(const Seq& x) const {
  SPKDIAR_CHECK(x.channels() == in_, "conv expects ", in_,
                " input channels, got ", x.channels());
  Seq y;
  y.offsets = x.offsets;
  if (kernel_ == 1) {
    y.data = weight.value * x.data;
  } else {
    y.data = weight.value * im2col(x);
  }
  y.data.colwise() += bias.value.col(0);
  return y;
}

Seq Conv1d::backward(const Seq& x, const Seq& gy) {
  bias.grad.col(0) += gy.data.rowwise().sum();
  Seq gx = x.like(in_);
  if (kernel_ == 1) {
    weight.grad.noalias() += gy.data * x.data.transpose();
    gx.data.noalias() = weight.value.transpose() * gy.data;
    return gx;
  }
  const MatrixXd col = im2col(x);
  weight.grad.noalias() += gy.data * col.transpose();
  const MatrixXd gcol = weight.value.transpose() * gy.data;
  const int centre = (kernel_ - 1) / 2;
  for (std::size_t b = 0; b < x.num_samples(); ++b) {
    const Index off = x.offsets[b];
    const Index len = x.length(b);
    for (int j = 0; j < kernel_; ++j) {
      const Index shift = static_cast<Index>(j - centre) * dilation_;
      const Index t0 = std::max<Index>(0, -shift);
      const Index t1 = std::min<Index>(len, len - shift);
      if (t1 <= t0) continue;
      gx.data.block(0, off + t0 + shift, in_, t1 - t0) +=
          gcol.block(j * in_, off + t0, in_, t1 - t0);
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// BatchNorm1d

BatchNorm1d::BatchNorm1d(Index channels, double momentum, double eps)
    : momentum_(momentum), eps_(eps) {
  gamma.resize(channels, 1);
  gamma.value.setOnes();
  beta.resize(channels, 1);
  running_mean = MatrixXd::Zero(channels, 1);
  running_var = MatrixXd::Ones(channels, 1);
}

void BatchNorm1d::visit(const std::string& prefix, const TensorVisitor& v) {
  v(prefix + ".gamma", gamma.value, &gamma);
  v(prefix + ".beta", beta.value, &beta);
  v(prefix + ".running_mean", running_mean, nullptr);
  v(prefix + ".running_var", running_var, nullptr);
}

Seq BatchNorm1d::forward(const Seq& x, Mode mode) const {
  SPKDIAR_CHECK(x.channels() == gamma.value.rows(), "batch norm expects ",
                gamma.value.rows(), " channels, got ", x.channels());
  VectorXd mean, var;
  if (mode == Mode::kTrain) {
    mean = x.data.rowwise().mean();
    var = (x.data.colwise() - mean).array().square().rowwise().mean();
  } else {
    mean = running_mean.col(0);
    var = running_var.col(0);
  }
  const VectorXd scale =
      gamma.value.col(0).array() / (var.array() + eps_).sqrt();
  Seq y;
  y.offsets = x.offsets;
  y.data = (x.data.colwise() - mean).array().colwise() * scale.array();
  y.data.colwise() += beta.value.col(0);
  return y;
}

Seq BatchNorm1d::backward(const Seq& x, const Seq& gy) {
  const auto n = static_cast<double>(x.data.cols());
  const VectorXd mean = x.data.rowwise().mean();
  const MatrixXd centred = x.data.colwise() - mean;
  const VectorXd var = centred.array().square().rowwise().mean();
  const VectorXd inv_std = (var.array() + eps_).rsqrt();
  const MatrixXd xhat = centred.array().colwise() * inv_std.array();

  const VectorXd sum_gy = gy.data.rowwise().sum();
  const VectorXd sum_gy_xhat = (gy.data.array() * xhat.array()).rowwise().sum();
  gamma.grad.col(0) += sum_gy_xhat;
  beta.grad.col(0) += sum_gy;

  Seq gx;
  gx.offsets = x.offsets;
  const VectorXd k = gamma.value.col(0).array() * inv_std.array();
  gx.data = (gy.data.colwise() - sum_gy / n).array() -
            xhat.array().colwise() * (sum_gy_xhat / n).array();
  gx.data = gx.data.array().colwise() * k.array();
  return gx;
}

void BatchNorm1d::update_running(const Seq& x) {
  const auto n = static_cast<double>(x.data.cols());
  const VectorXd mean = x.data.rowwise().mean();
  VectorXd var = (x.data.colwise() - mean).array().square().rowwise().mean();
  if (n > 1) var *= n / (n - 1.0);
  running_mean.col(0) = (1.0 - momentum_) * running_mean.col(0) + momentum_ * mean;
  running_var.col(0) = (1.0 - momentum_) * running_var.col(0) + momentum_ * var;
}

// ---------------------------------------------------------------------------
// Res2Conv

Res2Conv::Res2Conv(Index channels, int scale, int kernel, int dilation)
    : channels_(channels), scale_(scale) {
  SPKDIAR_CHECK(scale >= 1, "res2 scale must be >= 1");
  SPKDIAR_CHECK(channels % scale == 0, "channel count ", channels,
                " is not divisible by res2 scale ", scale);
  width_ = channels / scale;
  const int n_convs = scale == 1 ? 1 : scale - 1;
  for (int i = 0; i < n_convs; ++i)
    convs_.emplace_back(width_, width_, kernel, dilation);
}

void Res2Conv::init(Rng& rng) {
  for (auto& c : convs_) c.init(rng);
}

void Res2Conv::visit(const std::string& prefix, const TensorVisitor& v) {
  for (std::size_t i = 0; i < convs_.size(); ++i)
    convs_[i].visit(prefix + ".conv" + std::to_string(i), v);
}

std::vector<Seq> Res2Conv::group_inputs(const Seq& x,
                                        std::vector<Seq>* outputs) const {
  SPKDIAR_CHECK(x.channels() == channels_, "res2 expects ", channels_,
                " channels, got ", x.channels());
  std::vector<Seq> ins;
  if (scale_ == 1) {
    ins.push_back(x);
    if (outputs) outputs->push_back(convs_[0].forward(x));
    return ins;
  }
  Seq prev = slice_rows(x, 0, width_);
  if (outputs) outputs->push_back(prev);
  for (int i = 1; i < scale_; ++i) {
    Seq in = slice_rows(x, i * width_, width_);
    in.data += prev.data;
    prev = convs_[i - 1].forward(in);
    ins.push_back(std::move(in));
    if (outputs) outputs->push_back(prev);
  }
  return ins;
}

Seq Res2Conv::forward(const Seq& x) const {
  std::vector<Seq> outs;
  group_inputs(x, &outs);
  if (scale_ == 1) return outs[0];
  Seq y = x.like(channels_);
  for (int i = 0; i < scale_; ++i)
    y.data.middleRows(i * width_, width_) = outs[i].data;
  return y;
}

Seq Res2Conv::backward(const Seq& x, const Seq& gy) {
  const std::vector<Seq> ins = group_inputs(x, nullptr);
  if (scale_ == 1) return convs_[0].backward(ins[0], gy);
  Seq gx = x.like(channels_);
  // Gradient flowing into y_i, including contributions from group i + 1.
  Seq carry = slice_rows(gy, (scale_ - 1) * width_, width_);
  for (int i = scale_ - 1; i >= 1; --i) {
    const Seq g_in = convs_[i - 1].backward(ins[i - 1], carry);
    gx.data.middleRows(i * width_, width_) = g_in.data;
    carry = slice_rows(gy, (i - 1) * width_, width_);
    carry.data += g_in.data;
  }
  gx.data.topRows(width_) = carry.data;
  return gx;
}

// ---------------------------------------------------------------------------
// SqueezeExcite

SqueezeExcite::SqueezeExcite(Index channels, Index bottleneck) {
  w1.resize(bottleneck, channels);
  b1.resize(bottleneck, 1);
  w2.resize(channels, bottleneck);
  b2.resize(channels, 1);
}

void SqueezeExcite::init(Rng& rng) {
  init_fan_in(w1.value, w1.value.cols(), rng);
  init_fan_in(w2.value, w2.value.cols(), rng);
  b1.value.setZero();
  b2.value.setZero();
}

void SqueezeExcite::visit(const std::string& prefix, const TensorVisitor& v) {
  v(prefix + ".w1", w1.value, &w1);
  v(prefix + ".b1", b1.value, &b1);
  v(prefix + ".w2", w2.value, &w2);
  v(prefix + ".b2", b2.value, &b2);
}

MatrixXd SqueezeExcite::gates(const Seq& x) const {
  SPKDIAR_CHECK(x.channels() == w1.value.cols(), "SE expects ",
                w1.value.cols(), " channels, got ", x.channels());
  const MatrixXd m = sample_means(x);
  MatrixXd h = w1.value * m;
  h.colwise() += b1.value.col(0);
  h = relu(h);
  MatrixXd v = w2.value * h;
  v.colwise() += b2.value.col(0);
  return sigmoid(v);
}

Seq SqueezeExcite::forward(const Seq& x) const {
  const MatrixXd g = gates(x);
  Seq y;
  y.offsets = x.offsets;
  y.data.resize(x.data.rows(), x.data.cols());
  for (std::size_t b = 0; b < x.num_samples(); ++b)
    y.sample(b) = x.sample(b).array().colwise() * g.col(b).array();
  return y;
}

Seq SqueezeExcite::backward(const Seq& x, const Seq& gy) {
  const MatrixXd m = sample_means(x);
  MatrixXd h = w1.value * m;
  h.colwise() += b1.value.col(0);
  h = relu(h);
  MatrixXd v = w2.value * h;
  v.colwise() += b2.value.col(0);
  const MatrixXd g = sigmoid(v);

  const auto n_s = x.num_samples();
  Seq gx = x.like(x.channels());
  MatrixXd dg(x.channels(), n_s);
  for (std::size_t b = 0; b < n_s; ++b) {
    dg.col(b) = (gy.sample(b).array() * x.sample(b).array()).rowwise().sum();
    gx.sample(b) = gy.sample(b).array().colwise() * g.col(b).array();
  }
  const MatrixXd dv = dg.array() * g.array() * (1.0 - g.array());
  w2.grad.noalias() += dv * h.transpose();
  b2.grad.col(0) += dv.rowwise().sum();
  const MatrixXd dh = relu_backward(h, w2.value.transpose() * dv);
  w1.grad.noalias() += dh * m.transpose();
  b1.grad.col(0) += dh.rowwise().sum();
  const MatrixXd dm = w1.value.transpose() * dh;
  for (std::size_t b = 0; b < n_s; ++b) {
    const double inv_t = 1.0 / static_cast<double>(x.length(b));
    gx.sample(b).colwise() += dm.col(b) * inv_t;
  }
  return gx;
}

// ---------------------------------------------------------------------------
// AttentiveStatsPool

struct AttentiveStatsPool::Cache {
  MatrixXd mu_g, var_g, sig_g;  // C x B, uniform statistics
  Seq context;                  // 3C x N: [h; mu_g; sig_g]
  MatrixXd act;                 // A x N, tanh activations
  Seq alpha;                    // C x N
  MatrixXd mu, var, sig;        // C x B, attentive statistics
};

AttentiveStatsPool::AttentiveStatsPool(Index channels, Index bottleneck,
                                       double std_floor)
    : channels_(channels), bottleneck_(bottleneck), floor_(std_floor) {
  wa.resize(bottleneck, 3 * channels);
  ba.resize(bottleneck, 1);
  we.resize(channels, bottleneck);
  be.resize(channels, 1);
}

void AttentiveStatsPool::init(Rng& rng) {
  init_fan_in(wa.value, wa.value.cols(), rng);
  init_fan_in(we.value, we.value.cols(), rng);
  ba.value.setZero();
  be.value.setZero();
}

void AttentiveStatsPool::visit(const std::string& prefix,
                               const TensorVisitor& v) {
  v(prefix + ".wa", wa.value, &wa);
  v(prefix + ".ba", ba.value, &ba);
  v(prefix + ".we", we.value, &we);
  v(prefix + ".be", be.value, &be);
}

AttentiveStatsPool::Cache AttentiveStatsPool::compute(const Seq& h) const {
  SPKDIAR_CHECK(h.channels() == channels_, "pooling expects ", channels_,
                " channels, got ", h.channels());
  SPKDIAR_CHECK(h.num_samples() >= 1, "pooling needs at least one sample");
  const Index c = channels_;
  const auto n_s = h.num_samples();
  const double floor_sq = floor_ * floor_;
  Cache k;
  k.mu_g.resize(c, n_s);
  k.var_g.resize(c, n_s);
  for (std::size_t b = 0; b < n_s; ++b) {
    SPKDIAR_CHECK(h.length(b) >= 1, "pooling needs T >= 1");
    const auto hb = h.sample(b);
    k.mu_g.col(b) = hb.rowwise().mean();
    k.var_g.col(b) =
        hb.array().square().rowwise().mean() - k.mu_g.col(b).array().square();
  }
  k.sig_g = k.var_g.cwiseMax(floor_sq).cwiseSqrt();

  k.context = h.like(3 * c);
  k.context.data.topRows(c) = h.data;
  for (std::size_t b = 0; b < n_s; ++b) {
    k.context.sample(b).middleRows(c, c).colwise() = k.mu_g.col(b);
    k.context.sample(b).bottomRows(c).colwise() = k.sig_g.col(b);
  }
  MatrixXd pre = wa.value * k.context.data;
  pre.colwise() += ba.value.col(0);
  k.act = pre.array().tanh();
  MatrixXd e = we.value * k.act;
  e.colwise() += be.value.col(0);

  k.alpha = h.like(c);
  k.mu.resize(c, n_s);
  k.var.resize(c, n_s);
  for (std::size_t b = 0; b < n_s; ++b) {
    const Index off = h.offsets[b];
    const Index len = h.length(b);
    auto eb = e.middleCols(off, len);
    const VectorXd mx = eb.rowwise().maxCoeff();
    MatrixXd ex = (eb.colwise() - mx).array().exp();
    const VectorXd z = ex.rowwise().sum();
    ex = ex.array().colwise() / z.array();
    k.alpha.sample(b) = ex;
    const auto hb = h.sample(b);
    k.mu.col(b) = (ex.array() * hb.array()).rowwise().sum();
    k.var.col(b) = (ex.array() * hb.array().square()).rowwise().sum() -
                   k.mu.col(b).array().square();
  }
  k.sig = k.var.cwiseMax(floor_sq).cwiseSqrt();
  return k;
}

MatrixXd AttentiveStatsPool::forward(const Seq& h) const {
  const Cache k = compute(h);
  MatrixXd out(2 * channels_, h.num_samples());
  out.topRows(channels_) = k.mu;
  out.bottomRows(channels_) = k.sig;
  return out;
}

Seq AttentiveStatsPool::attention(const Seq& h) const {
  return compute(h).alpha;
}

Seq AttentiveStatsPool::backward(const Seq& h, const MatrixXd& gy) {
  const Cache k = compute(h);
  const Index c = channels_;
  const auto n_s = h.num_samples();
  const double floor_sq = floor_ * floor_;

  const MatrixXd g_mu_in = gy.topRows(c);
  const MatrixXd g_sig = gy.bottomRows(c);
  // d sig / d var, zero where the floor is active.
  const MatrixXd g_var =
      (k.var.array() > floor_sq).select(g_sig.array() / (2.0 * k.sig.array()), 0.0);
  const MatrixXd g_mu = g_mu_in.array() - 2.0 * k.mu.array() * g_var.array();

  Seq gh = h.like(c);
  MatrixXd g_e(c, h.data.cols());
  for (std::size_t b = 0; b < n_s; ++b) {
    const Index off = h.offsets[b];
    const Index len = h.length(b);
    const auto hb = h.sample(b);
    const auto ab = k.alpha.sample(b);
    // g_alpha[c,t] = g_mu[c] h + g_var[c] h^2
    const MatrixXd g_alpha =
        (hb.array().colwise() * g_mu.col(b).array()) +
        (hb.array().square().colwise() * g_var.col(b).array());
    gh.sample(b) = ab.array().colwise() * g_mu.col(b).array() +
                   ((ab.array() * hb.array()).colwise() * g_var.col(b).array()) * 2.0;
    const VectorXd inner = (ab.array() * g_alpha.array()).rowwise().sum();
    g_e.middleCols(off, len) =
        ab.array() * (g_alpha.array().colwise() - inner.array());
  }

  we.grad.noalias() += g_e * k.act.transpose();
  be.grad.col(0) += g_e.rowwise().sum();
  const MatrixXd g_pre =
      (we.value.transpose() * g_e).array() * (1.0 - k.act.array().square());
  wa.grad.noalias() += g_pre * k.context.data.transpose();
  ba.grad.col(0) += g_pre.rowwise().sum();
  const MatrixXd g_ctx = wa.value.transpose() * g_pre;

  gh.data += g_ctx.topRows(c);
  for (std::size_t b = 0; b < n_s; ++b) {
    const Index off = h.offsets[b];
    const Index len = h.length(b);
    const VectorXd g_mu_g = g_ctx.block(c, off, c, len).rowwise().sum();
    const VectorXd g_sig_g = g_ctx.block(2 * c, off, c, len).rowwise().sum();
    const VectorXd g_var_g =
        (k.var_g.col(b).array() > floor_sq)
            .select(g_sig_g.array() / (2.0 * k.sig_g.col(b).array()), 0.0);
    const VectorXd lin =
        (g_mu_g.array() - 2.0 * k.mu_g.col(b).array() * g_var_g.array()) / len;
    auto ghb = gh.sample(b);
    ghb.colwise() += lin;
    ghb += (2.0 / len) * (h.sample(b).array().colwise() * g_var_g.array()).matrix();
  }
  return gh;
}

}  // namespace spkdiar::nn
