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

#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "spkdiar/error.hpp"
#include "spkdiar/tensor_io.hpp"

namespace spkdiar::ecapa {

using nn::Mode;
using nn::Seq;

namespace {

constexpr double kCosClamp = 1.0 - 1e-7;

Seq with_data(const Seq& layout, MatrixXd data) {
  Seq s;
  s.data = std::move(data);
  s.offsets = layout.offsets;
  return s;
}

Seq relu(const Seq& x) { return with_data(x, nn::relu(x.data)); }

Seq relu_backward(const Seq& y, const Seq& gy) {
  return with_data(y, nn::relu_backward(y.data, gy.data));
}

Seq per_sample_columns(MatrixXd m) {
  Seq s;
  s.offsets.resize(m.cols() + 1);
  for (Eigen::Index i = 0; i <= m.cols(); ++i) s.offsets[i] = i;
  s.data = std::move(m);
  return s;
}

void check_finite(const Seq& s, const char* layer) {
  SPKDIAR_CHECK(s.data.allFinite(), "non-finite activation in layer '", layer,
                "'");
}

}  // namespace

// ---------------------------------------------------------------------------

EcapaConfig EcapaConfig::full() { return EcapaConfig{}; }

EcapaConfig EcapaConfig::toy() {
  EcapaConfig c;
  c.channels = 32;
  c.embed_dim = 16;
  c.res2_scale = 4;
  c.se_bottleneck = 16;
  c.attn_bottleneck = 32;
  return c;
}

void EcapaConfig::validate() const {
  SPKDIAR_CHECK(n_mels >= 1 && channels >= 1 && embed_dim >= 1 &&
                    se_bottleneck >= 1 && attn_bottleneck >= 1 &&
                    n_classes >= 1 && n_se_res2_blocks >= 1,
                "all ECAPA dimensions must be >= 1");
  SPKDIAR_CHECK(res2_scale >= 1 && channels % res2_scale == 0, "channels (",
                channels, ") must be divisible by res2_scale (", res2_scale,
                ")");
  SPKDIAR_CHECK(static_cast<int>(dilations.size()) == n_se_res2_blocks,
                "need one dilation per SE-Res2 block");
  SPKDIAR_CHECK(kernel_size % 2 == 1 && initial_kernel % 2 == 1,
                "kernel sizes must be odd");
}

EcapaModel::EcapaModel(const EcapaConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  const int c = cfg_.channels;
  const int cm = cfg_.mfa_channels();
  conv0_ = nn::Conv1d(cfg_.n_mels, c, cfg_.initial_kernel);
  bn0_ = nn::BatchNorm1d(c);
  for (int b = 0; b < cfg_.n_se_res2_blocks; ++b) {
    Block blk;
    blk.pre = nn::Conv1d(c, c, 1);
    blk.bn_pre = nn::BatchNorm1d(c);
    blk.res2 = nn::Res2Conv(c, cfg_.res2_scale, cfg_.kernel_size,
                            cfg_.dilations[b]);
    blk.bn_res2 = nn::BatchNorm1d(c);
    blk.post = nn::Conv1d(c, c, 1);
    blk.bn_post = nn::BatchNorm1d(c);
    blk.se = nn::SqueezeExcite(c, cfg_.se_bottleneck);
    blocks_.push_back(std::move(blk));
  }
  mfa_ = nn::Conv1d(cm, cm, 1);
  bn_mfa_ = nn::BatchNorm1d(cm);
  pool_ = nn::AttentiveStatsPool(cm, cfg_.attn_bottleneck);
  bn_pool_ = nn::BatchNorm1d(2 * cm);
  fc_ = nn::Conv1d(2 * cm, cfg_.embed_dim, 1);
  centers_.resize(cfg_.n_classes, cfg_.embed_dim);

  nn::Rng rng(seed);
  conv0_.init(rng);
  for (auto& blk : blocks_) {
    blk.pre.init(rng);
    blk.res2.init(rng);
    blk.post.init(rng);
    blk.se.init(rng);
  }
  mfa_.init(rng);
  pool_.init(rng);
  fc_.init(rng);
  nn::init_fan_in(centers_.value, cfg_.embed_dim, rng);
}

EcapaModel::EcapaModel(const ModelWeights& weights)
    : EcapaModel(weights.config, 0) {
  visit([&](const std::string& name, MatrixXd& value, nn::Param*) {
    const auto it = weights.tensors.find(name);
    SPKDIAR_CHECK(it != weights.tensors.end(), "missing tensor '", name, "'");
    SPKDIAR_CHECK(it->second.rows() == value.rows() &&
                      it->second.cols() == value.cols(),
                  "shape mismatch for tensor '", name, "': expected ",
                  value.rows(), "x", value.cols(), ", got ", it->second.rows(),
                  "x", it->second.cols());
    SPKDIAR_CHECK(it->second.allFinite(), "tensor '", name,
                  "' has non-finite values");
    value = it->second;
  });
}

void EcapaModel::visit(const nn::TensorVisitor& v) {
  conv0_.visit("conv0", v);
  bn0_.visit("bn0", v);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string p = "block" + std::to_string(b);
    auto& blk = blocks_[b];
    blk.pre.visit(p + ".pre", v);
    blk.bn_pre.visit(p + ".bn_pre", v);
    blk.res2.visit(p + ".res2", v);
    blk.bn_res2.visit(p + ".bn_res2", v);
    blk.post.visit(p + ".post", v);
    blk.bn_post.visit(p + ".bn_post", v);
    blk.se.visit(p + ".se", v);
  }
  mfa_.visit("mfa", v);
  bn_mfa_.visit("bn_mfa", v);
  pool_.visit("pool", v);
  bn_pool_.visit("bn_pool", v);
  fc_.visit("fc", v);
  v("aam.centers", centers_.value, &centers_);
}

ModelWeights EcapaModel::weights() const {
  ModelWeights w;
  w.config = cfg_;
  // visit() only hands out references; nothing is modified here.
  const_cast<EcapaModel*>(this)->visit(
      [&](const std::string& name, MatrixXd& value, nn::Param*) {
        w.tensors.emplace(name, value);
      });
  return w;
}

std::vector<std::pair<std::string, nn::Param*>> EcapaModel::parameters() {
  std::vector<std::pair<std::string, nn::Param*>> out;
  visit([&](const std::string& name, MatrixXd&, nn::Param* p) {
    if (p) out.emplace_back(name, p);
  });
  return out;
}

void EcapaModel::zero_grad() {
  for (auto& [name, p] : parameters()) p->zero_grad();
}

MatrixXd EcapaModel::run(const Seq& x, Mode mode, Tape* tape) const {
  SPKDIAR_CHECK(x.channels() == cfg_.n_mels, "model expects ", cfg_.n_mels,
                " Mel bins, got ", x.channels());
  Tape t;
  t.x = x;
  t.c0 = conv0_.forward(x);
  t.r0 = relu(t.c0);
  t.a0 = bn0_.forward(t.r0, mode);
  check_finite(t.a0, "conv0");

  const Seq* prev = &t.a0;
  t.blocks.resize(blocks_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& blk = blocks_[b];
    auto& bt = t.blocks[b];
    bt.u = *prev;
    bt.p1 = blk.pre.forward(bt.u);
    bt.r1 = relu(bt.p1);
    bt.v1 = blk.bn_pre.forward(bt.r1, mode);
    bt.p2 = blk.res2.forward(bt.v1);
    bt.r2 = relu(bt.p2);
    bt.v2 = blk.bn_res2.forward(bt.r2, mode);
    bt.p3 = blk.post.forward(bt.v2);
    bt.r3 = relu(bt.p3);
    bt.v3 = blk.bn_post.forward(bt.r3, mode);
    bt.a = blk.se.forward(bt.v3);
    bt.a.data += bt.u.data;
    check_finite(bt.a, "se_res2_block");
    prev = &bt.a;
  }

  const Eigen::Index c = cfg_.channels;
  t.mfa_in = x.like(cfg_.mfa_channels());
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    t.mfa_in.data.middleRows(b * c, c) = t.blocks[b].a.data;
  t.mfa_c = mfa_.forward(t.mfa_in);
  t.mfa_r = relu(t.mfa_c);
  t.h = bn_mfa_.forward(t.mfa_r, mode);
  check_finite(t.h, "mfa");

  t.pooled = per_sample_columns(pool_.forward(t.h));
  check_finite(t.pooled, "attentive_pooling");
  t.z = bn_pool_.forward(t.pooled, mode);
  t.emb = fc_.forward(t.z).data;
  SPKDIAR_CHECK(t.emb.allFinite(), "non-finite activation in layer 'fc'");

  MatrixXd emb = t.emb;
  if (tape) *tape = std::move(t);
  return emb;
}

MatrixXd EcapaModel::forward_train(const Seq& x, Tape& tape,
                                   bool update_running) {
  MatrixXd emb = run(x, Mode::kTrain, &tape);
  if (update_running) {
    bn0_.update_running(tape.r0);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      blocks_[b].bn_pre.update_running(tape.blocks[b].r1);
      blocks_[b].bn_res2.update_running(tape.blocks[b].r2);
      blocks_[b].bn_post.update_running(tape.blocks[b].r3);
    }
    bn_mfa_.update_running(tape.mfa_r);
    bn_pool_.update_running(tape.pooled);
  }
  return emb;
}

void EcapaModel::backward(const Tape& t, const MatrixXd& g_emb) {
  SPKDIAR_CHECK(g_emb.rows() == t.emb.rows() && g_emb.cols() == t.emb.cols(),
                "embedding gradient has wrong shape");
  const Seq g_z = fc_.backward(t.z, per_sample_columns(g_emb));
  const Seq g_pooled = bn_pool_.backward(t.pooled, g_z);
  const Seq g_h = pool_.backward(t.h, g_pooled.data);
  Seq g = bn_mfa_.backward(t.mfa_r, g_h);
  g = relu_backward(t.mfa_r, g);
  const Seq g_mfa_in = mfa_.backward(t.mfa_in, g);

  const Eigen::Index c = cfg_.channels;
  Seq g_a = t.a0.like(c);  // running gradient w.r.t. the current block output
  for (std::size_t bi = blocks_.size(); bi-- > 0;) {
    auto& blk = blocks_[bi];
    const auto& bt = t.blocks[bi];
    g_a.data += g_mfa_in.data.middleRows(bi * c, c);
    Seq gv = blk.se.backward(bt.v3, g_a);
    gv = blk.bn_post.backward(bt.r3, gv);
    gv = relu_backward(bt.r3, gv);
    gv = blk.post.backward(bt.v2, gv);
    gv = blk.bn_res2.backward(bt.r2, gv);
    gv = relu_backward(bt.r2, gv);
    gv = blk.res2.backward(bt.v1, gv);
    gv = blk.bn_pre.backward(bt.r1, gv);
    gv = relu_backward(bt.r1, gv);
    gv = blk.pre.backward(bt.u, gv);
    // Skip connection: block input receives the output gradient unchanged.
    g_a.data += gv.data;
  }
  Seq g0 = bn0_.backward(t.r0, g_a);
  g0 = relu_backward(t.r0, g0);
  conv0_.backward(t.x, g0);
}

Embedding EcapaModel::embed(const features::FeatureMatrix& f) const {
  SPKDIAR_CHECK(f.num_mels() == cfg_.n_mels, "model expects ", cfg_.n_mels,
                " Mel bins, got ", f.num_mels());
  const MatrixXd emb = run(Seq::single(f.frames.transpose()), Mode::kInfer, nullptr);
  return Embedding{emb.col(0)};
}

MatrixXd EcapaModel::embed_batch(
    const std::vector<features::FeatureMatrix>& fs) const {
  std::vector<MatrixXd> xs;
  xs.reserve(fs.size());
  for (const auto& f : fs) xs.push_back(f.frames.transpose());
  return run(Seq::from_samples(xs), Mode::kInfer, nullptr);
}

Embedding forward(const features::FeatureMatrix& f, const ModelWeights& weights) {
  return EcapaModel(weights).embed(f);
}

MatrixXd se_block(const MatrixXd& x, const nn::SqueezeExcite& se) {
  return se.forward(Seq::single(x)).data;
}

MatrixXd res2_conv(const MatrixXd& x, const nn::Res2Conv& res2) {
  return res2.forward(Seq::single(x)).data;
}

VectorXd attentive_stats_pooling(const MatrixXd& h,
                                 const nn::AttentiveStatsPool& pool) {
  return pool.forward(Seq::single(h)).col(0);
}

// ---------------------------------------------------------------------------
// AAM-softmax

AamResult aam_softmax_loss(const MatrixXd& emb, const std::vector<int>& labels,
                           const MatrixXd& centers, double margin,
                           double scale) {
  const auto n_b = emb.cols();
  const auto n_k = centers.rows();
  SPKDIAR_CHECK(margin >= 0.0 && margin <= M_PI / 4.0 + 1e-12,
                "AAM margin must lie in [0, pi/4]");
  SPKDIAR_CHECK(scale > 0.0, "AAM scale must be positive");
  SPKDIAR_CHECK(static_cast<Eigen::Index>(labels.size()) == n_b,
                "label count does not match batch size");
  SPKDIAR_CHECK(centers.cols() == emb.rows(), "class centers have dimension ",
                centers.cols(), ", embeddings ", emb.rows());
  const VectorXd e_norm = emb.colwise().norm().transpose();
  const VectorXd w_norm = centers.rowwise().norm();
  for (Eigen::Index b = 0; b < n_b; ++b)
    SPKDIAR_CHECK(e_norm(b) > 0.0, "zero-norm embedding at batch index ", b);
  for (Eigen::Index k = 0; k < n_k; ++k)
    SPKDIAR_CHECK(w_norm(k) > 0.0, "zero-norm class center ", k);
  for (int y : labels)
    SPKDIAR_CHECK(y >= 0 && y < n_k, "label ", y, " outside [0, ", n_k, ")");

  const MatrixXd e_hat = emb.array().rowwise() / e_norm.transpose().array();
  const MatrixXd w_hat = centers.array().colwise() / w_norm.array();
  const MatrixXd cosines = w_hat * e_hat;  // K x B

  MatrixXd logits = scale * cosines;
  VectorXd margin_slope(n_b);  // d cos(theta + m) / d cos(theta)
  for (Eigen::Index b = 0; b < n_b; ++b) {
    const int y = labels[b];
    const double c = cosines(y, b);
    const double cc = std::clamp(c, -kCosClamp, kCosClamp);
    const double theta = std::acos(cc);
    logits(y, b) = scale * std::cos(theta + margin);
    margin_slope(b) =
        (c == cc) ? std::sin(theta + margin) / std::sin(theta) : 0.0;
  }

  AamResult r;
  MatrixXd g_logits(n_k, n_b);
  int correct = 0;
  for (Eigen::Index b = 0; b < n_b; ++b) {
    const int y = labels[b];
    const double mx = logits.col(b).maxCoeff();
    const VectorXd ex = (logits.col(b).array() - mx).exp();
    const double z = ex.sum();
    r.loss += -(logits(y, b) - mx) + std::log(z);
    g_logits.col(b) = ex / z;
    g_logits(y, b) -= 1.0;
    Eigen::Index best;
    cosines.col(b).maxCoeff(&best);
    if (best == y) ++correct;
  }
  r.loss /= static_cast<double>(n_b);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(n_b);
  g_logits /= static_cast<double>(n_b);

  MatrixXd g_cos = scale * g_logits;
  for (Eigen::Index b = 0; b < n_b; ++b) g_cos(labels[b], b) *= margin_slope(b);

  const MatrixXd g_e_hat = w_hat.transpose() * g_cos;  // D x B
  const MatrixXd g_w_hat = g_cos * e_hat.transpose();  // K x D

  // Through v -> v / |v|: g_v = (g_u - u (u . g_u)) / |v|.
  const Eigen::RowVectorXd e_dot = (e_hat.array() * g_e_hat.array()).colwise().sum();
  r.grad_emb = (g_e_hat.array() - e_hat.array().rowwise() * e_dot.array()).matrix();
  r.grad_emb = r.grad_emb.array().rowwise() / e_norm.transpose().array();
  const VectorXd w_dot = (w_hat.array() * g_w_hat.array()).rowwise().sum();
  r.grad_centers = (g_w_hat - (w_hat.array().colwise() * w_dot.array()).matrix());
  r.grad_centers = r.grad_centers.array().colwise() / w_norm.array();
  return r;
}

// ---------------------------------------------------------------------------
// Weight container

namespace {

constexpr char kWeightsMagic[4] = {'S', 'P', 'K', 'W'};
constexpr std::uint32_t kWeightsVersion = 1;

nlohmann::json config_to_json(const EcapaConfig& c) {
  return {{"n_mels", c.n_mels},
          {"channels", c.channels},
          {"embed_dim", c.embed_dim},
          {"n_se_res2_blocks", c.n_se_res2_blocks},
          {"dilations", c.dilations},
          {"kernel_size", c.kernel_size},
          {"initial_kernel", c.initial_kernel},
          {"res2_scale", c.res2_scale},
          {"se_bottleneck", c.se_bottleneck},
          {"attn_bottleneck", c.attn_bottleneck},
          {"n_classes", c.n_classes}};
}

EcapaConfig config_from_json(const nlohmann::json& j) {
  EcapaConfig c;
  c.n_mels = j.at("n_mels").get<int>();
  c.channels = j.at("channels").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.n_se_res2_blocks = j.at("n_se_res2_blocks").get<int>();
  c.dilations = j.at("dilations").get<std::vector<int>>();
  c.kernel_size = j.at("kernel_size").get<int>();
  c.initial_kernel = j.at("initial_kernel").get<int>();
  c.res2_scale = j.at("res2_scale").get<int>();
  c.se_bottleneck = j.at("se_bottleneck").get<int>();
  c.attn_bottleneck = j.at("attn_bottleneck").get<int>();
  c.n_classes = j.at("n_classes").get<int>();
  return c;
}

void validate_against(const ModelWeights& w, const EcapaConfig& expected) {
  // Constructing from the expected skeleton performs the name/shape checks.
  ModelWeights probe = w;
  probe.config = expected;
  EcapaModel check(probe);
  (void)check;
}

}  // namespace

void save_weights(const std::filesystem::path& path, const ModelWeights& w) {
  nlohmann::json manifest;
  manifest["config"] = config_to_json(w.config);
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& [name, m] : w.tensors)
    manifest["tensors"].push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}});
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  SPKDIAR_CHECK(out.good(), "cannot open '", path.string(), "' for writing");
  out.write(kWeightsMagic, 4);
  const std::uint32_t version = kWeightsVersion;
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, m] : w.tensors)
    tensor_io::write_tensor(out, tensor_io::from_matrix(m),
                            tensor_io::DType::kFloat64);
  SPKDIAR_CHECK(out.good(), "write to '", path.string(), "' failed");
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  SPKDIAR_CHECK(in.good(), "cannot open weights file '", path.string(), "'");
  char magic[4];
  in.read(magic, 4);
  SPKDIAR_CHECK(in.gcount() == 4 && std::memcmp(magic, kWeightsMagic, 4) == 0,
                "'", path.string(), "' is not a weights container");
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&len), 8);
  SPKDIAR_CHECK(in.good() && version == kWeightsVersion,
                "unsupported weights container version");
  SPKDIAR_CHECK(len < (1U << 26), "weights manifest too large");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  SPKDIAR_CHECK(in.good(), "truncated weights manifest");

  ModelWeights w;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
    w.config = config_from_json(manifest.at("config"));
  } catch (const nlohmann::json::exception& e) {
    detail::fail("bad weights manifest: ", e.what());
  }
  for (const auto& entry : manifest.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::uint64_t>>();
    const auto t = tensor_io::read_tensor(in);
    SPKDIAR_CHECK(t.shape == shape, "tensor '", name,
                  "' shape disagrees with manifest");
    w.tensors.emplace(name, tensor_io::to_matrix(t));
  }
  validate_against(w, w.config);
  return w;
}

ModelWeights load_weights(const std::filesystem::path& path,
                          const EcapaConfig& expected) {
  ModelWeights w = load_weights(path);
  validate_against(w, expected);
  return w;
}

}  // namespace spkdiar::ecapa
